"""Reference implementations of the detector training objectives.

These are pure functions of predicted quantities (confidence p, offset
4-vector d_hat, soft-IoU s) against anchor labels (y, d, iou); no
network is involved.  Each loss has an analytic gradient alongside it,
and :func:`losses_check` verifies the gradients against central finite
differences together with the defining identities.

Probabilities are clamped to [eps_c, 1 - eps_c] (default 1e-12) before
any logarithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

__all__ = [
    "AnchorLabel",
    "AnchorPrediction",
    "FocalParams",
    "sigmoid_confidence",
    "focal_loss",
    "focal_loss_grad_p",
    "smooth_l1_box_loss",
    "smooth_l1_box_loss_grad",
    "soft_iou_loss",
    "soft_iou_loss_grad_s",
    "overall_loss",
    "dataset_mean",
    "decision_rule",
    "encode_offsets",
    "decode_offsets",
    "losses_check",
]

EPS_CLAMP = 1e-12


@dataclass(frozen=True)
class AnchorLabel:
    """Ground-truth assignment of one anchor."""

    y: int
    d: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    iou: float = 0.0

    def __post_init__(self):
        if self.y not in (0, 1):
            raise ValidationError(f"label y must be 0 or 1, got {self.y}")
        if not (0.0 <= self.iou <= 1.0):
            raise ValidationError(f"iou must lie in [0, 1], got {self.iou}")
        if len(self.d) != 4:
            raise ValidationError("offset vector d must have 4 components")


@dataclass(frozen=True)
class AnchorPrediction:
    """Predicted quantities for one anchor."""

    p: float
    d_hat: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    s: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ValidationError(f"confidence p must lie in (0, 1), got {self.p}")
        if not (0.0 < self.s < 1.0):
            raise ValidationError(f"soft-iou s must lie in (0, 1), got {self.s}")
        if len(self.d_hat) != 4:
            raise ValidationError("offset vector d_hat must have 4 components")


@dataclass(frozen=True)
class FocalParams:
    alpha: float = 0.25
    gamma: float = 2.0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.gamma < 0.0:
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}")


def sigmoid_confidence(z: float) -> float:
    """Logistic function, stable across the full float range."""
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def _clamp(v: np.ndarray, eps_c: float) -> np.ndarray:
    return np.clip(v, eps_c, 1.0 - eps_c)


def _stack(preds: Sequence[AnchorPrediction], labels: Sequence[AnchorLabel]):
    if len(preds) != len(labels):
        raise ValidationError(
            f"got {len(preds)} predictions but {len(labels)} labels"
        )
    p = np.array([pr.p for pr in preds], dtype=np.float64)
    s = np.array([pr.s for pr in preds], dtype=np.float64)
    d_hat = np.array([pr.d_hat for pr in preds], dtype=np.float64).reshape(-1, 4)
    y = np.array([lb.y for lb in labels], dtype=np.float64)
    d = np.array([lb.d for lb in labels], dtype=np.float64).reshape(-1, 4)
    iou = np.array([lb.iou for lb in labels], dtype=np.float64)
    return p, s, d_hat, y, d, iou


# ---------------------------------------------------------------------------
# classification: focal loss


def focal_loss(
    preds: Sequence[AnchorPrediction],
    labels: Sequence[AnchorLabel],
    fp: FocalParams = FocalParams(),
    eps_c: float = EPS_CLAMP,
) -> float:
    """-sum_a [ y a(1-p)^g log p + (1-y)(1-a) p^g log(1-p) ]."""
    p, _, _, y, _, _ = _stack(preds, labels)
    p = _clamp(p, eps_c)
    pos = fp.alpha * (1.0 - p) ** fp.gamma * np.log(p)
    neg = (1.0 - fp.alpha) * p**fp.gamma * np.log(1.0 - p)
    return float(-(y * pos + (1.0 - y) * neg).sum())


def focal_loss_grad_p(
    preds: Sequence[AnchorPrediction],
    labels: Sequence[AnchorLabel],
    fp: FocalParams = FocalParams(),
    eps_c: float = EPS_CLAMP,
) -> np.ndarray:
    """Partial derivative of focal_loss w.r.t. each p_a."""
    p, _, _, y, _, _ = _stack(preds, labels)
    p = _clamp(p, eps_c)
    g = fp.gamma
    one_m = 1.0 - p
    if g == 0.0:
        dpos = 1.0 / p
        dneg = -1.0 / one_m
    else:
        dpos = -g * one_m ** (g - 1.0) * np.log(p) + one_m**g / p
        dneg = g * p ** (g - 1.0) * np.log(one_m) - p**g / one_m
    return -(y * fp.alpha * dpos + (1.0 - y) * (1.0 - fp.alpha) * dneg)


# ---------------------------------------------------------------------------
# regression: smooth-L1 on the offset 4-vector norm


def smooth_l1_box_loss(
    preds: Sequence[AnchorPrediction], labels: Sequence[AnchorLabel]
) -> float:
    """sum_a y_a * Q(||d_hat_a - d_a||), quadratic below norm 1, linear above.

    The branch is taken on the norm of the whole 4-vector, not per
    component.
    """
    _, _, d_hat, y, d, _ = _stack(preds, labels)
    err = np.linalg.norm(d_hat - d, axis=1)
    q = np.where(err < 1.0, 0.5 * err**2, err - 0.5)
    return float((y * q).sum())


def smooth_l1_box_loss_grad(
    preds: Sequence[AnchorPrediction], labels: Sequence[AnchorLabel]
) -> np.ndarray:
    """Partial derivatives w.r.t. each component of d_hat_a, shape (n, 4)."""
    _, _, d_hat, y, d, _ = _stack(preds, labels)
    e = d_hat - d
    err = np.linalg.norm(e, axis=1)
    grad = np.where(
        (err < 1.0)[:, None],
        e,
        np.divide(e, np.where(err == 0.0, 1.0, err)[:, None]),
    )
    return y[:, None] * grad


# ---------------------------------------------------------------------------
# soft-IoU cross-entropy


def soft_iou_loss(
    preds: Sequence[AnchorPrediction],
    labels: Sequence[AnchorLabel],
    eps_c: float = EPS_CLAMP,
) -> float:
    """-sum_a [ iou_a log s_a + (1 - iou_a) log(1 - s_a) ]."""
    _, s, _, _, _, iou = _stack(preds, labels)
    s = _clamp(s, eps_c)
    return float(-(iou * np.log(s) + (1.0 - iou) * np.log(1.0 - s)).sum())


def soft_iou_loss_grad_s(
    preds: Sequence[AnchorPrediction],
    labels: Sequence[AnchorLabel],
    eps_c: float = EPS_CLAMP,
) -> np.ndarray:
    """Partial derivative of soft_iou_loss w.r.t. each s_a."""
    _, s, _, _, _, iou = _stack(preds, labels)
    s = _clamp(s, eps_c)
    return -(iou / s - (1.0 - iou) / (1.0 - s))


# ---------------------------------------------------------------------------
# aggregation and decision


def overall_loss(class_l: float, box_l: float, siou_l: float) -> float:
    """Unweighted sum of the three dataset-level losses."""
    return class_l + box_l + siou_l


def dataset_mean(values: Sequence[float]) -> float:
    """Mean of per-image loss values (the 1/|D| aggregation)."""
    values = list(values)
    if not values:
        raise ValidationError("dataset mean needs at least one value")
    return sum(values) / len(values)


def decision_rule(p: float) -> int:
    """Classify an anchor as rogue wave iff p >= 0.5 (boundary inclusive)."""
    if not (0.0 <= p <= 1.0):
        raise ValidationError(f"confidence must lie in [0, 1], got {p}")
    return 1 if p >= 0.5 else 0


# ---------------------------------------------------------------------------
# offset parameterization


def encode_offsets(box, anchor) -> tuple[float, float, float, float]:
    """Box (cx, cy, w, h) relative to an anchor: centre deltas normalized
    by anchor size, log-ratio extents."""
    bx, by, bw, bh = box
    ax, ay, aw, ah = anchor
    if aw <= 0 or ah <= 0 or bw <= 0 or bh <= 0:
        raise ValidationError("boxes and anchors must have positive extents")
    return ((bx - ax) / aw, (by - ay) / ah, math.log(bw / aw), math.log(bh / ah))


def decode_offsets(offsets, anchor) -> tuple[float, float, float, float]:
    dx, dy, dw, dh = offsets
    ax, ay, aw, ah = anchor
    if aw <= 0 or ah <= 0:
        raise ValidationError("anchor must have positive extents")
    return (ax + dx * aw, ay + dy * ah, aw * math.exp(dw), ah * math.exp(dh))


# ---------------------------------------------------------------------------
# verification suite


def _random_anchors(rng: np.random.Generator, n: int):
    preds = []
    labels = []
    for _ in range(n):
        preds.append(
            AnchorPrediction(
                p=float(rng.uniform(0.02, 0.98)),
                d_hat=tuple(rng.uniform(-2.0, 2.0, size=4)),
                s=float(rng.uniform(0.02, 0.98)),
            )
        )
        labels.append(
            AnchorLabel(
                y=int(rng.integers(0, 2)),
                d=tuple(rng.uniform(-2.0, 2.0, size=4)),
                iou=float(rng.uniform(0.0, 1.0)),
            )
        )
    return preds, labels


def _central_diff(f, x0: float, h: float = 1e-6) -> float:
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h)


def _check_grad_p(preds, labels, fp) -> float:
    analytic = focal_loss_grad_p(preds, labels, fp)
    worst = 0.0
    for idx, pr in enumerate(preds):
        def f(v):
            probe = list(preds)
            probe[idx] = AnchorPrediction(p=v, d_hat=pr.d_hat, s=pr.s)
            return focal_loss(probe, labels, fp)

        num = _central_diff(f, pr.p)
        worst = max(worst, abs(num - analytic[idx]) / max(1.0, abs(num)))
    return worst


def _check_grad_d(preds, labels) -> float:
    analytic = smooth_l1_box_loss_grad(preds, labels)
    worst = 0.0
    for idx, pr in enumerate(preds):
        for comp in range(4):
            def f(v):
                d_hat = list(pr.d_hat)
                d_hat[comp] = v
                probe = list(preds)
                probe[idx] = AnchorPrediction(p=pr.p, d_hat=tuple(d_hat), s=pr.s)
                return smooth_l1_box_loss(probe, labels)

            num = _central_diff(f, pr.d_hat[comp])
            worst = max(worst, abs(num - analytic[idx, comp]) / max(1.0, abs(num)))
    return worst


def _check_grad_s(preds, labels) -> float:
    analytic = soft_iou_loss_grad_s(preds, labels)
    worst = 0.0
    for idx, pr in enumerate(preds):
        def f(v):
            probe = list(preds)
            probe[idx] = AnchorPrediction(p=pr.p, d_hat=pr.d_hat, s=v)
            return soft_iou_loss(probe, labels)

        num = _central_diff(f, pr.s)
        worst = max(worst, abs(num - analytic[idx]) / max(1.0, abs(num)))
    return worst


def losses_check(seed: int = 7, n_anchors: int = 100, tol: float = 1e-5) -> list:
    """Run the gradient and identity suite; returns (name, passed, detail) rows."""
    rng = np.random.default_rng(seed)
    preds, labels = _random_anchors(rng, n_anchors)
    fp = FocalParams()
    rows = []

    err = _check_grad_p(preds, labels, fp)
    rows.append(("focal_grad_p", err < tol, f"max rel err {err:.3e}"))
    err = _check_grad_d(preds, labels)
    rows.append(("smooth_l1_grad_d", err < tol, f"max rel err {err:.3e}"))
    err = _check_grad_s(preds, labels)
    rows.append(("soft_iou_grad_s", err < tol, f"max rel err {err:.3e}"))

    # value and slope agree across the ||e|| = 1 branch point
    lo = AnchorPrediction(p=0.5, d_hat=(1.0 - 1e-9, 0.0, 0.0, 0.0))
    hi = AnchorPrediction(p=0.5, d_hat=(1.0 + 1e-9, 0.0, 0.0, 0.0))
    lb = [AnchorLabel(y=1, d=(0.0, 0.0, 0.0, 0.0))]
    v_lo = smooth_l1_box_loss([lo], lb)
    v_hi = smooth_l1_box_loss([hi], lb)
    g_lo = smooth_l1_box_loss_grad([lo], lb)[0, 0]
    g_hi = smooth_l1_box_loss_grad([hi], lb)[0, 0]
    cont = abs(v_lo - 0.5) < 1e-8 and abs(v_hi - 0.5) < 1e-8
    slope = abs(g_lo - 1.0) < 1e-8 and abs(g_hi - 1.0) < 1e-8
    rows.append(
        ("smooth_l1_branch_continuity", cont and slope,
         f"values {v_lo:.9f}/{v_hi:.9f}, slopes {g_lo:.9f}/{g_hi:.9f}")
    )

    non_neg = (
        focal_loss(preds, labels, fp) >= 0.0
        and smooth_l1_box_loss(preds, labels) >= 0.0
        and soft_iou_loss(preds, labels) >= 0.0
    )
    rows.append(("non_negativity", non_neg, "all three losses >= 0"))

    # gamma=0, alpha=0.5 collapses the focal loss onto half the BCE
    fp_red = FocalParams(alpha=0.5, gamma=0.0)
    p_arr = np.array([pr.p for pr in preds])
    y_arr = np.array([lb_.y for lb_ in labels], dtype=np.float64)
    bce = float(-(y_arr * np.log(p_arr) + (1 - y_arr) * np.log(1 - p_arr)).sum())
    diff = abs(focal_loss(preds, labels, fp_red) - 0.5 * bce)
    rows.append(("focal_bce_reduction", diff < 1e-12 * max(1.0, bce), f"abs diff {diff:.3e}"))

    perm = np.asarray(rng.permutation(n_anchors))
    preds_p = [preds[k] for k in perm]
    labels_p = [labels[k] for k in perm]
    same = (
        abs(focal_loss(preds, labels, fp) - focal_loss(preds_p, labels_p, fp)) < 1e-9
        and abs(smooth_l1_box_loss(preds, labels) - smooth_l1_box_loss(preds_p, labels_p)) < 1e-9
        and abs(soft_iou_loss(preds, labels) - soft_iou_loss(preds_p, labels_p)) < 1e-9
    )
    rows.append(("permutation_invariance", same, "losses invariant to anchor order"))

    # spot values
    v = focal_loss(
        [AnchorPrediction(p=0.5)], [AnchorLabel(y=1)], FocalParams(alpha=0.25, gamma=2.0)
    )
    expect = 0.25 * 0.25 * math.log(2.0)
    rows.append(("focal_spot_value", abs(v - expect) < 1e-12, f"{v:.9f} vs {expect:.9f}"))

    v = soft_iou_loss([AnchorPrediction(p=0.5, s=0.6)], [AnchorLabel(y=1, iou=0.8)])
    expect = -(0.8 * math.log(0.6) + 0.2 * math.log(0.4))
    rows.append(("soft_iou_spot_value", abs(v - expect) < 1e-12, f"{v:.9f} vs {expect:.9f}"))

    v = sigmoid_confidence(2.0)
    rows.append(("sigmoid_spot_value", abs(v - 0.8807970779778823) < 1e-12, f"{v:.12f}"))

    ok = decision_rule(0.5) == 1 and decision_rule(0.49) == 0 and decision_rule(1.0) == 1
    rows.append(("decision_rule_boundary", ok, "p=0.5 -> 1, p=0.49 -> 0, p=1 -> 1"))

    rt_box = (3.2, -1.5, 2.5, 4.0)
    anchor = (1.0, 2.0, 5.0, 3.0)
    back = decode_offsets(encode_offsets(rt_box, anchor), anchor)
    rt = max(abs(a - b) for a, b in zip(rt_box, back))
    rows.append(("offset_round_trip", rt < 1e-12, f"max abs err {rt:.3e}"))

    return rows
