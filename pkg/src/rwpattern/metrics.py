"""Pattern statistics: generation time, apex angle, fractional count, DRW.

A seeded run focuses into a triangular cascade of rogue-wave events.
The statistics gathered here describe that pattern:

    GT     time of the first detected peak,
    theta  opening angle of the cascade at its apex,
    N      fractional count of detection boxes inside the triangle
           spanning [GT, GT + delta_t],
    DRW    N * cot(theta / 2) / delta_t**2, a density per unit area.

All geometry lives in physical (x, t) coordinates with unit aspect,
since the triangle identity area = delta_t**2 * tan(theta/2) only holds
there; pixel-space angles would depend on rendering choices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateGeometryError,
    InsufficientPeaksError,
    MeasurementError,
    ValidationError,
)
from .geometry import CoordMap, box_triangle_overlap
from .nlse import AmplitudeMatrix
from .peaks import PeakSearchResult

__all__ = [
    "Triangle",
    "PatternMeasurement",
    "measure_gt",
    "estimate_theta",
    "fractional_count",
    "drw",
    "FitResultLogEps",
    "FitResultSqrtMu",
    "fit_gt_log_eps",
    "fit_gt_sqrt_mu",
    "measure_pattern",
    "sweep_statistics",
]

_REL_TOL = 1e-9

# Envelope slopes closer than this (relative to their magnitude) are treated
# as parallel: round-off on exactly-parallel boundaries otherwise leaks
# through a plain m_hi <= m_lo comparison as an opening of ~1e-16 rad.
_MIN_SLOPE_GAP = 1e-9


@dataclass(frozen=True)
class Triangle:
    """Apex-up triangle in (x, t): A at t = GT, base B-C at t = GT + delta_t,
    B left of C, symmetric about the vertical apex ray."""

    a: tuple[float, float]
    b: tuple[float, float]
    c: tuple[float, float]

    @classmethod
    def from_pattern(
        cls, apex_x: float, gt: float, delta_t: float, theta: float
    ) -> "Triangle":
        if not (0.0 < theta < math.pi):
            raise ValidationError(f"theta must lie in (0, pi), got {theta}")
        if delta_t <= 0:
            raise ValidationError(f"delta_t must be positive, got {delta_t}")
        half_base = delta_t * math.tan(0.5 * theta)
        return cls(
            a=(apex_x, gt),
            b=(apex_x - half_base, gt + delta_t),
            c=(apex_x + half_base, gt + delta_t),
        )

    @property
    def vertices(self):
        return [self.a, self.b, self.c]

    @property
    def area(self) -> float:
        (ax, at), (bx, bt), (cx, ct) = self.a, self.b, self.c
        return 0.5 * abs((bx - ax) * (ct - at) - (cx - ax) * (bt - at))


@dataclass
class PatternMeasurement:
    """One sweep cell's pattern statistics.

    The defining identities are validated on construction:
    s_abc = delta_t**2 * tan(theta/2) and drw = n / s_abc.
    """

    gt: float
    theta: float
    apex: tuple[float, float]
    delta_t: float
    n: float
    s_abc: float
    drw: float
    n_boxes: int = 0
    theta_source: str = "window"

    def __post_init__(self):
        if self.gt < 0:
            raise ValidationError(f"gt must be >= 0, got {self.gt}")
        if not (0.0 < self.theta < math.pi):
            raise ValidationError(f"theta must lie in (0, pi), got {self.theta}")
        if self.delta_t <= 0 or self.s_abc <= 0 or self.n < 0 or self.drw < 0:
            raise ValidationError("delta_t and s_abc must be positive, n and drw >= 0")
        s_expect = self.delta_t**2 * math.tan(0.5 * self.theta)
        if abs(self.s_abc - s_expect) > _REL_TOL * max(1.0, abs(s_expect)):
            raise ValidationError("s_abc inconsistent with delta_t and theta")
        drw_expect = self.n / self.s_abc
        if abs(self.drw - drw_expect) > _REL_TOL * max(1.0, abs(drw_expect)):
            raise ValidationError("drw inconsistent with n and s_abc")
        if self.n_boxes and self.n > self.n_boxes + _REL_TOL:
            raise ValidationError("fractional count exceeds the number of boxes")


def measure_gt(peaks: Sequence) -> float:
    """Time of the first detected peak."""
    if not peaks:
        raise InsufficientPeaksError("no rogue-wave peaks detected")
    return min(pk.t for pk in peaks)


def _ols_line(ts: np.ndarray, xs: np.ndarray) -> tuple[float, float]:
    """Least-squares x = slope * t + intercept."""
    t_mean = ts.mean()
    x_mean = xs.mean()
    denom = float(((ts - t_mean) ** 2).sum())
    if denom == 0.0:
        raise DegenerateGeometryError("peak times do not span an interval")
    slope = float(((ts - t_mean) * (xs - x_mean)).sum()) / denom
    return slope, float(x_mean - slope * t_mean)


def estimate_theta(
    peaks: Sequence, method: str = "ols", time_bin: float = 0.5
) -> tuple[float, tuple[float, float]]:
    """Opening angle of the peak cascade and the apex of its boundary lines.

    The default procedure groups peaks into time slabs of width
    ``time_bin``, keeps the leftmost and rightmost peak of each slab at
    their true (t, x) coordinates, fits least-squares lines x(t) to the
    two envelopes, and returns the angle between them at their
    intersection.  Slabs must be coarser than the recording cadence:
    grouping by exact recorded time leaves mostly single-peak groups,
    which collapse both envelopes onto the same points and bias the
    angle low.  ``method="hull"`` instead takes the angle between the
    two convex-hull edges meeting at the earliest-time hull vertex, as
    a cross-check on the line-fit procedure.  ``method="secant"``
    anchors at the earliest peak and takes the extreme slopes of the
    segments from that apex to every later peak; it needs no line fit,
    so it stays stable on sparse peak sets and on cascades whose
    boundary is curved rather than straight.

    Returns (theta, (apex_x, apex_t)) with theta in (0, pi).
    """
    if method == "secant":
        if len(peaks) < 3:
            raise InsufficientPeaksError(
                f"secant theta estimation needs >= 3 peaks, got {len(peaks)}"
            )
        return _secant_theta(np.array([(pk.t, pk.x) for pk in peaks]))
    if len(peaks) < 6:
        raise InsufficientPeaksError(
            f"theta estimation needs >= 6 peaks, got {len(peaks)}"
        )
    pts = np.array([(pk.t, pk.x) for pk in peaks], dtype=np.float64)
    if method == "hull":
        return _hull_theta(pts)
    if method != "ols":
        raise ValidationError(f"unknown theta method {method!r}")
    if not (time_bin > 0.0 and math.isfinite(time_bin)):
        raise ValidationError(f"time_bin must be positive, got {time_bin}")

    ts = pts[:, 0]
    keys = np.floor((ts - ts.min()) / time_bin).astype(np.int64)
    slabs = np.unique(keys)
    if slabs.size < 3:
        raise InsufficientPeaksError(
            f"theta estimation needs peaks in >= 3 time slabs, got {slabs.size}"
        )
    lo_pts = np.empty((slabs.size, 2))
    hi_pts = np.empty((slabs.size, 2))
    for idx, key in enumerate(slabs):
        sel = pts[keys == key]
        lo_pts[idx] = sel[np.argmin(sel[:, 1])]
        hi_pts[idx] = sel[np.argmax(sel[:, 1])]

    m_lo, q_lo = _ols_line(lo_pts[:, 0], lo_pts[:, 1])
    m_hi, q_hi = _ols_line(hi_pts[:, 0], hi_pts[:, 1])
    if m_hi - m_lo <= _MIN_SLOPE_GAP * max(1.0, abs(m_lo), abs(m_hi)):
        raise DegenerateGeometryError(
            f"boundary lines do not open with time (slopes {m_lo:.4g}, {m_hi:.4g})"
        )
    theta = math.atan(m_hi) - math.atan(m_lo)
    apex_t = (q_hi - q_lo) / (m_lo - m_hi)
    apex_x = m_lo * apex_t + q_lo
    return theta, (apex_x, apex_t)


def _hull_theta(pts: np.ndarray) -> tuple[float, tuple[float, float]]:
    """Angle between the two hull edges at the earliest-time hull vertex."""
    # monotone chain on (t, x)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    p = [tuple(pt) for pt in pts[order]]
    p = sorted(set(p))
    if len(p) < 3:
        raise DegenerateGeometryError("hull needs >= 3 distinct points")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for pt in p:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], pt) <= 0:
            lower.pop()
        lower.append(pt)
    for pt in reversed(p):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], pt) <= 0:
            upper.pop()
        upper.append(pt)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateGeometryError("degenerate hull")

    apex_idx = min(range(len(hull)), key=lambda k: (hull[k][0], hull[k][1]))
    apex = hull[apex_idx]
    prv = hull[apex_idx - 1]
    nxt = hull[(apex_idx + 1) % len(hull)]
    v1 = (prv[0] - apex[0], prv[1] - apex[1])
    v2 = (nxt[0] - apex[0], nxt[1] - apex[1])
    n1 = math.hypot(*v1)
    n2 = math.hypot(*v2)
    if n1 == 0.0 or n2 == 0.0:
        raise DegenerateGeometryError("repeated hull vertices at the apex")
    cosang = max(-1.0, min(1.0, (v1[0] * v2[0] + v1[1] * v2[1]) / (n1 * n2)))
    theta = math.acos(cosang)
    if not (0.0 < theta < math.pi):
        raise DegenerateGeometryError(f"hull apex angle {theta:.4g} outside (0, pi)")
    return theta, (apex[1], apex[0])


# Peaks closer to the apex than this in time are skipped by the secant
# estimator: their slope to the apex is dominated by within-unit jitter
# rather than the cascade boundary.
_SECANT_MIN_DT = 0.25


def _secant_theta(pts: np.ndarray) -> tuple[float, tuple[float, float]]:
    """Angle between the extreme apex-to-peak secants.

    The apex is the earliest peak (ties broken toward the smallest |x|),
    matching the triangle apex used by pattern measurement.
    """
    t0 = pts[:, 0].min()
    firsts = pts[pts[:, 0] == t0]
    apex_x = float(firsts[np.lexsort((firsts[:, 1], np.abs(firsts[:, 1])))[0], 1])
    rel_t = pts[:, 0] - t0
    sel = rel_t > _SECANT_MIN_DT
    if int(sel.sum()) < 2:
        raise InsufficientPeaksError(
            "secant theta estimation needs >= 2 peaks later than the apex"
        )
    slopes = (pts[sel, 1] - apex_x) / rel_t[sel]
    m_lo, m_hi = float(slopes.min()), float(slopes.max())
    if m_hi - m_lo <= _MIN_SLOPE_GAP * max(1.0, abs(m_lo), abs(m_hi)):
        raise DegenerateGeometryError(
            f"apex secants do not open with time (slopes {m_lo:.4g}, {m_hi:.4g})"
        )
    theta = math.atan(m_hi) - math.atan(m_lo)
    return theta, (apex_x, float(t0))


def fractional_count(boxes: Sequence, tri: Triangle, map_spec: CoordMap) -> float:
    """Sum of per-box overlap fractions with the triangle.

    Each pixel-space box is mapped to its physical (x, t) rectangle; the
    contribution is area(rect intersect triangle) / area(rect), so a box
    halfway across an edge counts 0.5.
    """
    if tri.area == 0.0:
        raise DegenerateGeometryError("triangle has zero area")
    half_x = 0.5 * map_spec.x_per_px
    half_t = 0.5 * map_spec.t_per_px
    total = 0.0
    for box in boxes:
        if box.w <= 0 or box.h <= 0:
            continue
        x_c, t_c = map_spec.pixel_to_physical(box.cx, box.cy)
        wx = box.w * half_x
        ht = box.h * half_t
        rect = (float(x_c) - wx, float(t_c) - ht, float(x_c) + wx, float(t_c) + ht)
        rect_area = (rect[2] - rect[0]) * (rect[3] - rect[1])
        total += box_triangle_overlap(rect, tri.vertices) / rect_area
    return total


def drw(n: float, theta: float, delta_t: float) -> float:
    """Rogue-wave density: n * cot(theta/2) / delta_t**2."""
    if not (0.0 < theta < math.pi):
        raise ValidationError(f"theta must lie in (0, pi), got {theta}")
    if delta_t <= 0:
        raise ValidationError(f"delta_t must be positive, got {delta_t}")
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")
    return n / (delta_t**2 * math.tan(0.5 * theta))


# ---------------------------------------------------------------------------
# GT curve fits


@dataclass(frozen=True)
class FitResultLogEps:
    """Parameters of GT = a * ln(eps) + b."""

    a: float
    b: float
    rss: float
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "model": "log_eps",
            "params": [self.a, self.b],
            "rss": self.rss,
            "n_samples": self.n_samples,
        }


@dataclass(frozen=True)
class FitResultSqrtMu:
    """Parameters of GT = c * sqrt(mu) + d."""

    c: float
    d: float
    rss: float
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "model": "sqrt_mu",
            "params": [self.c, self.d],
            "rss": self.rss,
            "n_samples": self.n_samples,
        }


def _linear_fit(z: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """OLS of y on z via normal equations; returns (slope, intercept, rss)."""
    if np.unique(z).size < 2:
        raise ValidationError("fit needs >= 2 distinct regressor values")
    z_mean = z.mean()
    y_mean = y.mean()
    denom = float(((z - z_mean) ** 2).sum())
    slope = float(((z - z_mean) * (y - y_mean)).sum()) / denom
    intercept = float(y_mean - slope * z_mean)
    resid = y - (slope * z + intercept)
    return slope, intercept, float((resid**2).sum())


def fit_gt_log_eps(samples: Sequence[tuple[float, float]]) -> FitResultLogEps:
    """Least-squares fit of GT against ln(eps)."""
    if len(samples) < 2:
        raise ValidationError("fit needs >= 2 samples")
    eps = np.array([s[0] for s in samples], dtype=np.float64)
    gt = np.array([s[1] for s in samples], dtype=np.float64)
    if (eps <= 0).any():
        raise ValidationError("eps values must be positive")
    a, b, rss = _linear_fit(np.log(eps), gt)
    return FitResultLogEps(a=a, b=b, rss=rss, n_samples=len(samples))


def fit_gt_sqrt_mu(samples: Sequence[tuple[float, float]]) -> FitResultSqrtMu:
    """Least-squares fit of GT against sqrt(mu)."""
    if len(samples) < 2:
        raise ValidationError("fit needs >= 2 samples")
    mu = np.array([s[0] for s in samples], dtype=np.float64)
    gt = np.array([s[1] for s in samples], dtype=np.float64)
    if (mu < 0).any():
        raise ValidationError("mu values must be non-negative")
    c, d, rss = _linear_fit(np.sqrt(mu), gt)
    return FitResultSqrtMu(c=c, d=d, rss=rss, n_samples=len(samples))


# ---------------------------------------------------------------------------
# pipeline


# A [GT, GT + delta_t] window with fewer peaks (or time slabs) than this
# falls back to the full peak set for the angle fit; few-peak windows
# (sparse wide-mu cascades) otherwise give wildly unstable boundary lines.
_THETA_MIN_PEAKS = 12
_THETA_MIN_SLABS = 4


def measure_pattern(
    m: AmplitudeMatrix,
    detection: PeakSearchResult,
    map_spec: CoordMap,
    delta_t: float,
    theta_method: str = "ols",
    theta_time_bin: float = 0.5,
) -> PatternMeasurement:
    """Measure GT, theta, N, and DRW from one detected run.

    The triangle apex sits at (x of the first peak, GT).  Theta is
    estimated from the peaks inside [GT, GT + delta_t]; when that window
    is too sparse to support a stable fit the full peak set is used
    instead (reported via theta_source).  Errors out rather than
    extrapolating when GT + delta_t exceeds the recorded span.
    """
    if not (theta_time_bin > 0.0 and math.isfinite(theta_time_bin)):
        raise ValidationError(f"theta_time_bin must be positive, got {theta_time_bin}")
    peaks = detection.peaks
    gt = measure_gt(peaks)
    t_end = m.time_at(m.nt - 1)
    if gt + delta_t > t_end + 1e-9:
        raise MeasurementError(
            f"delta_t = {delta_t:g} reaches t = {gt + delta_t:g} "
            f"beyond the recorded span ending at {t_end:g}"
        )

    first = min(peaks, key=lambda pk: (pk.i, pk.j))
    window = [pk for pk in peaks if pk.t <= gt + delta_t + 1e-9]
    theta_source = "window"
    use = window
    if theta_method == "secant":
        if len(window) < 3:
            use = peaks
            theta_source = "full"
    else:
        n_slabs = len({int((pk.t - gt) // theta_time_bin) for pk in window})
        if len(window) < _THETA_MIN_PEAKS or n_slabs < _THETA_MIN_SLABS:
            use = peaks
            theta_source = "full"
    try:
        theta, apex = estimate_theta(use, method=theta_method, time_bin=theta_time_bin)
    except (DegenerateGeometryError, InsufficientPeaksError):
        if theta_source == "window" and len(peaks) > len(window):
            theta, apex = estimate_theta(
                peaks, method=theta_method, time_bin=theta_time_bin
            )
            theta_source = "full"
        else:
            raise

    tri = Triangle.from_pattern(first.x, gt, delta_t, theta)
    n = fractional_count(detection.boxes, tri, map_spec)
    s_abc = delta_t**2 * math.tan(0.5 * theta)
    return PatternMeasurement(
        gt=gt,
        theta=theta,
        apex=apex,
        delta_t=delta_t,
        n=n,
        s_abc=s_abc,
        drw=n / s_abc,
        n_boxes=len(detection.boxes),
        theta_source=theta_source,
    )


# ---------------------------------------------------------------------------
# sweep tables


@dataclass
class SweepCell:
    """One (eps, mu) cell of a sweep: a measurement or a failure note."""

    eps: float
    mu: float
    measurement: Optional[PatternMeasurement] = None
    error: Optional[str] = None


def _adjacent_pairs(values: list[float]) -> list[tuple[float, float]]:
    s = sorted(set(values))
    return list(zip(s, s[1:]))


def sweep_statistics(cells: Sequence[SweepCell]) -> dict:
    """Aggregate sweep measurements into plot-ready tables.

    Returns a dict with:
        rows: per-cell records (eps, mu, gt, theta_deg, delta_t, n,
              s_abc, drw), skipping failed cells;
        drw_grid: {"eps": [...], "mu": [...], "drw": 2-D list [i_mu][i_eps]};
        trends: fractions of adjacent cell pairs with GT increasing and
                DRW decreasing, along eps and along mu;
        warnings: one note per skipped cell.
    """
    rows = []
    warnings = []
    valid: dict[tuple[float, float], PatternMeasurement] = {}
    for cell in cells:
        if cell.measurement is None:
            warnings.append(
                f"cell eps={cell.eps:g} mu={cell.mu:g} skipped: {cell.error or 'no measurement'}"
            )
            continue
        meas = cell.measurement
        valid[(cell.eps, cell.mu)] = meas
        rows.append(
            {
                "eps": cell.eps,
                "mu": cell.mu,
                "gt": meas.gt,
                "theta_deg": math.degrees(meas.theta),
                "delta_t": meas.delta_t,
                "n": meas.n,
                "s_abc": meas.s_abc,
                "drw": meas.drw,
            }
        )

    eps_values = sorted({e for e, _ in valid})
    mu_values = sorted({m_ for _, m_ in valid})
    grid = [
        [valid[(e, m_)].drw if (e, m_) in valid else None for e in eps_values]
        for m_ in mu_values
    ]

    def trend_counts(attr: str, direction: str, increasing: bool) -> tuple[int, int]:
        good = 0
        total = 0
        if direction == "eps":
            for m_ in mu_values:
                for e1, e2 in _adjacent_pairs(eps_values):
                    p1, p2 = valid.get((e1, m_)), valid.get((e2, m_))
                    if p1 is None or p2 is None:
                        continue
                    total += 1
                    v1, v2 = getattr(p1, attr), getattr(p2, attr)
                    good += (v2 > v1) if increasing else (v2 < v1)
        else:
            for e in eps_values:
                for m1, m2 in _adjacent_pairs(mu_values):
                    p1, p2 = valid.get((e, m1)), valid.get((e, m2))
                    if p1 is None or p2 is None:
                        continue
                    total += 1
                    v1, v2 = getattr(p1, attr), getattr(p2, attr)
                    good += (v2 > v1) if increasing else (v2 < v1)
        return good, total

    def fraction(counts: tuple[int, int]) -> Optional[float]:
        good, total = counts
        return good / total if total else None

    gt_eps, gt_mu = trend_counts("gt", "eps", True), trend_counts("gt", "mu", True)
    drw_eps = trend_counts("drw", "eps", False)
    drw_mu = trend_counts("drw", "mu", False)
    trends = {
        "gt_increasing_eps": fraction(gt_eps),
        "gt_increasing_mu": fraction(gt_mu),
        "drw_decreasing_eps": fraction(drw_eps),
        "drw_decreasing_mu": fraction(drw_mu),
        # pooled over both directions: the single fraction of adjacent
        # cell pairs that move the expected way
        "gt_increasing": fraction((gt_eps[0] + gt_mu[0], gt_eps[1] + gt_mu[1])),
        "drw_decreasing": fraction((drw_eps[0] + drw_mu[0], drw_eps[1] + drw_mu[1])),
    }
    return {
        "rows": rows,
        "eps_values": eps_values,
        "mu_values": mu_values,
        "drw_grid": grid,
        "trends": trends,
        "warnings": warnings,
    }


def sweep_rows_to_csv(rows: Sequence[dict]) -> str:
    """Render per-cell records as CSV with the documented header."""
    header = "eps,mu,gt,theta_deg,delta_t,n,s_abc,drw"
    lines = [header]
    for r in rows:
        lines.append(
            ",".join(
                format(r[k], ".12g")
                for k in ("eps", "mu", "gt", "theta_deg", "delta_t", "n", "s_abc", "drw")
            )
        )
    return "\n".join(lines) + "\n"


__all__.extend(["SweepCell", "sweep_rows_to_csv"])
