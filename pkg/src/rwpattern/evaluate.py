"""Detection evaluation: IoU, greedy matching, precision-recall, AP.

Boxes on the wire are corner format (x_min, y_min, x_max, y_max).
Matching follows the standard protocol: detections in descending
confidence order each claim the unmatched truth of highest IoU at or
above the threshold.  AP sums precision over recall increments,
AP = sum_n (R_n - R_{n-1}) * P_n; an interpolated variant that replaces
P_n with the running precision envelope is available behind a flag.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .errors import FormatError, ValidationError
from .geometry import BoundingBox

__all__ = [
    "DetectionRecord",
    "PRCurve",
    "iou",
    "match_detections",
    "average_precision",
    "evaluate_dataset",
    "load_boxes_file",
    "annotation_corner_boxes",
]

Corners = tuple[float, float, float, float]


def _to_corners(box) -> Corners:
    if isinstance(box, BoundingBox):
        return box.corners
    x_min, y_min, x_max, y_max = box
    return (float(x_min), float(y_min), float(x_max), float(y_max))


@dataclass(frozen=True)
class DetectionRecord:
    """One predicted box with its confidence."""

    image_id: str
    box: Corners
    confidence: float = 1.0
    soft_iou: Optional[float] = None
    order: int = 0

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence must lie in [0, 1], got {self.confidence}")
        if self.soft_iou is not None and not (0.0 <= self.soft_iou <= 1.0):
            raise ValidationError(f"soft_iou must lie in [0, 1], got {self.soft_iou}")


@dataclass
class PRCurve:
    """Precision-recall points in descending-confidence order, plus AP."""

    points: list = field(default_factory=list)  # (recall, precision)
    confidences: list = field(default_factory=list)
    ap: float = 0.0
    iou_threshold: float = 0.5

    def __post_init__(self):
        recalls = [r for r, _ in self.points]
        if any(b < a for a, b in zip(recalls, recalls[1:])):
            raise ValidationError("recall must be non-decreasing along the curve")
        if not (0.0 <= self.ap <= 1.0):
            raise ValidationError(f"ap must lie in [0, 1], got {self.ap}")

    def to_csv(self) -> str:
        lines = ["confidence,precision,recall"]
        for conf, (rec, prec) in zip(self.confidences, self.points):
            lines.append(f"{conf:.12g},{prec:.12g},{rec:.12g}")
        return "\n".join(lines) + "\n"


def iou(a, b) -> float:
    """Intersection over union of two corner-format boxes."""
    ax1, ay1, ax2, ay2 = _to_corners(a)
    bx1, by1, bx2, by2 = _to_corners(b)
    if ax2 <= ax1 or ay2 <= ay1 or bx2 <= bx1 or by2 <= by1:
        raise ValidationError("boxes must have positive extents")
    ix = min(ax2, bx2) - max(ax1, bx1)
    iy = min(ay2, by2) - max(ay1, by1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def match_detections(
    dets: Sequence[DetectionRecord], truths: Sequence, tau: float
) -> list:
    """Greedy one-to-one matching within a single image.

    Returns [(det, truth_index or None)] in descending-confidence order
    (ties broken by input order).  Each detection claims the unmatched
    truth of highest IoU >= tau; IoU ties go to the lowest truth index.
    """
    if not (0.0 < tau < 1.0):
        raise ValidationError(f"iou threshold must lie in (0, 1), got {tau}")
    truth_corners = [_to_corners(t) for t in truths]
    taken = [False] * len(truth_corners)
    out = []
    for det in sorted(dets, key=lambda d: (-d.confidence, d.order)):
        best = None
        best_iou = tau
        for idx, tc in enumerate(truth_corners):
            if taken[idx]:
                continue
            v = iou(det.box, tc)
            if v > best_iou or (v == best_iou and best is None and v >= tau):
                best = idx
                best_iou = v
        if best is not None:
            taken[best] = True
        out.append((det, best))
    return out


def average_precision(
    matches: Sequence, n_truth: int, tau: float = 0.5, envelope: bool = False
) -> PRCurve:
    """PR curve and AP from confidence-ordered match results.

    ``matches`` is the output of match_detections (possibly pooled over
    images, still sorted by descending confidence).  With ``envelope``
    each precision is replaced by the maximum precision at any equal or
    higher recall before summing.
    """
    if n_truth < 1:
        raise ValidationError("average precision needs n_truth >= 1")
    points = []
    confidences = []
    tp = 0
    for idx, (det, matched) in enumerate(matches):
        if matched is not None:
            tp += 1
        points.append((tp / n_truth, tp / (idx + 1)))
        confidences.append(det.confidence)

    precisions = [p for _, p in points]
    if envelope:
        best = 0.0
        for idx in range(len(precisions) - 1, -1, -1):
            best = max(best, precisions[idx])
            precisions[idx] = best

    ap = 0.0
    prev_recall = 0.0
    for (recall, _), prec in zip(points, precisions):
        ap += (recall - prev_recall) * prec
        prev_recall = recall
    return PRCurve(points=points, confidences=confidences, ap=ap, iou_threshold=tau)


# ---------------------------------------------------------------------------
# file-level evaluation


def annotation_corner_boxes(doc: dict) -> list[dict]:
    """Convert an annotation document's centre-format boxes to corner format."""
    out = []
    for b in doc.get("boxes", []):
        x_min, y_min, x_max, y_max = _to_corners(
            (b["cx"] - 0.5 * b["w"], b["cy"] - 0.5 * b["h"],
             b["cx"] + 0.5 * b["w"], b["cy"] + 0.5 * b["h"])
        )
        out.append({"x_min": x_min, "y_min": y_min, "x_max": x_max, "y_max": y_max})
    return out


def load_boxes_file(path) -> dict[str, list[dict]]:
    """Load boxes grouped by image id.

    Accepts the wire format (JSON list of {"image_id", "boxes": [...]}),
    a single annotation document, or a dataset manifest whose items
    reference annotation files.
    """
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)

    if isinstance(doc, list):
        grouped: dict[str, list[dict]] = {}
        for entry in doc:
            grouped.setdefault(entry["image_id"], []).extend(entry.get("boxes", []))
        return grouped
    if isinstance(doc, dict) and "boxes" in doc and "image" in doc:
        return {Path(doc["image"]["file"]).stem: annotation_corner_boxes(doc)}
    if isinstance(doc, dict) and "items" in doc:
        grouped = {}
        for item in doc["items"]:
            if item.get("error"):
                continue
            ann_path = path.parent / item["annotation"]
            with open(ann_path) as fh:
                ann = json.load(fh)
            grouped[Path(item["image"]).stem] = annotation_corner_boxes(ann)
        return grouped
    raise FormatError(f"{path}: unrecognized boxes file layout")


def evaluate_dataset(
    pred_file, truth_file, tau: float = 0.5, envelope: bool = False
) -> dict:
    """Micro-averaged AP over all images pooled, plus per-image diagnostics.

    Image ids present on only one side are listed in the report and the
    evaluation proceeds on the intersection.
    """
    preds = load_boxes_file(pred_file)
    truths = load_boxes_file(truth_file)
    shared = sorted(set(preds) & set(truths))
    only_pred = sorted(set(preds) - set(truths))
    only_truth = sorted(set(truths) - set(preds))

    pooled = []
    per_image = {}
    n_truth_total = 0
    for image_id in shared:
        dets = [
            DetectionRecord(
                image_id=image_id,
                box=(b["x_min"], b["y_min"], b["x_max"], b["y_max"]),
                confidence=float(b.get("confidence", 1.0)),
                order=k,
            )
            for k, b in enumerate(preds[image_id])
        ]
        truth_boxes = [
            (b["x_min"], b["y_min"], b["x_max"], b["y_max"]) for b in truths[image_id]
        ]
        matched = match_detections(dets, truth_boxes, tau)
        pooled.extend(matched)
        n_truth_total += len(truth_boxes)
        if truth_boxes:
            per_image[image_id] = average_precision(
                matched, len(truth_boxes), tau, envelope
            ).ap

    if n_truth_total == 0:
        raise ValidationError("no ground-truth boxes on the shared images")

    pooled.sort(key=lambda pair: (-pair[0].confidence, pair[0].image_id, pair[0].order))
    curve = average_precision(pooled, n_truth_total, tau, envelope)
    macro = (
        sum(per_image.values()) / len(per_image) if per_image else math.nan
    )
    return {
        "ap": curve.ap,
        "macro_ap": macro,
        "iou_threshold": tau,
        "envelope": envelope,
        "n_images": len(shared),
        "n_truth": n_truth_total,
        "n_detections": len(pooled),
        "per_image_ap": per_image,
        "only_in_pred": only_pred,
        "only_in_truth": only_truth,
        "pr_curve": curve,
    }
