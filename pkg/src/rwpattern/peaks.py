"""Two-pass peak detection on recorded amplitude matrices.

Pass 1 marks every cell whose amplitude reaches eta times the reference
background level.  Pass 2 keeps only cells that are the highest point
within a Chebyshev ball of radius r, which collapses each rogue-wave
event to a single representative cell.  Kept cells are grown into fixed
size boxes in image space.

Tie handling in pass 2 is deterministic: among cells of equal amplitude
within one ball, only the first in row-major scan order is promoted.  A
cell (i, j) survives iff it strictly exceeds every neighbour that
precedes it in scan order and is >= every neighbour that follows it.
Neighbours outside the matrix never suppress a cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError
from .geometry import BoundingBox, CoordMap
from .nlse import AmplitudeMatrix

__all__ = [
    "PeakSearchParams",
    "Peak",
    "PeakSearchResult",
    "threshold_pass",
    "local_max_pass",
    "peaks_from_map",
    "peaks_to_boxes",
    "dedupe_detection",
    "peak_search",
]

# Label values in a peak map.
LABEL_NONE = 0
LABEL_CANDIDATE = 1
LABEL_PEAK = 2


@dataclass(frozen=True)
class PeakSearchParams:
    """Detection thresholds.

    eta: amplification factor over the background level; must exceed 1
        so the threshold eta * level sits strictly above the background.
    level: reference background amplitude (1.0 for the unit plane wave).
    radius: radius of the local-maximum neighbourhood, in grid cells.
    box_px: side of the detection box drawn around each peak, in pixels.
    metric: "chebyshev" (square window, the default) or "euclidean"
        (disc window) for the distance-r neighbourhood.
    """

    eta: float = 1.7
    level: float = 1.0
    radius: int = 2
    box_px: int = 20
    metric: str = "chebyshev"

    def __post_init__(self):
        if self.level <= 0:
            raise ValidationError(f"level must be positive, got {self.level}")
        if self.eta <= 1.0:
            raise ValidationError(
                f"eta must exceed 1 so the threshold clears the background, got {self.eta}"
            )
        if self.radius < 1:
            raise ValidationError(f"radius must be >= 1, got {self.radius}")
        if self.box_px < 1:
            raise ValidationError(f"box_px must be >= 1, got {self.box_px}")
        if self.metric not in ("chebyshev", "euclidean"):
            raise ValidationError(f"unknown metric {self.metric!r}")

    @property
    def threshold(self) -> float:
        return self.eta * self.level

    def offsets(self) -> list:
        """Relative (di, dj) neighbour offsets within distance radius."""
        r = self.radius
        out = []
        for di in range(-r, r + 1):
            for dj in range(-r, r + 1):
                if di == 0 and dj == 0:
                    continue
                if self.metric == "euclidean" and di * di + dj * dj > r * r:
                    continue
                out.append((di, dj))
        return out


@dataclass(frozen=True)
class Peak:
    """A detected local maximum: matrix indices plus physical location."""

    i: int
    j: int
    t: float
    x: float
    amplitude: float


@dataclass
class PeakSearchResult:
    label_map: np.ndarray
    peaks: list = field(default_factory=list)
    boxes: list = field(default_factory=list)


def threshold_pass(a: np.ndarray, params: PeakSearchParams) -> np.ndarray:
    """Label cells with amplitude >= eta * level as candidates (1)."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValidationError(f"amplitude matrix must be 2-D, got shape {a.shape}")
    return (a >= params.threshold).astype(np.uint8)


def _shifted(a: np.ndarray, di: int, dj: int) -> np.ndarray:
    """Value of the neighbour at relative offset (di, dj), -inf outside."""
    nt, nx = a.shape
    out = np.full_like(a, -np.inf, dtype=np.float64)
    src_i = slice(max(di, 0), nt + min(di, 0))
    dst_i = slice(max(-di, 0), nt + min(-di, 0))
    src_j = slice(max(dj, 0), nx + min(dj, 0))
    dst_j = slice(max(-dj, 0), nx + min(-dj, 0))
    out[dst_i, dst_j] = a[src_i, src_j]
    return out


def local_max_pass(
    a: np.ndarray, candidates: np.ndarray, params: PeakSearchParams
) -> np.ndarray:
    """Promote candidates that dominate their Chebyshev r-ball to peaks (2).

    Returns the full label map: 0 background, 1 candidate, 2 peak.
    """
    a = np.asarray(a, dtype=np.float64)
    candidates = np.asarray(candidates)
    if candidates.shape != a.shape:
        raise ValidationError("candidate mask shape does not match amplitude matrix")

    max_before = np.full_like(a, -np.inf)  # offsets preceding (0, 0) in scan order
    max_after = np.full_like(a, -np.inf)   # offsets following it
    for di, dj in params.offsets():
        nb = _shifted(a, di, dj)
        if (di, dj) < (0, 0):
            np.maximum(max_before, nb, out=max_before)
        else:
            np.maximum(max_after, nb, out=max_after)

    promoted = (candidates == 1) & (a > max_before) & (a >= max_after)
    label_map = np.where(candidates == 1, LABEL_CANDIDATE, LABEL_NONE).astype(np.uint8)
    label_map[promoted] = LABEL_PEAK
    return label_map


def peaks_from_map(m: AmplitudeMatrix, label_map: np.ndarray) -> list:
    """Extract peak records (row-major order) from a label map."""
    if label_map.shape != m.a.shape:
        raise ValidationError("label map shape does not match matrix")
    out = []
    for i, j in np.argwhere(label_map == LABEL_PEAK):
        i, j = int(i), int(j)
        out.append(
            Peak(i=i, j=j, t=m.time_at(i), x=m.x_at(j), amplitude=float(m.a[i, j]))
        )
    return out


def peaks_to_boxes(
    peaks: list,
    map_spec: CoordMap,
    box_px: int = 20,
    m: Optional[AmplitudeMatrix] = None,
) -> list:
    """Grow each peak into a box_px-sided box centred on the peak's pixel,
    clipped to the image bounds.  Passing the source matrix checks that
    the map sends its index range inside the image."""
    if m is not None:
        for i, j in ((0, 0), (m.nt - 1, m.nx - 1)):
            px, py = map_spec.to_pixel(i, j)
            if not (0 <= px < map_spec.image_w and 0 <= py <= map_spec.image_h):
                raise ValidationError(
                    f"coordinate map sends cell ({i}, {j}) to ({px}, {py}), "
                    f"outside the {map_spec.image_w}x{map_spec.image_h} image"
                )
    boxes = []
    half = 0.5 * box_px
    for pk in peaks:
        px, py = map_spec.to_pixel(pk.i, pk.j)
        x_min = max(float(px) - half, 0.0)
        y_min = max(float(py) - half, 0.0)
        x_max = min(float(px) + half, float(map_spec.image_w))
        y_max = min(float(py) + half, float(map_spec.image_h))
        boxes.append(
            BoundingBox(
                cx=0.5 * (x_min + x_max),
                cy=0.5 * (y_min + y_max),
                w=x_max - x_min,
                h=y_max - y_min,
                t=pk.t,
                x=pk.x,
                amplitude=pk.amplitude,
            )
        )
    return boxes


def dedupe_detection(
    detection: PeakSearchResult, iou_threshold: float
) -> PeakSearchResult:
    """Greedy suppression of overlapping boxes (detector-style NMS).

    Walks the boxes in order of decreasing amplitude (ties: earliest
    original index) and drops any box whose pixel-space IoU with an
    already-kept box reaches ``iou_threshold``.  On coarse renderings a
    single rogue-wave unit spacing can be much smaller than the fixed
    box side, which makes raw peak boxes stack almost on top of each
    other; deduplication restores one box per visually resolvable unit.
    The label map is passed through untouched: it reflects the raw
    local-maximum scan, not the box-level pruning.
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise ValidationError(
            f"iou_threshold must lie in (0, 1], got {iou_threshold}"
        )
    boxes = detection.boxes
    peaks = detection.peaks
    if len(boxes) != len(peaks):
        raise ValidationError(
            f"detection has {len(peaks)} peaks but {len(boxes)} boxes"
        )
    corners = [
        (b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0)
        for b in boxes
    ]
    areas = [(c[2] - c[0]) * (c[3] - c[1]) for c in corners]

    def iou(i: int, j: int) -> float:
        ax0, ay0, ax1, ay1 = corners[i]
        bx0, by0, bx1, by1 = corners[j]
        iw = min(ax1, bx1) - max(ax0, bx0)
        ih = min(ay1, by1) - max(ay0, by0)
        if iw <= 0.0 or ih <= 0.0:
            return 0.0
        inter = iw * ih
        union = areas[i] + areas[j] - inter
        return inter / union if union > 0.0 else 0.0

    order = sorted(range(len(boxes)), key=lambda k: (-boxes[k].amplitude, k))
    kept: list[int] = []
    for k in order:
        if all(iou(k, j) < iou_threshold for j in kept):
            kept.append(k)
    kept.sort()
    return PeakSearchResult(
        label_map=detection.label_map,
        peaks=[peaks[k] for k in kept],
        boxes=[boxes[k] for k in kept],
    )


def peak_search(
    m: AmplitudeMatrix,
    params: Optional[PeakSearchParams] = None,
    map_spec: Optional[CoordMap] = None,
) -> PeakSearchResult:
    """Full detection pipeline on a recorded matrix.

    Without an explicit coordinate map the boxes are laid out on the
    default 512 x 512 rendering of the matrix.
    """
    if params is None:
        params = PeakSearchParams()
    if map_spec is None:
        map_spec = CoordMap.for_matrix(m, 512, 512)
    candidates = threshold_pass(m.a, params)
    label_map = local_max_pass(m.a, candidates, params)
    peaks = peaks_from_map(m, label_map)
    boxes = peaks_to_boxes(peaks, map_spec, box_px=params.box_px, m=m)
    return PeakSearchResult(label_map=label_map, peaks=peaks, boxes=boxes)
