"""Coordinate maps, bounding boxes, and convex polygon overlap.

Pixel conventions: pixel (ix, iy) of an image covers the unit square
[ix, ix + 1) x [iy, iy + 1); continuous pixel coordinates therefore put
the centre of pixel ix at ix + 0.5.  Image row 0 is the top row, so a
map with time_up=True flips the vertical axis to draw increasing time
upward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .nlse import AmplitudeMatrix

__all__ = [
    "BoundingBox",
    "CoordMap",
    "center_to_corner",
    "corner_to_center",
    "polygon_area",
    "clip_polygon_convex",
    "rect_polygon",
    "box_triangle_overlap",
]


@dataclass
class BoundingBox:
    """Axis-aligned box in pixel coordinates, centre format.

    t, x, and amplitude, when present, describe the detected peak the
    box was grown from (physical time, position, and |u| there); they
    survive clipping unchanged even though cx, cy, w, h may shrink.
    """

    cx: float
    cy: float
    w: float
    h: float
    t: Optional[float] = None
    x: Optional[float] = None
    amplitude: Optional[float] = None

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValidationError(f"box size must be non-negative, got w={self.w}, h={self.h}")

    @property
    def corners(self) -> tuple[float, float, float, float]:
        return center_to_corner(self.cx, self.cy, self.w, self.h)

    @property
    def area(self) -> float:
        return self.w * self.h


def center_to_corner(cx: float, cy: float, w: float, h: float):
    return (cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)


def corner_to_center(x_min: float, y_min: float, x_max: float, y_max: float):
    if x_max < x_min or y_max < y_min:
        raise ValidationError("corner box has negative extent")
    return (0.5 * (x_min + x_max), 0.5 * (y_min + y_max), x_max - x_min, y_max - y_min)


@dataclass
class CoordMap:
    """Affine map between matrix indices (i=row/time, j=col/space) and
    continuous pixel coordinates (px, py) of an image_w x image_h image.

        px     = offset_x + scale_x * j
        py_raw = offset_y + scale_y * i
        py     = image_h - py_raw   when time_up, else py_raw

    Optional physical-axis fields let the same object translate pixels
    to (x, t) when it was built from a recorded matrix.
    """

    scale_x: float
    scale_y: float
    offset_x: float
    offset_y: float
    image_w: int
    image_h: int
    time_up: bool = True
    x0: Optional[float] = None
    dx: Optional[float] = None
    t0: Optional[float] = None
    dt_record: Optional[float] = None

    def __post_init__(self):
        if self.scale_x <= 0 or self.scale_y <= 0:
            raise ValidationError("scales must be positive")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValidationError("image size must be positive")

    @classmethod
    def for_matrix(
        cls, m: AmplitudeMatrix, image_w: int, image_h: int, time_up: bool = True
    ) -> "CoordMap":
        """Map the full matrix onto the full image, cell centres at
        pixel-block centres."""
        scale_x = image_w / m.nx
        scale_y = image_h / m.nt
        return cls(
            scale_x=scale_x,
            scale_y=scale_y,
            offset_x=0.5 * scale_x,
            offset_y=0.5 * scale_y,
            image_w=image_w,
            image_h=image_h,
            time_up=time_up,
            x0=m.x0,
            dx=m.dx,
            t0=m.t0,
            dt_record=m.dt_record,
        )

    def to_pixel(self, i, j):
        px = self.offset_x + self.scale_x * np.asarray(j, dtype=np.float64)
        py = self.offset_y + self.scale_y * np.asarray(i, dtype=np.float64)
        if self.time_up:
            py = self.image_h - py
        return px, py

    def to_matrix(self, px, py):
        """Inverse map; returns fractional (i, j)."""
        py = np.asarray(py, dtype=np.float64)
        if self.time_up:
            py = self.image_h - py
        i = (py - self.offset_y) / self.scale_y
        j = (np.asarray(px, dtype=np.float64) - self.offset_x) / self.scale_x
        return i, j

    # physical translation, available when axis metadata is present

    def _require_axes(self):
        if self.x0 is None or self.dx is None or self.t0 is None or self.dt_record is None:
            raise ValidationError("coordinate map carries no physical axis metadata")

    def pixel_to_physical(self, px, py):
        """(px, py) -> (x, t)."""
        self._require_axes()
        i, j = self.to_matrix(px, py)
        return self.x0 + self.dx * j, self.t0 + self.dt_record * i

    def physical_to_pixel(self, x, t):
        self._require_axes()
        j = (np.asarray(x, dtype=np.float64) - self.x0) / self.dx
        i = (np.asarray(t, dtype=np.float64) - self.t0) / self.dt_record
        return self.to_pixel(i, j)

    @property
    def x_per_px(self) -> float:
        self._require_axes()
        return self.dx / self.scale_x

    @property
    def t_per_px(self) -> float:
        self._require_axes()
        return self.dt_record / self.scale_y

    def to_dict(self) -> dict:
        return {
            "scale_x": self.scale_x,
            "scale_y": self.scale_y,
            "offset_x": self.offset_x,
            "offset_y": self.offset_y,
            "image_w": self.image_w,
            "image_h": self.image_h,
            "time_up": self.time_up,
            "x0": self.x0,
            "dx": self.dx,
            "t0": self.t0,
            "dt_record": self.dt_record,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoordMap":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


# ---------------------------------------------------------------------------
# convex polygon overlap


def polygon_area(poly: Sequence[tuple[float, float]]) -> float:
    """Unsigned area by the shoelace formula; 0 for fewer than 3 points."""
    if len(poly) < 3:
        return 0.0
    s = 0.0
    n = len(poly)
    for idx in range(n):
        x1, y1 = poly[idx]
        x2, y2 = poly[(idx + 1) % n]
        s += x1 * y2 - x2 * y1
    return 0.5 * abs(s)


def _signed_area(poly) -> float:
    s = 0.0
    n = len(poly)
    for idx in range(n):
        x1, y1 = poly[idx]
        x2, y2 = poly[(idx + 1) % n]
        s += x1 * y2 - x2 * y1
    return 0.5 * s


def clip_polygon_convex(subject, clip):
    """Sutherland-Hodgman clip of a polygon against a convex polygon.

    Returns the vertex list of the intersection (possibly empty).  The
    clip polygon may be given in either winding order.
    """
    clip = list(clip)
    if len(clip) < 3:
        return []
    if _signed_area(clip) < 0:
        clip = clip[::-1]

    output = list(subject)
    n = len(clip)
    for idx in range(n):
        if not output:
            break
        ex1, ey1 = clip[idx]
        ex2, ey2 = clip[(idx + 1) % n]
        # inside = on or left of the directed edge (CCW clip polygon)
        def inside(p):
            return (ex2 - ex1) * (p[1] - ey1) - (ey2 - ey1) * (p[0] - ex1) >= 0.0

        def intersect(p, q):
            dcx, dcy = ex2 - ex1, ey2 - ey1
            dpx, dpy = q[0] - p[0], q[1] - p[1]
            denom = dcx * dpy - dcy * dpx
            if denom == 0.0:
                return q
            s = (dcx * (p[1] - ey1) - dcy * (p[0] - ex1)) / denom
            return (p[0] - s * dpx, p[1] - s * dpy)

        prev_pts = output
        output = []
        m = len(prev_pts)
        for k in range(m):
            cur = prev_pts[k]
            prv = prev_pts[k - 1]
            if inside(cur):
                if not inside(prv):
                    output.append(intersect(prv, cur))
                output.append(cur)
            elif inside(prv):
                output.append(intersect(prv, cur))
    return output


def rect_polygon(x_min: float, y_min: float, x_max: float, y_max: float):
    return [(x_min, y_min), (x_max, y_min), (x_max, y_max), (x_min, y_max)]


def box_triangle_overlap(rect_corners, tri_vertices) -> float:
    """Area of intersection between an axis-aligned rectangle, given as
    (x_min, y_min, x_max, y_max), and a triangle given by 3 vertices."""
    x_min, y_min, x_max, y_max = rect_corners
    if x_max <= x_min or y_max <= y_min:
        return 0.0
    if polygon_area(tri_vertices) == 0.0:
        return 0.0
    clipped = clip_polygon_convex(rect_polygon(x_min, y_min, x_max, y_max), tri_vertices)
    return polygon_area(clipped)
