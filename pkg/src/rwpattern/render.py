"""Amplitude-to-image rendering.

Amplitudes are normalized by a fixed range (default [0, 3.2], spanning
the unit background and the 3x breather peak) rather than per image, so
equal amplitudes render to equal colors across a whole sweep.
Resampling to the target size is nearest-neighbour through the inverse
coordinate map.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .errors import ValidationError
from .geometry import CoordMap
from .nlse import AmplitudeMatrix

__all__ = ["Colormap", "render", "save_png", "DEFAULT_RANGE"]

DEFAULT_RANGE = (0.0, 3.2)


@dataclass(frozen=True)
class Colormap:
    """Piecewise-linear colormap over control points (value, (r, g, b))."""

    name: str
    points: tuple

    def __post_init__(self):
        vals = [p[0] for p in self.points]
        if len(vals) < 2 or vals[0] != 0.0 or vals[-1] != 1.0:
            raise ValidationError("control values must run from 0 to 1")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValidationError("control values must be strictly increasing")
        for _, rgb in self.points:
            if len(rgb) != 3 or any(not (0 <= c <= 255) for c in rgb):
                raise ValidationError("control colors must be rgb triples in 0..255")

    def __call__(self, values: np.ndarray) -> np.ndarray:
        """Map values in [0, 1] to an rgb uint8 array of shape (..., 3)."""
        values = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
        xs = np.array([p[0] for p in self.points])
        out = np.empty(values.shape + (3,), dtype=np.uint8)
        for ch in range(3):
            ys = np.array([p[1][ch] for p in self.points], dtype=np.float64)
            out[..., ch] = np.rint(np.interp(values, xs, ys)).astype(np.uint8)
        return out

    @classmethod
    def thermal(cls) -> "Colormap":
        """Blue through cyan and yellow to red."""
        return cls(
            name="thermal",
            points=(
                (0.00, (0, 0, 128)),
                (0.25, (0, 96, 255)),
                (0.50, (0, 255, 255)),
                (0.75, (255, 255, 0)),
                (1.00, (255, 0, 0)),
            ),
        )

    @classmethod
    def grayscale(cls) -> "Colormap":
        return cls(name="gray", points=((0.0, (0, 0, 0)), (1.0, (255, 255, 255))))

    @classmethod
    def by_name(cls, name: str) -> "Colormap":
        if name == "thermal":
            return cls.thermal()
        if name in ("gray", "grayscale"):
            return cls.grayscale()
        raise ValidationError(f"unknown colormap {name!r}")


def render(
    m: AmplitudeMatrix,
    cmap: Optional[Colormap] = None,
    map_spec: Optional[CoordMap] = None,
    a_range: Sequence[float] = DEFAULT_RANGE,
) -> np.ndarray:
    """Render the matrix to an (image_h, image_w, 3) uint8 rgb array."""
    if cmap is None:
        cmap = Colormap.thermal()
    if map_spec is None:
        map_spec = CoordMap.for_matrix(m, 512, 512)
    a_lo, a_hi = float(a_range[0]), float(a_range[1])
    if a_lo >= a_hi:
        raise ValidationError(f"degenerate amplitude range [{a_lo}, {a_hi}]")

    w, h = map_spec.image_w, map_spec.image_h
    # nearest source cell for each pixel centre; the map is axis-aligned
    # so rows and columns resolve independently
    i_idx, _ = map_spec.to_matrix(np.zeros(h), np.arange(h) + 0.5)
    _, j_idx = map_spec.to_matrix(np.arange(w) + 0.5, np.zeros(w))
    i_idx = np.clip(np.rint(i_idx).astype(np.int64), 0, m.nt - 1)
    j_idx = np.clip(np.rint(j_idx).astype(np.int64), 0, m.nx - 1)

    norm = (m.a - a_lo) / (a_hi - a_lo)
    sampled = norm[np.ix_(i_idx, j_idx)]
    return cmap(sampled)


def save_png(img: np.ndarray, path) -> Path:
    """Write an rgb uint8 array as an 8-bit PNG."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValidationError(f"expected (h, w, 3) uint8 image, got {img.shape} {img.dtype}")
    path = Path(path)
    Image.fromarray(img, mode="RGB").save(path, format="PNG")
    return path
