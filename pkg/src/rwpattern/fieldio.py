"""On-disk format for recorded field histories.

Binary layout (little-endian, no padding):

    offset  size  field
    0       4     magic "RWF1"
    4       4     u32 version (currently 1)
    8       4     u32 nt
    12      4     u32 nx
    16      8     f64 x0
    24      8     f64 dx
    32      8     f64 t0
    40      8     f64 dt_record
    48      8     f64 eps   (NaN when the run had no Gaussian seed params)
    56      8     f64 mu    (NaN likewise)
    64      1     u8 payload_kind: 0 = amplitude f64, 1 = complex f64 pairs
    65      -     payload, C order: nt*nx f64, or nt*nx*(re, im) f64 pairs

A JSON sidecar (same path plus ".json") mirrors the header fields plus
any producer warnings, so histories remain inspectable without the
binary reader.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import FormatError
from .nlse import AmplitudeMatrix, GaussParams

__all__ = ["write_field", "read_field", "read_header", "sidecar_path"]

MAGIC = b"RWF1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIddddddB")

PAYLOAD_AMPLITUDE = 0
PAYLOAD_COMPLEX = 1


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _pack_header(m: AmplitudeMatrix, payload_kind: int) -> bytes:
    eps = m.params.eps if m.params is not None else math.nan
    mu = m.params.mu if m.params is not None else math.nan
    return _HEADER.pack(
        MAGIC, VERSION, m.nt, m.nx, m.x0, m.dx, m.t0, m.dt_record, eps, mu, payload_kind
    )


def write_field(
    m: AmplitudeMatrix,
    path,
    complex_history: Optional[np.ndarray] = None,
) -> Path:
    """Write a recorded history to ``path`` plus a JSON sidecar.

    By default the amplitude payload (kind 0) is stored.  Passing the
    full complex history (shape nt x nx) stores interleaved re/im pairs
    (kind 1) instead; its magnitudes must match the matrix.
    """
    path = Path(path)
    if complex_history is None:
        kind = PAYLOAD_AMPLITUDE
        payload = np.ascontiguousarray(m.a, dtype="<f8").tobytes()
    else:
        complex_history = np.asarray(complex_history, dtype=np.complex128)
        if complex_history.shape != m.a.shape:
            raise FormatError(
                f"complex history shape {complex_history.shape} does not match "
                f"matrix shape {m.a.shape}"
            )
        kind = PAYLOAD_COMPLEX
        pairs = np.empty((m.nt, m.nx, 2), dtype="<f8")
        pairs[..., 0] = complex_history.real
        pairs[..., 1] = complex_history.imag
        payload = pairs.tobytes()

    with open(path, "wb") as fh:
        fh.write(_pack_header(m, kind))
        fh.write(payload)

    meta = {
        "format": "RWF1",
        "version": VERSION,
        "nt": m.nt,
        "nx": m.nx,
        "x0": m.x0,
        "dx": m.dx,
        "t0": m.t0,
        "dt_record": m.dt_record,
        "eps": m.params.eps if m.params is not None else None,
        "mu": m.params.mu if m.params is not None else None,
        "payload_kind": kind,
        "warnings": m.warnings,
    }
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_header(path) -> dict:
    """Parse and validate the fixed-size header."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than header ({len(raw)} bytes)")
    magic, version, nt, nx, x0, dx, t0, dt_record, eps, mu, kind = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if kind not in (PAYLOAD_AMPLITUDE, PAYLOAD_COMPLEX):
        raise FormatError(f"{path}: unknown payload kind {kind}")
    return {
        "nt": nt,
        "nx": nx,
        "x0": x0,
        "dx": dx,
        "t0": t0,
        "dt_record": dt_record,
        "eps": eps,
        "mu": mu,
        "payload_kind": kind,
    }


def read_field(path) -> Union[AmplitudeMatrix, tuple[AmplitudeMatrix, np.ndarray]]:
    """Read a history file back into an AmplitudeMatrix.

    Amplitude payloads return the matrix alone; complex payloads return
    (matrix, complex_history).
    """
    path = Path(path)
    hdr = read_header(path)
    nt, nx, kind = hdr["nt"], hdr["nx"], hdr["payload_kind"]
    n_vals = nt * nx * (2 if kind == PAYLOAD_COMPLEX else 1)
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        payload = np.fromfile(fh, dtype="<f8", count=n_vals)
    if payload.size != n_vals:
        raise FormatError(
            f"{path}: truncated payload, expected {n_vals} f64 values, got {payload.size}"
        )

    params = None
    if not (math.isnan(hdr["eps"]) or math.isnan(hdr["mu"])):
        params = GaussParams(eps=hdr["eps"], mu=hdr["mu"])

    common = dict(
        t0=hdr["t0"], dt_record=hdr["dt_record"], x0=hdr["x0"], dx=hdr["dx"], params=params
    )
    if kind == PAYLOAD_AMPLITUDE:
        return AmplitudeMatrix(a=payload.reshape(nt, nx), **common)
    pairs = payload.reshape(nt, nx, 2)
    history = pairs[..., 0] + 1j * pairs[..., 1]
    return AmplitudeMatrix(a=np.abs(history), **common), history
