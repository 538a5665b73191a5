"""Annotated dataset generation over an (eps, mu) parameter sweep.

For every parameter pair the pipeline simulates the seeded run, stores
the recorded field, renders it to a PNG, runs peak detection, and
writes an annotation document.  Items are split into train/val/test by
a seeded random partition of whole images at 60/20/20 (integer floor
for train and val, remainder to test).

All outputs are deterministic for a fixed seed and flag set: no
timestamps, sorted JSON keys, and a fixed item order (eps-major).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import RwError
from .evaluate import annotation_corner_boxes
from .fieldio import read_field, write_field
from .geometry import CoordMap
from .nlse import simulate_gaussian
from .peaks import PeakSearchParams, peak_search
from .render import Colormap, render, save_png

__all__ = [
    "SweepSpec",
    "DatasetOptions",
    "make_dataset",
    "split_sizes",
    "assign_splits",
    "annotation_corner_boxes",
    "load_manifest",
]


@dataclass(frozen=True)
class SweepSpec:
    """Parameter grid and simulation settings shared by all items."""

    eps_values: tuple
    mu_values: tuple
    t_max: float = 20.0
    dt: float = 1e-3
    record_every: int = 25
    length: Optional[float] = None
    nx: Optional[int] = None

    def __post_init__(self):
        if not self.eps_values or not self.mu_values:
            raise ValueError("sweep ranges must be non-empty")

    def pairs(self) -> list:
        return [(float(e), float(m)) for e in self.eps_values for m in self.mu_values]


@dataclass(frozen=True)
class DatasetOptions:
    """Rendering and detection settings for dataset generation."""

    image_size: int = 512
    colormap: str = "thermal"
    peak_params: PeakSearchParams = field(default_factory=PeakSearchParams)


def split_sizes(n: int) -> tuple[int, int, int]:
    """60/20/20 split sizes: floor for train and val, remainder to test."""
    n_train = (6 * n) // 10
    n_val = (2 * n) // 10
    return n_train, n_val, n - n_train - n_val


def assign_splits(item_ids: list, seed: int) -> dict:
    """Seeded random partition of whole items into train/val/test."""
    n = len(item_ids)
    n_train, n_val, _ = split_sizes(n)
    perm = np.random.default_rng(seed).permutation(n)
    tags = {}
    for rank, idx in enumerate(perm):
        if rank < n_train:
            tag = "train"
        elif rank < n_train + n_val:
            tag = "val"
        else:
            tag = "test"
        tags[item_ids[idx]] = tag
    return tags


def _item_stem(eps: float, mu: float) -> str:
    return f"rw_eps{eps:g}_mu{mu:g}"


def _build_item(args) -> dict:
    """Simulate, store, render, and detect one sweep cell.

    Runs in worker processes; touches only this item's files and
    returns the manifest record.
    """
    eps, mu, sweep_d, opts_d, out_dir = args
    sweep = SweepSpec(**sweep_d)
    opts = DatasetOptions(
        image_size=opts_d["image_size"],
        colormap=opts_d["colormap"],
        peak_params=PeakSearchParams(**opts_d["peak_params"]),
    )
    out_dir = Path(out_dir)
    stem = _item_stem(eps, mu)
    record = {"id": stem, "eps": eps, "mu": mu}
    try:
        m = simulate_gaussian(
            eps=eps,
            mu=mu,
            t_max=sweep.t_max,
            dt=sweep.dt,
            record_every=sweep.record_every,
            length=sweep.length,
            nx=sweep.nx,
        )
        field_rel = f"fields/{stem}.rwf"
        write_field(m, out_dir / field_rel)

        map_spec = CoordMap.for_matrix(m, opts.image_size, opts.image_size)
        img = render(m, Colormap.by_name(opts.colormap), map_spec)
        image_rel = f"images/{stem}.png"
        save_png(img, out_dir / image_rel)

        detection = peak_search(m, opts.peak_params, map_spec)
        ann = {
            "image": {
                "file": image_rel,
                "width": opts.image_size,
                "height": opts.image_size,
            },
            "params": {"eps": eps, "mu": mu},
            "grid": {
                "x0": m.x0,
                "dx": m.dx,
                "t0": m.t0,
                "dt_record": m.dt_record,
                "nt": m.nt,
                "nx": m.nx,
            },
            "coordmap": map_spec.to_dict(),
            "boxes": [
                {
                    "cx": b.cx,
                    "cy": b.cy,
                    "w": b.w,
                    "h": b.h,
                    "t": b.t,
                    "x": b.x,
                    "amplitude": b.amplitude,
                }
                for b in detection.boxes
            ],
            "gt_time": min((pk.t for pk in detection.peaks), default=None),
        }
        ann_rel = f"annotations/{stem}.json"
        with open(out_dir / ann_rel, "w") as fh:
            json.dump(ann, fh, indent=2, sort_keys=True)
            fh.write("\n")

        record.update(
            {
                "image": image_rel,
                "annotation": ann_rel,
                "field": field_rel,
                "n_boxes": len(detection.boxes),
                "gt_time": ann["gt_time"],
                "warnings": m.warnings,
                "error": None,
            }
        )
    except RwError as exc:
        record.update({"error": str(exc)})
    return record


def _resolve_jobs(jobs: Optional[int]) -> int:
    if jobs is None:
        env = os.environ.get("RW_JOBS")
        if env:
            jobs = int(env)
        else:
            jobs = os.cpu_count() or 1
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    return jobs


def make_dataset(
    sweep: SweepSpec,
    seed: int,
    out_dir,
    opts: Optional[DatasetOptions] = None,
    jobs: Optional[int] = None,
) -> dict:
    """Generate the full dataset and write its manifest.

    Per-item failures are recorded in the manifest and the batch
    continues; splits are assigned over the successful items only.
    Returns the manifest dict (also written to manifest.json).
    """
    if opts is None:
        opts = DatasetOptions()
    out_dir = Path(out_dir)
    for sub in ("images", "annotations", "fields"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    sweep_d = asdict(sweep)
    opts_d = {
        "image_size": opts.image_size,
        "colormap": opts.colormap,
        "peak_params": asdict(opts.peak_params),
    }
    tasks = [(eps, mu, sweep_d, opts_d, str(out_dir)) for eps, mu in sweep.pairs()]

    jobs = _resolve_jobs(jobs)
    if jobs == 1 or len(tasks) == 1:
        records = [_build_item(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_build_item, tasks))

    ok_ids = [r["id"] for r in records if r["error"] is None]
    tags = assign_splits(ok_ids, seed)
    for r in records:
        r["split"] = tags.get(r["id"])

    n_train, n_val, n_test = split_sizes(len(ok_ids))
    manifest = {
        "seed": seed,
        "sweep": sweep_d,
        "options": opts_d,
        "splits": {"train": n_train, "val": n_val, "test": n_test},
        "items": records,
        "failures": [r["id"] for r in records if r["error"] is not None],
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_manifest(path) -> dict:
    path = Path(path)
    with open(path) as fh:
        return json.load(fh)


def verify_manifest(manifest_path) -> list:
    """Check manifest completeness: all referenced files exist and every
    field file parses.  Returns a list of problem strings (empty = ok)."""
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent
    problems = []
    for item in manifest["items"]:
        if item.get("error"):
            continue
        for key in ("image", "annotation", "field"):
            if not (base / item[key]).exists():
                problems.append(f"{item['id']}: missing {key} file {item[key]}")
        try:
            read_field(base / item["field"])
        except Exception as exc:
            problems.append(f"{item['id']}: field file unreadable: {exc}")
    return problems


__all__.append("verify_manifest")
