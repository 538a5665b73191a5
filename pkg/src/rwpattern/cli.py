"""Command-line entry point.

Subcommands: simulate, render, detect, measure, dataset, sweep, fit,
eval, losses-check.  Exit codes: 0 success, 2 validation or argument
problems, 3 simulation blow-up, 4 measurement infeasible (no peaks,
span too short, or degenerate geometry).  All outputs are deterministic
for fixed flags and seed.  RW_JOBS overrides the worker count for batch
commands.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import DatasetOptions, SweepSpec, make_dataset
from .errors import BlowUpError, FormatError, MeasurementError, ValidationError
from .evaluate import evaluate_dataset
from .fieldio import read_field, write_field
from .geometry import BoundingBox, CoordMap
from .losses import losses_check
from .metrics import (
    SweepCell,
    fit_gt_log_eps,
    fit_gt_sqrt_mu,
    measure_pattern,
    sweep_rows_to_csv,
    sweep_statistics,
)
from .nlse import AmplitudeMatrix, GaussParams, auto_grid, evolve_record, gaussian_initial
from .peaks import (
    Peak,
    PeakSearchParams,
    PeakSearchResult,
    dedupe_detection,
    peak_search,
)
from .render import Colormap, render, save_png

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BLOWUP = 3
EXIT_MEASURE = 4


def _default_record_every(dt: float, nsteps: int) -> int:
    """Record at a 0.025 cadence, but never coarser than ~50 rows per run."""
    cadence = max(1, int(round(0.025 / dt)))
    return max(1, min(cadence, nsteps // 50 if nsteps >= 50 else 1))


def _parse_values(text: str) -> list[float]:
    """Comma list ("1,2,3") or inclusive range ("start:stop:step")."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValidationError("range step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        if n < 1:
            raise ValidationError(f"empty range {text!r}")
        return [start + k * step for k in range(n)]
    return [float(p) for p in text.split(",") if p.strip()]


def _peak_params(args) -> PeakSearchParams:
    return PeakSearchParams(
        eta=args.eta, level=args.level, radius=args.radius, box_px=args.box
    )


def _add_peak_flags(sub):
    sub.add_argument("--eta", type=float, default=1.7, help="peak factor over background")
    sub.add_argument("--level", type=float, default=1.0, help="background level")
    sub.add_argument("--radius", type=int, default=2, help="local-max comparison radius")
    sub.add_argument("--box", type=int, default=20, help="box side in pixels")


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    params = GaussParams(eps=args.eps, mu=args.mu)
    grid = auto_grid(
        mu=args.mu, t_max=args.t_max, dt=args.dt, length=args.length, nx=args.nx
    )
    record_every = args.record_every
    if record_every is None:
        record_every = _default_record_every(grid.dt, grid.nsteps)
    fld = gaussian_initial(grid, params)
    m = evolve_record(fld, grid, record_every=record_every, params=params)
    write_field(m, args.out)

    dx = m.dx
    mass0 = float((m.a[0] ** 2).sum() * dx)
    mass1 = float((m.a[-1] ** 2).sum() * dx)
    drift = abs(mass1 - mass0) / abs(mass0)
    print(f"wrote {args.out}: {m.nt} x {m.nx} amplitudes, t in [0, {args.t_max:g}]")
    print(f"mass drift {drift:.3e}")
    for w in m.warnings:
        print(f"warning: {w['message']}", file=sys.stderr)
    return EXIT_OK


def cmd_render(args) -> int:
    m = read_field(args.field)
    if isinstance(m, tuple):
        m = m[0]
    map_spec = CoordMap.for_matrix(m, args.size, args.size)
    img = render(m, Colormap.by_name(args.colormap), map_spec, (args.a_lo, args.a_hi))
    save_png(img, args.out)
    print(f"wrote {args.out}: {args.size} x {args.size} px")
    return EXIT_OK


def _annotation_doc(m: AmplitudeMatrix, detection, map_spec, image_file: str) -> dict:
    return {
        "image": {
            "file": image_file,
            "width": map_spec.image_w,
            "height": map_spec.image_h,
        },
        "params": {
            "eps": m.params.eps if m.params else None,
            "mu": m.params.mu if m.params else None,
        },
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


def cmd_detect(args) -> int:
    m = read_field(args.field)
    if isinstance(m, tuple):
        m = m[0]
    params = _peak_params(args)
    map_spec = CoordMap.for_matrix(m, args.size, args.size)
    detection = peak_search(m, params, map_spec)
    doc = _annotation_doc(m, detection, map_spec, image_file=Path(args.field).stem + ".png")
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.out}: {len(detection.boxes)} boxes")
    return EXIT_OK


def _detection_from_annotation(doc: dict) -> tuple[PeakSearchResult, CoordMap]:
    grid = doc["grid"]
    map_spec = CoordMap.from_dict(doc["coordmap"])
    peaks = []
    boxes = []
    for b in doc["boxes"]:
        i = int(round((b["t"] - grid["t0"]) / grid["dt_record"]))
        j = int(round((b["x"] - grid["x0"]) / grid["dx"]))
        peaks.append(Peak(i=i, j=j, t=b["t"], x=b["x"], amplitude=b["amplitude"]))
    order = sorted(range(len(peaks)), key=lambda k: (peaks[k].i, peaks[k].j))
    peaks = [peaks[k] for k in order]
    for b in (doc["boxes"][k] for k in order):
        boxes.append(
            BoundingBox(
                cx=b["cx"], cy=b["cy"], w=b["w"], h=b["h"],
                t=b["t"], x=b["x"], amplitude=b["amplitude"],
            )
        )
    label_map = np.zeros((grid["nt"], grid["nx"]), dtype=np.uint8)
    result = PeakSearchResult(label_map=label_map, peaks=peaks, boxes=boxes)
    return result, map_spec


def cmd_measure(args) -> int:
    if args.annotations:
        with open(args.annotations) as fh:
            doc = json.load(fh)
        detection, map_spec = _detection_from_annotation(doc)
        grid = doc["grid"]
        # stand-in matrix: measurement consults only the time/space axes
        m = AmplitudeMatrix(
            a=np.zeros((grid["nt"], 1)),
            t0=grid["t0"],
            dt_record=grid["dt_record"],
            x0=grid["x0"],
            dx=grid["dx"],
        )
    elif args.field:
        m = read_field(args.field)
        if isinstance(m, tuple):
            m = m[0]
        map_spec = CoordMap.for_matrix(m, args.size, args.size)
        detection = peak_search(m, _peak_params(args), map_spec)
    else:
        raise ValidationError("measure needs --field or --annotations")

    if args.nms_iou > 0.0:
        detection = dedupe_detection(detection, args.nms_iou)
    meas = measure_pattern(
        m, detection, map_spec, args.delta_t,
        theta_method=args.theta_method, theta_time_bin=args.theta_bin,
    )
    out_doc = {
        "gt": meas.gt,
        "theta": meas.theta,
        "theta_deg": math.degrees(meas.theta),
        "apex": list(meas.apex),
        "delta_t": meas.delta_t,
        "n": meas.n,
        "s_abc": meas.s_abc,
        "drw": meas.drw,
        "n_boxes": meas.n_boxes,
        "theta_source": meas.theta_source,
    }
    text = json.dumps(out_doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text, end="")
    return EXIT_OK


def cmd_dataset(args) -> int:
    eps_values = _parse_values(args.eps)
    mu_values = _parse_values(args.mu)
    sweep = SweepSpec(
        eps_values=tuple(eps_values),
        mu_values=tuple(mu_values),
        t_max=args.t_max,
        dt=args.dt,
        record_every=args.record_every or _default_record_every(
            args.dt, int(round(args.t_max / args.dt))
        ),
        length=args.length,
        nx=args.nx,
    )
    opts = DatasetOptions(
        image_size=args.size,
        colormap=args.colormap,
        peak_params=_peak_params(args),
    )
    manifest = make_dataset(sweep, seed=args.seed, out_dir=args.out, opts=opts, jobs=args.jobs)
    n_ok = sum(1 for item in manifest["items"] if item["error"] is None)
    n_fail = len(manifest["failures"])
    print(f"wrote {args.out}: {n_ok} items ({n_fail} failures), splits {manifest['splits']}")
    if n_ok == 0:
        print("all items failed", file=sys.stderr)
        return EXIT_MEASURE
    return EXIT_OK


def cmd_sweep(args) -> int:
    eps_values = _parse_values(args.eps)
    mu_values = _parse_values(args.mu)
    t_max_list = _parse_values(args.t_max)
    if len(t_max_list) == 1:
        t_max_by_mu = {mu: t_max_list[0] for mu in mu_values}
    elif len(t_max_list) == len(mu_values):
        t_max_by_mu = dict(zip(mu_values, t_max_list))
    else:
        raise ValidationError(
            "--t-max must be a single value or one value per --mu entry"
        )

    params = _peak_params(args)
    cells = []
    for eps in eps_values:
        for mu in mu_values:
            cells.append(
                _sweep_cell(
                    eps, mu, t_max_by_mu[mu], args.dt, params,
                    args.size, args.delta_t, args.theta_bin,
                    args.theta_method, args.nms_iou,
                )
            )

    stats = sweep_statistics(cells)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "sweep.csv").write_text(sweep_rows_to_csv(stats["rows"]))
    _write_grid_csv(out_dir / "drw_grid.csv", stats)
    with open(out_dir / "trends.json", "w") as fh:
        json.dump(
            {"trends": stats["trends"], "warnings": stats["warnings"]},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    if args.heatmap:
        _write_heatmap(out_dir / "drw_grid.png", stats, args.colormap)
    for w in stats["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    n_ok = len(stats["rows"])
    print(f"wrote {args.out}: {n_ok}/{len(cells)} cells measured")
    if n_ok == 0:
        return EXIT_MEASURE
    return EXIT_OK


def _sweep_cell(
    eps, mu, t_max, dt, params, size, delta_t, theta_bin, theta_method, nms_iou
) -> SweepCell:
    from .nlse import simulate_gaussian

    try:
        m = simulate_gaussian(eps=eps, mu=mu, t_max=t_max, dt=dt)
        map_spec = CoordMap.for_matrix(m, size, size)
        detection = peak_search(m, params, map_spec)
        if nms_iou > 0.0:
            detection = dedupe_detection(detection, nms_iou)
        meas = measure_pattern(
            m, detection, map_spec, delta_t,
            theta_method=theta_method, theta_time_bin=theta_bin,
        )
        return SweepCell(eps=eps, mu=mu, measurement=meas)
    except (ValidationError, BlowUpError, MeasurementError) as exc:
        return SweepCell(eps=eps, mu=mu, error=str(exc))


def _write_grid_csv(path, stats) -> None:
    eps_values = stats["eps_values"]
    lines = ["mu\\eps," + ",".join(format(e, ".12g") for e in eps_values)]
    for mu, row in zip(stats["mu_values"], stats["drw_grid"]):
        cells = [format(v, ".12g") if v is not None else "" for v in row]
        lines.append(format(mu, ".12g") + "," + ",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_heatmap(path, stats, colormap: str, cell_px: int = 32) -> None:
    grid = stats["drw_grid"]
    vals = [v for row in grid for v in row if v is not None]
    if not vals:
        return
    lo, hi = min(vals), max(vals)
    span = (hi - lo) or 1.0
    arr = np.array(
        [[(v - lo) / span if v is not None else 0.0 for v in row] for row in grid]
    )
    cmap = Colormap.by_name(colormap)
    rgb = cmap(arr)
    big = np.kron(rgb, np.ones((cell_px, cell_px, 1), dtype=np.uint8))
    # flip so the smallest mu renders at the bottom
    save_png(big[::-1], path)


def cmd_fit(args) -> int:
    rows = _read_sweep_csv(args.csv)
    if args.model == "log-eps":
        rows = [r for r in rows if args.fix is None or r["mu"] == args.fix]
        distinct = {r["mu"] for r in rows}
        if len(distinct) > 1:
            raise ValidationError(
                f"multiple mu values {sorted(distinct)} in input; pass --fix MU"
            )
        result = fit_gt_log_eps([(r["eps"], r["gt"]) for r in rows])
    else:
        rows = [r for r in rows if args.fix is None or r["eps"] == args.fix]
        distinct = {r["eps"] for r in rows}
        if len(distinct) > 1:
            raise ValidationError(
                f"multiple eps values {sorted(distinct)} in input; pass --fix EPS"
            )
        result = fit_gt_sqrt_mu([(r["mu"], r["gt"]) for r in rows])
    text = json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text, end="")
    return EXIT_OK


def _read_sweep_csv(path) -> list[dict]:
    import csv

    with open(path) as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            rows.append({k: float(v) for k, v in raw.items()})
    if not rows:
        raise ValidationError(f"{path}: empty sweep CSV")
    return rows


def cmd_eval(args) -> int:
    report = evaluate_dataset(
        args.pred, args.truth, tau=args.iou_threshold, envelope=args.envelope
    )
    curve = report.pop("pr_curve")
    if args.pr_csv:
        Path(args.pr_csv).write_text(curve.to_csv())
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text, end="")
    return EXIT_OK


def cmd_losses_check(args) -> int:
    rows = losses_check(seed=args.seed)
    width = max(len(name) for name, _, _ in rows)
    all_ok = True
    for name, ok, detail in rows:
        status = "pass" if ok else "FAIL"
        all_ok &= ok
        print(f"{name:<{width}}  {status}  {detail}")
    return EXIT_OK if all_ok else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rwpattern",
        description="Rogue-wave pattern toolkit: simulate, detect, measure, evaluate.",
        epilog="exit codes: 0 ok, 2 validation, 3 blow-up, 4 measurement infeasible",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one seeded simulation to a field file")
    p.add_argument("--eps", type=float, required=True, help="inverse seed amplitude")
    p.add_argument("--mu", type=float, required=True, help="seed half-width")
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--nx", type=int, default=None, help="grid points (power of two)")
    p.add_argument("--length", type=float, default=None, help="domain length")
    p.add_argument("--record-every", type=int, default=None, help="steps per recorded row")
    p.add_argument("--out", required=True, help="output field file (RWF1)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("render", help="render a field file to PNG")
    p.add_argument("--field", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--colormap", default="thermal", choices=["thermal", "gray"])
    p.add_argument("--a-lo", type=float, default=0.0)
    p.add_argument("--a-hi", type=float, default=3.2)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("detect", help="peak-search a field file into annotations")
    p.add_argument("--field", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=512)
    _add_peak_flags(p)
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("measure", help="pattern statistics from a field or annotations")
    p.add_argument("--field", default=None)
    p.add_argument("--annotations", default=None)
    p.add_argument("--delta-t", type=float, default=15.0)
    p.add_argument("--theta-method", default="ols", choices=["ols", "hull", "secant"],
                   help="angle estimator: envelope line fit, hull apex, or apex secants")
    p.add_argument("--theta-bin", type=float, default=0.5,
                   help="time slab width for the boundary-line fit")
    p.add_argument("--nms-iou", type=float, default=0.0,
                   help="drop boxes overlapping a brighter box at >= this IoU (0 = keep all)")
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--out", default=None)
    _add_peak_flags(p)
    p.set_defaults(fn=cmd_measure)

    p = sub.add_parser("dataset", help="generate an annotated image dataset")
    p.add_argument("--eps", required=True, help="values: '11,12,13' or '11:110:1'")
    p.add_argument("--mu", required=True, help="values: '0.5,1' or '0.5:50:0.5'")
    p.add_argument("--t-max", type=float, default=20.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--record-every", type=int, default=None)
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--length", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--colormap", default="thermal", choices=["thermal", "gray"])
    _add_peak_flags(p)
    p.set_defaults(fn=cmd_dataset)

    p = sub.add_parser("sweep", help="measure pattern statistics over a parameter grid")
    p.add_argument("--eps", required=True, help="values: '20,40' or '20:100:20'")
    p.add_argument("--mu", required=True)
    p.add_argument("--t-max", required=True, help="single value or one per mu value")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--delta-t", type=float, default=15.0)
    p.add_argument("--theta-method", default="secant",
                   choices=["ols", "hull", "secant"],
                   help="angle estimator; apex secants stay stable on the sparse "
                        "windowed peak sets a wide parameter grid produces")
    p.add_argument("--theta-bin", type=float, default=0.5,
                   help="time slab width for the ols boundary-line fit")
    p.add_argument("--nms-iou", type=float, default=0.5,
                   help="drop boxes overlapping a brighter box at >= this IoU (0 = keep all)")
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--out", required=True, help="output directory for CSV tables")
    p.add_argument("--heatmap", action="store_true", help="also write a DRW grid PNG")
    p.add_argument("--colormap", default="thermal", choices=["thermal", "gray"])
    _add_peak_flags(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("fit", help="fit GT curves from a sweep CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--model", required=True, choices=["log-eps", "sqrt-mu"])
    p.add_argument("--fix", type=float, default=None, help="fixed value of the other parameter")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("eval", help="AP of predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--envelope", action="store_true",
                   help="interpolate precision by its running envelope")
    p.add_argument("--out", default=None)
    p.add_argument("--pr-csv", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("losses-check", help="run the loss-formula verification suite")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(fn=cmd_losses_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValidationError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except MeasurementError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MEASURE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
