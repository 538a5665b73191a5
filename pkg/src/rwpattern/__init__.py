"""Rogue-wave pattern toolkit.

Simulates rogue-wave generation on a plane-wave background of the
focusing NLSE, detects individual events with a threshold plus
local-maximum peak search, renders annotated image datasets, measures
pattern statistics (generation time, apex angle, density), and
evaluates detections against ground truth.
"""

__version__ = "0.1.0"

from .errors import (
    BlowUpError,
    DegenerateGeometryError,
    FormatError,
    InsufficientPeaksError,
    MeasurementError,
    RwError,
    ValidationError,
)
from .nlse import (
    AmplitudeMatrix,
    ComplexField,
    GaussParams,
    SimGrid,
    auto_grid,
    conserved_quantities,
    evolve_record,
    evolve_to,
    gaussian_initial,
    peregrine,
    simulate_gaussian,
    step_if_rk4,
)
from .fieldio import read_field, write_field
from .geometry import BoundingBox, CoordMap
from .peaks import (
    Peak,
    PeakSearchParams,
    PeakSearchResult,
    dedupe_detection,
    peak_search,
)
from .render import Colormap, render, save_png
from .metrics import (
    PatternMeasurement,
    Triangle,
    drw,
    estimate_theta,
    fit_gt_log_eps,
    fit_gt_sqrt_mu,
    fractional_count,
    measure_gt,
    measure_pattern,
    sweep_statistics,
)
from .evaluate import average_precision, evaluate_dataset, iou, match_detections
from .losses import (
    AnchorLabel,
    AnchorPrediction,
    FocalParams,
    focal_loss,
    losses_check,
    smooth_l1_box_loss,
    soft_iou_loss,
)
from .dataset import DatasetOptions, SweepSpec, make_dataset

__all__ = [
    "__version__",
    "RwError",
    "ValidationError",
    "BlowUpError",
    "MeasurementError",
    "InsufficientPeaksError",
    "DegenerateGeometryError",
    "FormatError",
    "SimGrid",
    "GaussParams",
    "ComplexField",
    "AmplitudeMatrix",
    "auto_grid",
    "peregrine",
    "gaussian_initial",
    "step_if_rk4",
    "evolve_to",
    "evolve_record",
    "simulate_gaussian",
    "conserved_quantities",
    "read_field",
    "write_field",
    "BoundingBox",
    "CoordMap",
    "Peak",
    "PeakSearchParams",
    "PeakSearchResult",
    "peak_search",
    "dedupe_detection",
    "Colormap",
    "render",
    "save_png",
    "PatternMeasurement",
    "Triangle",
    "measure_gt",
    "estimate_theta",
    "fractional_count",
    "drw",
    "fit_gt_log_eps",
    "fit_gt_sqrt_mu",
    "measure_pattern",
    "sweep_statistics",
    "iou",
    "match_detections",
    "average_precision",
    "evaluate_dataset",
    "AnchorLabel",
    "AnchorPrediction",
    "FocalParams",
    "focal_loss",
    "smooth_l1_box_loss",
    "soft_iou_loss",
    "losses_check",
    "SweepSpec",
    "DatasetOptions",
    "make_dataset",
]
