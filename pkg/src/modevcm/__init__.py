"""Penalized mode regression for varying coefficient models."""

from .design import Dataset, FittedModel, build_design, classify, coefficient_curve, predict
from .estimator import VcemConfig, fit, initial_estimate, run_step1, run_step2
from .selection import SelectionGrids, tune_and_fit
from .spline_basis import SplineBasis, build_basis, eval_raw, eval_transformed

__all__ = [
    "Dataset", "FittedModel", "SelectionGrids", "SplineBasis", "VcemConfig",
    "build_basis", "build_design", "classify", "coefficient_curve", "eval_raw",
    "eval_transformed", "fit", "initial_estimate", "predict", "run_step1", "run_step2",
    "tune_and_fit",
]
