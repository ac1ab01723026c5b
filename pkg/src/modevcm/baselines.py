"""Mean-regression comparators BSE_L1 and BSE_L2.

Same two-step structure as the modal estimator, but with squared-error loss
(weights frozen at ``1/n``). BSE_L2 penalizes ``||gamma_j*||_2`` as a group;
BSE_L1 penalizes every varying coordinate separately.
"""

from __future__ import annotations

import enum

from .design import Dataset, FittedModel
from .estimator import VcemConfig, fit
from .selection import SelectionGrids, tune_and_fit
from .spline_basis import SplineBasis


class BaselineKind(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"


def fit_baseline(data: Dataset, basis: SplineBasis, cfg: VcemConfig, kind) -> FittedModel:
    """Fixed-tuning least-squares fit; ``cfg.bandwidth`` is ignored."""
    kind = BaselineKind(kind)
    return fit(data, basis, cfg, loss="ls", norm=kind.value)


def tune_baseline(data: Dataset, kind, grids: SelectionGrids = SelectionGrids(), **kw) -> FittedModel:
    """Baseline with the shared selection harness (``log RSS`` criteria)."""
    kind = BaselineKind(kind)
    return tune_and_fit(data, grids, loss="ls", norm=kind.value, **kw)
