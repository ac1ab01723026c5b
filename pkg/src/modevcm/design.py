"""Datasets, the stacked spline design matrix and fitted-model evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spline_basis import SplineBasis, eval_transformed

VARYING = "varying"
CONSTANT = "constant"
ZERO = "zero"
LABELS = (VARYING, CONSTANT, ZERO)


class StructureError(ValueError):
    """Inputs have inconsistent shapes or violate a structural invariant."""


@dataclass(frozen=True)
class Dataset:
    """Response ``y``, covariates ``X`` (first column all ones) and index ``u``."""

    y: np.ndarray
    X: np.ndarray
    u: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        u = np.asarray(self.u, dtype=float).ravel()
        if X.ndim != 2:
            raise StructureError("X must be a 2-d array")
        if not (len(y) == X.shape[0] == len(u)):
            raise StructureError(f"length mismatch: y={len(y)}, X={X.shape[0]}, u={len(u)}")
        if X.shape[1] < 1 or np.any(X[:, 0] != 1.0):
            raise StructureError("first covariate column must be identically 1")
        for arr, name in ((y, "y"), (X, "X"), (u, "u")):
            if not np.all(np.isfinite(arr)):
                raise StructureError(f"{name} contains missing or non-finite values")
        if np.any(u < 0.0) or np.any(u > 1.0):
            raise StructureError("index values must lie in [0, 1]")
        if self.names is not None and len(self.names) != X.shape[1]:
            raise StructureError("need one name per covariate column (intercept included)")
        for arr in (y, X, u):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        """Number of covariates excluding the intercept."""
        return self.X.shape[1] - 1


def coef_blocks(gamma, q: int) -> np.ndarray:
    """View a stacked coefficient vector as ``(p + 1, q)`` covariate blocks."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 1 or gamma.size % q:
        raise StructureError(f"coefficient length {gamma.size} is not a multiple of q={q}")
    return gamma.reshape(-1, q)


def classify(gamma, q: int) -> tuple[str, ...]:
    """Label each covariate block as varying, constant or zero.

    The intercept is never labeled zero: a flat intercept is ``constant``.
    """
    blocks = coef_blocks(gamma, q)
    labels = []
    for j, b in enumerate(blocks):
        if np.any(b[1:] != 0.0):
            labels.append(VARYING)
        elif b[0] != 0.0 or j == 0:
            labels.append(CONSTANT)
        else:
            labels.append(ZERO)
    return tuple(labels)


@dataclass
class FittedModel:
    """Converged spline coefficients with the per-covariate structure."""

    gamma: np.ndarray
    basis: SplineBasis
    bandwidth: float
    labels: tuple[str, ...] = field(default=())
    converged: bool = True
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float).copy()
        coef_blocks(self.gamma, self.basis.q)
        if not self.labels:
            self.labels = classify(self.gamma, self.basis.q)

    @property
    def p(self) -> int:
        return len(self.labels) - 1

    @property
    def blocks(self) -> np.ndarray:
        return coef_blocks(self.gamma, self.basis.q)

    @property
    def constants(self) -> dict[int, float]:
        """Constant value of every constant-labeled covariate."""
        return {j: float(self.blocks[j, 0]) for j, lab in enumerate(self.labels) if lab == CONSTANT}


def build_design(data: Dataset, basis: SplineBasis) -> np.ndarray:
    """Stacked regressor: row ``i`` is ``[X_i0 B(u_i), ..., X_ip B(u_i)]``.

    Columns are covariate-major, ``q`` columns per covariate.
    """
    B = eval_transformed(basis, data.u)
    n, k = data.X.shape
    return (data.X[:, :, None] * B[:, None, :]).reshape(n, k * basis.q)


def coefficient_curve(model: FittedModel, j: int, grid) -> np.ndarray:
    """Sample the fitted coefficient function of covariate ``j`` on ``grid``."""
    if not 0 <= j <= model.p:
        raise IndexError(f"covariate index {j} out of range 0..{model.p}")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    label = model.labels[j]
    block = model.blocks[j]
    if label == ZERO:
        eval_transformed(model.basis, grid)  # domain check only
        return np.zeros(grid.size)
    if label == CONSTANT:
        eval_transformed(model.basis, grid)
        return np.full(grid.size, block[0])
    return eval_transformed(model.basis, grid) @ block


def predict(model: FittedModel, X_row, u):
    """Fitted value ``sum_j X_row[j] * alpha_j(u)``.

    ``X_row`` may be a single row with scalar ``u`` or a matrix with a
    matching vector of index values.
    """
    X_row = np.asarray(X_row, dtype=float)
    single = X_row.ndim == 1
    Xm = np.atleast_2d(X_row)
    uu = np.atleast_1d(np.asarray(u, dtype=float))
    if Xm.shape[1] != model.p + 1 or len(uu) != Xm.shape[0]:
        raise StructureError("covariate row length or index count does not match the model")
    if np.any(Xm[:, 0] != 1.0):
        raise StructureError("covariate rows must start with the intercept 1")
    curves = np.column_stack(
        [coefficient_curve(model, j, uu) for j in range(model.p + 1)]
    )
    out = np.sum(Xm * curves, axis=1)
    return float(out[0]) if single else out
