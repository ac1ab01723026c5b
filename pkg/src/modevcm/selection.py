"""Data-driven choice of bandwidth, knot count and penalty levels.

Bandwidth minimizes the estimated variance ratio ``G(h) F(h)^-2 / sigma^2``
over a geometric grid anchored at the residual scale. Knots and penalty
levels minimize Schwarz-type criteria ``-log Q + (log n / n) * edf``; the
least-squares baselines use ``log(RSS / n)`` in place of ``-log Q``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .design import CONSTANT, VARYING, ZERO, FittedModel, build_design, classify, coef_blocks
from .estimator import (
    VcemConfig,
    initial_estimate,
    log_q,
    refit_structure,
    rss,
    run_step1,
    run_step2,
)
from .kernel import kernel_d1, kernel_d2
from .spline_basis import SplineBasis, build_basis, quantile_knots

logger = logging.getLogger(__name__)


class SelectionError(RuntimeError):
    """No candidate of a grid produced a usable criterion value."""


@dataclass(frozen=True)
class SelectionGrids:
    """Candidate grids. ``None`` penalty grids are derived from the data."""

    h_grid_len: int = 100
    kn_candidates: tuple[int, ...] = tuple(range(1, 9))
    lambda1_grid: tuple[float, ...] | None = None
    lambda2_grid: tuple[float, ...] | None = None
    degree: int = 3

    def __post_init__(self):
        if self.h_grid_len < 0:
            raise ValueError("h_grid_len must be nonnegative")
        if not self.kn_candidates or min(self.kn_candidates) < 0:
            raise ValueError("need at least one nonnegative knot count")
        for g in (self.lambda1_grid, self.lambda2_grid):
            if g is not None and (len(g) == 0 or min(g) <= 0):
                raise ValueError("penalty grids must be non-empty and positive")


@dataclass(frozen=True)
class SicValue:
    """One evaluated candidate: ``criterion = fit_term + log(n)/n * edf``."""

    criterion: float
    fit_term: float
    edf: float
    n: int
    params: dict = field(default_factory=dict)

    @classmethod
    def build(cls, fit_term, edf, n, **params):
        fit_term = float(fit_term)
        crit = fit_term + np.log(n) / n * edf
        if not np.isfinite(crit):
            raise SelectionError(f"non-finite criterion for {params}")
        return cls(float(crit), fit_term, float(edf), int(n), params)

    def record(self, stage: str) -> dict:
        return {"stage": stage, **self.params, "criterion": self.criterion,
                "fit_term": self.fit_term, "edf": self.edf, "n": self.n}


def default_lambda_grid(y, n_points: int = 20) -> tuple[float, ...]:
    """Log-spaced levels over ``[1e-3, 10] * sd(y) / sqrt(n)``."""
    y = np.asarray(y, dtype=float)
    scale = np.std(y) / np.sqrt(len(y))
    return tuple(np.geomspace(1e-3, 10.0, n_points) * scale)


def bandwidth_grid(sigma: float, length: int) -> np.ndarray:
    return 0.5 * sigma * 1.02 ** np.arange(length + 1)


def bandwidth_ratio(residuals, h: float) -> float:
    """``G(h) F(h)^-2 / sigma^2``; ``nan`` where ``F(h) >= 0``."""
    r = np.asarray(residuals, dtype=float)
    sigma2 = np.mean(r * r)
    F = np.mean(kernel_d2(h, r))
    G = np.mean(kernel_d1(h, r) ** 2)
    if not F < 0.0:
        return float("nan")
    return float(G / F**2 / sigma2)


def select_bandwidth(residuals, grids: SelectionGrids = SelectionGrids()):
    """Grid-minimize the bandwidth ratio; returns ``(h, trace)``."""
    r = np.asarray(residuals, dtype=float)
    sigma = np.sqrt(np.mean(r * r))
    if not sigma > 0:
        raise SelectionError("residuals are identically zero; bandwidth undefined")
    hs = bandwidth_grid(sigma, grids.h_grid_len)
    ratios = np.array([bandwidth_ratio(r, h) for h in hs])
    ok = np.isfinite(ratios)
    if not ok.any():
        raise SelectionError("no bandwidth candidate has a negative curvature estimate")
    best = int(np.nanargmin(np.where(ok, ratios, np.inf)))
    trace = [{"stage": "bandwidth", "h": float(h), "criterion": float(v)} for h, v in zip(hs, ratios)]
    return float(hs[best]), trace


def edf(labels, q: int) -> int:
    """``q`` per varying block (intercept included) plus one per nonzero constant."""
    return sum(q if lab == VARYING else (1 if lab == CONSTANT else 0) for lab in labels)


def fit_term(design, y, gamma, h, loss="modal") -> float:
    if loss == "modal":
        return -log_q(design, y, gamma, h)
    return float(np.log(rss(design, y, gamma) / len(y)))


def sic(design, y, gamma, q, h, loss="modal", **params) -> SicValue:
    labels = classify(gamma, q)
    return SicValue.build(fit_term(design, y, gamma, h, loss), edf(labels, q), len(y), **params)


def _argmin(values, rtol=1e-12) -> int:
    # ties (up to round-off) go to the earliest candidate
    crit = np.array([v.criterion for v in values])
    lo = crit.min()
    return int(np.flatnonzero(crit <= lo + rtol * max(1.0, abs(lo)))[0])


def basis_for(u, k: int, degree: int = 3) -> SplineBasis:
    return build_basis(degree, quantile_knots(u, k))


def select_knots(data, labels, h, candidates, *, degree=3, loss="modal",
                 em_tol=1e-6, em_max_iter=200):
    """Pick the knot count for a given covariate structure.

    Each candidate refits the structure ``labels`` without penalty and is
    scored by ``-log Q + (log n/n)(v_m (k + d + 1) + c_m)``.

    Returns
    -------
    k : int
    trace : list of dict
    fits : dict
        ``k -> (basis, design, gamma)`` for reuse by the caller.
    """
    if len(candidates) == 0:
        raise SelectionError("empty knot candidate list")
    candidates = sorted(int(k) for k in candidates)  # ties favour fewer knots
    values, fits = [], {}
    for k in candidates:
        basis = basis_for(data.u, k, degree)
        design = build_design(data, basis)
        res = refit_structure(data, basis, labels, h, design=design, loss=loss,
                              em_tol=em_tol, em_max_iter=em_max_iter)
        v_m = sum(lab == VARYING for lab in labels)
        c_m = sum(lab == CONSTANT for lab in labels)
        values.append(SicValue.build(fit_term(design, data.y, res.gamma, h, loss),
                                     v_m * basis.q + c_m, data.n, k=int(k)))
        fits[int(k)] = (basis, design, res.gamma)
    best = _argmin(values)
    return candidates[best], [v.record("knots") for v in values], fits


def adaptive_lambda1(lam1: float, ref_norms, floor: float) -> np.ndarray:
    """``lambda_1j = lambda_1 / ||gamma_j*||`` with norms floored at ``floor``."""
    return lam1 / np.maximum(np.asarray(ref_norms, dtype=float), floor)


def varying_norms(gamma, q) -> np.ndarray:
    return np.linalg.norm(coef_blocks(gamma, q)[1:, 1:], axis=1)


def select_lambda1(data, basis, cfg: VcemConfig, grid, gamma_start, ref_norms, *,
                   design=None, loss="modal", norm="l2"):
    """Run step 1 on every grid level; keep the SIC minimizer.

    Returns ``(lambda_1j vector, StepResult, trace)``.
    """
    if design is None:
        design = build_design(data, basis)
    values, results = [], []
    for lam in grid:
        lam_j = adaptive_lambda1(lam, ref_norms, cfg.zero_threshold)
        c = replace(cfg, lambda1=tuple(lam_j))
        try:
            res = run_step1(data, basis, c, gamma_start, design=design, loss=loss, norm=norm)
        except (FloatingPointError, np.linalg.LinAlgError) as err:
            logger.warning("step 1 failed at lambda1=%g: %s", lam, err)
            continue
        values.append(sic(design, data.y, res.gamma, basis.q, cfg.bandwidth, loss, lambda1=float(lam)))
        results.append((lam_j, res))
    if not values:
        raise SelectionError("step 1 failed for every lambda1 candidate")
    best = _argmin(values)
    lam_j, res = results[best]
    return lam_j, res, [v.record("lambda1") for v in values]


def select_lambda2(data, basis, cfg: VcemConfig, grid, gamma_vc, *, design=None, loss="modal"):
    """Run step 2 on every grid level; keep the SIC minimizer.

    Returns ``(lambda2, StepResult, trace)``.
    """
    if design is None:
        design = build_design(data, basis)
    values, results = [], []
    for lam in grid:
        c = replace(cfg, lambda2=float(lam))
        try:
            res = run_step2(data, basis, c, gamma_vc, design=design, loss=loss)
        except (FloatingPointError, np.linalg.LinAlgError) as err:
            logger.warning("step 2 failed at lambda2=%g: %s", lam, err)
            continue
        values.append(sic(design, data.y, res.gamma, basis.q, cfg.bandwidth, loss, lambda2=float(lam)))
        results.append((float(lam), res))
    if not values:
        raise SelectionError("step 2 failed for every lambda2 candidate")
    best = _argmin(values)
    lam, res = results[best]
    return lam, res, [v.record("lambda2") for v in values]


def tune_and_fit(data, grids: SelectionGrids = SelectionGrids(), *, loss="modal", norm="l2",
                 scad_a=3.7, zero_threshold=1e-5, em_tol=1e-6, em_max_iter=200,
                 outer_max_iter=10) -> FittedModel:
    """Full pipeline: re-select h, k_n, lambda_1 and lambda_2 at every outer iteration.

    Iteration ``t`` selects the bandwidth from the residuals of the current
    estimate, then the knot count for the current structure, then runs
    step 1 over the ``lambda_1`` grid (adaptive levels from the previous
    step-1 estimate) and step 2 over the ``lambda_2`` grid. Stops when the
    knot count and the labels stop changing; the bandwidth is re-anchored at
    the residual scale every round, so exact coefficient stability is not
    required.
    """
    y = data.y
    grid1 = grids.lambda1_grid or default_lambda_grid(y)
    grid2 = grids.lambda2_grid or default_lambda_grid(y)
    cands = tuple(grids.kn_candidates)
    k_cur = cands[len(cands) // 2]
    basis = basis_for(data.u, k_cur, grids.degree)
    design = build_design(data, basis)
    gamma = initial_estimate(design, y)
    labels = classify(gamma, basis.q)
    ref_norms = varying_norms(gamma, basis.q)
    trace = []
    converged = False
    h = float("nan")
    lam_j = lam2 = None
    for t in range(outer_max_iter):
        h, h_trace = select_bandwidth(y - design @ gamma, grids)
        k_new, k_trace, fits = select_knots(data, labels, h, cands, degree=grids.degree,
                                            loss=loss, em_tol=em_tol, em_max_iter=em_max_iter)
        same_basis = k_new == k_cur
        if not same_basis:
            basis, design, gamma = fits[k_new]
            k_cur = k_new
        cfg = VcemConfig(grid1[0], grid2[0], h, scad_a=scad_a, zero_threshold=zero_threshold,
                         em_tol=em_tol, em_max_iter=em_max_iter)
        lam_j, vc, t1 = select_lambda1(data, basis, cfg, grid1, gamma, ref_norms,
                                       design=design, loss=loss, norm=norm)
        cfg = replace(cfg, lambda1=tuple(lam_j))
        lam2, cz, t2 = select_lambda2(data, basis, cfg, grid2, vc.gamma, design=design, loss=loss)
        ref_norms = varying_norms(vc.gamma, basis.q)
        new_labels = classify(cz.gamma, basis.q)
        change = float(np.max(np.abs(cz.gamma - gamma))) if len(cz.gamma) == len(gamma) else np.inf
        trace.append({"iteration": t, "h": h, "k": k_cur, "lambda1": [float(v) for v in lam_j],
                      "lambda2": lam2, "labels": list(new_labels), "change": change,
                      "records": h_trace + k_trace + t1 + t2})
        stable = same_basis and new_labels == labels
        gamma, labels = cz.gamma, new_labels
        if stable:
            converged = True
            break
    cfg = VcemConfig(tuple(lam_j), lam2, h, scad_a=scad_a, zero_threshold=zero_threshold,
                     em_tol=em_tol, em_max_iter=em_max_iter, outer_max_iter=outer_max_iter)
    return FittedModel(gamma=gamma, basis=basis, bandwidth=h, labels=labels, converged=converged,
                       info={"config": cfg, "loss": loss, "norm": norm, "selection": trace,
                             "k": k_cur})
