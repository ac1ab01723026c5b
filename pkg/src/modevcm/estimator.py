"""Two-step SCAD-penalized modal EM for varying coefficient models.

Step 1 shrinks the varying part of each coefficient block (group SCAD on
``||gamma_j*||``) to separate varying from constant effects. Step 2 penalizes
the constant part of the blocks found constant, removing irrelevant
covariates. Both steps are EM loops: the E-step computes kernel weights of
the residuals, the M-step is a weighted ridge-type solve whose diagonal comes
from the local quadratic approximation of SCAD.

The same engine runs the least-squares baselines: ``loss="ls"`` freezes the
weights at ``1/n`` and ``norm="l1"`` penalizes the varying coefficients one
coordinate at a time.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .design import FittedModel, StructureError, build_design, classify, coef_blocks
from .kernel import log_kernel
from .scad import ScadParams, lqa_weight, scad

logger = logging.getLogger(__name__)

_TINY_LOG = np.log(np.finfo(float).tiny)


class DegenerateWeightsError(FloatingPointError):
    """Every kernel weight underflowed; the bandwidth is far too small."""


class NumericalError(FloatingPointError):
    """The penalized normal equations could not be solved."""


class UnderdeterminedError(ValueError):
    """Fewer observations than spline coefficients."""


@dataclass(frozen=True)
class VcemConfig:
    """Tuning of one penalized fit.

    ``lambda1`` is either a common level or one value per non-intercept
    covariate (the adaptive levels ``lambda_1j``).
    """

    lambda1: float | tuple[float, ...]
    lambda2: float
    bandwidth: float
    scad_a: float = 3.7
    zero_threshold: float = 1e-5
    em_tol: float = 1e-6
    em_max_iter: int = 200
    outer_max_iter: int = 20

    def __post_init__(self):
        lam1 = np.atleast_1d(np.asarray(self.lambda1, dtype=float))
        if np.any(lam1 < 0) or self.lambda2 < 0:
            raise ValueError("penalty levels must be nonnegative")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if not self.scad_a > 2:
            raise ValueError("SCAD shape must exceed 2")
        if not (self.zero_threshold > 0 and self.em_tol > 0):
            raise ValueError("thresholds must be positive")
        if self.em_max_iter < 1 or self.outer_max_iter < 1:
            raise ValueError("iteration limits must be at least 1")
        if lam1.size > 1:
            object.__setattr__(self, "lambda1", tuple(float(v) for v in lam1))

    def lambda1_for(self, p: int) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(self.lambda1, dtype=float))
        if lam.size == 1:
            return np.full(p, lam[0])
        if lam.size != p:
            raise StructureError(f"need {p} per-covariate lambda1 values, got {lam.size}")
        return lam


@dataclass
class StepResult:
    """Outcome of one inner EM loop."""

    gamma: np.ndarray
    converged: bool
    n_iter: int
    # (objective before, objective after) for every E/M pair
    trace: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# objective pieces
# ---------------------------------------------------------------------------


def log_q(design, y, gamma, h) -> float:
    """``log Q(gamma) = log sum_i K_h(y_i - Pi_i gamma)``."""
    r = y - design @ gamma
    lk = log_kernel(h, r)
    top = lk.max()
    return float(top + np.log(np.sum(np.exp(lk - top))))


def rss(design, y, gamma) -> float:
    r = y - design @ gamma
    return float(r @ r)


def initial_estimate(design, y) -> np.ndarray:
    """Unpenalized least squares ``(Pi'Pi)^{-1} Pi'y``."""
    design = np.asarray(design, dtype=float)
    n, k = design.shape
    if n < k:
        raise UnderdeterminedError(f"{n} observations cannot determine {k} coefficients")
    A = design.T @ design
    b = design.T @ np.asarray(y, dtype=float)
    return _solve(A, b, np.ones(k, dtype=bool))


def e_step(design, y, gamma, h) -> np.ndarray:
    """Posterior weights ``K_h(r_i) / sum_k K_h(r_k)``."""
    r = np.asarray(y, dtype=float) - design @ gamma
    lk = log_kernel(h, r)
    top = lk.max()
    if not np.isfinite(top) or top < _TINY_LOG:
        raise DegenerateWeightsError(
            f"all kernel values underflow at bandwidth {h:g}; residual scale {np.abs(r).min():g}"
        )
    w = np.exp(lk - top)
    return w / w.sum()


def _solve(A, b, free) -> np.ndarray:
    """Solve ``A x = b`` on the ``free`` coordinates, others held at zero."""
    x = np.zeros(len(b))
    if not np.any(free):
        return x
    Af = A[np.ix_(free, free)]
    bf = b[free]
    try:
        L = np.linalg.cholesky(Af)
        sol = np.linalg.solve(L.T, np.linalg.solve(L, bf))
    except np.linalg.LinAlgError:
        jitter = 1e-8 * np.trace(Af) / Af.shape[0]
        warnings.warn(f"singular penalized Gram matrix; adding ridge jitter {jitter:.3g}",
                      RuntimeWarning, stacklevel=3)
        try:
            sol = np.linalg.solve(Af + jitter * np.eye(Af.shape[0]), bf)
        except np.linalg.LinAlgError as err:
            raise NumericalError(f"penalized system is singular (cond={np.linalg.cond(Af):.3g})") from err
    if not np.all(np.isfinite(sol)):
        raise NumericalError(f"non-finite solution (cond={np.linalg.cond(Af):.3g})")
    x[free] = sol
    return x


def _weighted_system(design, y, w):
    Pw = design * w[:, None]
    return Pw.T @ design, Pw.T @ y


# ---------------------------------------------------------------------------
# penalty structures
# ---------------------------------------------------------------------------


def _step1_penalty(gamma, q, lam1, a, thr, norm="l2"):
    """LQA diagonal and free mask for the varying-part penalty.

    Blocks (or coordinates, for ``l1``) already below ``thr`` are held at zero.
    """
    blocks = coef_blocks(gamma, q)
    pen = np.zeros_like(blocks)
    free = np.ones(blocks.shape, dtype=bool)
    for j in range(1, blocks.shape[0]):
        par = ScadParams(lam1[j - 1], a)
        vary = blocks[j, 1:]
        if norm == "l2":
            nrm = np.linalg.norm(vary)
            if nrm < thr:
                free[j, 1:] = False
            else:
                pen[j, 1:] = lqa_weight(par, nrm)
        elif norm == "l1":
            mag = np.abs(vary)
            small = mag < thr
            free[j, 1:] = ~small
            pen[j, 1:][~small] = lqa_weight(par, mag[~small])
        else:
            raise ValueError(f"unknown norm {norm!r}")
    return pen.ravel(), free.ravel()


def _step2_penalty(gamma, q, constant_set, lam2, a, thr):
    blocks = coef_blocks(gamma, q)
    pen = np.zeros_like(blocks)
    free = np.ones(blocks.shape, dtype=bool)
    par = ScadParams(lam2, a)
    for j in constant_set:
        if j == 0:
            continue
        free[j, 1:] = False
        c = abs(blocks[j, 0])
        if c < thr:
            free[j, 0] = False
        else:
            pen[j, 0] = lqa_weight(par, c)
    return pen.ravel(), free.ravel()


def step1_penalty_value(gamma, q, lam1, a, norm="l2") -> float:
    blocks = coef_blocks(gamma, q)
    total = 0.0
    for j in range(1, blocks.shape[0]):
        par = ScadParams(lam1[j - 1], a)
        vary = blocks[j, 1:]
        if norm == "l2":
            total += scad(par, np.linalg.norm(vary))
        else:
            total += float(np.sum(scad(par, np.abs(vary))))
    return float(total)


def step2_penalty_value(gamma, q, constant_set, lam2, a) -> float:
    blocks = coef_blocks(gamma, q)
    par = ScadParams(lam2, a)
    return float(sum(scad(par, abs(blocks[j, 0])) for j in constant_set if j != 0))


def objective(design, y, gamma, h, penalty, loss="modal") -> float:
    """Objective decreased by every E/M pair.

    For the modal loss this is ``-log Q + (n / h^2) * penalty``: the printed
    M-step drops the ``1/h^2`` of the Gaussian log-kernel, which is the same
    as scaling the penalty by it. For least squares it is
    ``RSS / (2n) + n * penalty``.
    """
    n = len(y)
    if loss == "modal":
        return -log_q(design, y, gamma, h) + n * penalty / h**2
    return rss(design, y, gamma) / (2 * n) + n * penalty


# ---------------------------------------------------------------------------
# M-steps
# ---------------------------------------------------------------------------


def _m_solve(design, y, weights, pen, free, gram=None):
    n = len(y)
    A, b = gram if gram is not None else _weighted_system(design, y, weights)
    return _solve(A + n * np.diag(pen), b, free)


def m_step_vc(design, y, weights, gamma_prev, cfg: VcemConfig, q: int, norm="l2", gram=None):
    """Step-1 M-step ``(Pi'W Pi + n Sigma_lambda1)^{-1} Pi'W y``."""
    p = len(gamma_prev) // q - 1
    pen, free = _step1_penalty(gamma_prev, q, cfg.lambda1_for(p), cfg.scad_a,
                               cfg.zero_threshold, norm)
    return _m_solve(design, y, weights, pen, free, gram)


def m_step_cz(design, y, weights, gamma_prev, constant_set, cfg: VcemConfig, q: int, gram=None):
    """Step-2 M-step: SCAD on the constant part of ``constant_set`` blocks only."""
    pen, free = _step2_penalty(gamma_prev, q, constant_set, cfg.lambda2, cfg.scad_a,
                               cfg.zero_threshold)
    return _m_solve(design, y, weights, pen, free, gram)


# ---------------------------------------------------------------------------
# inner EM loops
# ---------------------------------------------------------------------------


def _zero_small_varying(gamma, q, thr, norm):
    blocks = coef_blocks(gamma, q).copy()
    for j in range(1, blocks.shape[0]):
        if norm == "l2":
            if np.linalg.norm(blocks[j, 1:]) < thr:
                blocks[j, 1:] = 0.0
        else:
            blocks[j, 1:][np.abs(blocks[j, 1:]) < thr] = 0.0
    return blocks.ravel()


def _zero_small_constant(gamma, q, constant_set, thr):
    blocks = coef_blocks(gamma, q).copy()
    for j in constant_set:
        if j != 0:
            blocks[j, 1:] = 0.0
            if abs(blocks[j, 0]) < thr:
                blocks[j, 0] = 0.0
    return blocks.ravel()


def _em_loop(design, y, gamma, cfg, m_step, penalty_value, cleanup, loss, track=False):
    n = len(y)
    h = cfg.bandwidth
    gram = None
    uniform = np.full(n, 1.0 / n)
    if loss == "ls":
        gram = _weighted_system(design, y, uniform)
    elif loss != "modal":
        raise ValueError(f"unknown loss {loss!r}")
    gamma = cleanup(np.asarray(gamma, dtype=float))
    trace = []
    best = gamma
    converged = False
    it = 0
    for it in range(1, cfg.em_max_iter + 1):
        w = uniform if loss == "ls" else e_step(design, y, gamma, h)
        new = m_step(w, gamma, gram)
        if track:
            trace.append((objective(design, y, gamma, h, penalty_value(gamma), loss),
                          objective(design, y, new, h, penalty_value(new), loss)))
        new = cleanup(new)
        step = np.max(np.abs(new - gamma))
        gamma = new
        best = gamma
        if step < cfg.em_tol:
            converged = True
            break
    if not converged:
        logger.info("EM loop stopped at max_iter=%d without converging", cfg.em_max_iter)
    return StepResult(best, converged, it, trace)


def run_step1(data, basis, cfg: VcemConfig, gamma_start=None, *, design=None,
              loss="modal", norm="l2", track=False) -> StepResult:
    """Separate varying from constant effects.

    Alternates E- and M-steps from ``gamma_start`` (least squares if omitted)
    and zeroes every varying part whose norm falls below ``zero_threshold``.
    """
    if design is None:
        design = build_design(data, basis)
    y = data.y
    q = basis.q
    lam1 = cfg.lambda1_for(data.p)
    if gamma_start is None:
        gamma_start = initial_estimate(design, y)
    thr = cfg.zero_threshold
    return _em_loop(
        design, y, gamma_start, cfg,
        lambda w, g, gram: m_step_vc(design, y, w, g, cfg, q, norm, gram),
        lambda g: step1_penalty_value(g, q, lam1, cfg.scad_a, norm),
        lambda g: _zero_small_varying(g, q, thr, norm),
        loss,
        track,
    )


def constant_set_of(gamma, q) -> tuple[int, ...]:
    """Non-intercept covariates whose varying part is exactly zero."""
    blocks = coef_blocks(gamma, q)
    return tuple(j for j in range(1, blocks.shape[0]) if not np.any(blocks[j, 1:]))


def run_step2(data, basis, cfg: VcemConfig, gamma_vc, *, design=None, loss="modal",
              track=False) -> StepResult:
    """Remove irrelevant constant effects found by step 1."""
    if design is None:
        design = build_design(data, basis)
    y = data.y
    q = basis.q
    cset = constant_set_of(gamma_vc, q)
    start = coef_blocks(gamma_vc, q).copy()
    for j in cset:
        start[j, 1:] = 0.0
    thr = cfg.zero_threshold
    return _em_loop(
        design, y, start.ravel(), cfg,
        lambda w, g, gram: m_step_cz(design, y, w, g, cset, cfg, q, gram),
        lambda g: step2_penalty_value(g, q, cset, cfg.lambda2, cfg.scad_a),
        lambda g: _zero_small_constant(g, q, cset, thr),
        loss,
        track,
    )


def fit(data, basis, cfg: VcemConfig, *, gamma_start=None, loss="modal", norm="l2") -> FittedModel:
    """Iterate steps 1 and 2 until the structure and coefficients settle."""
    design = build_design(data, basis)
    q = basis.q
    gamma_cz = initial_estimate(design, data.y) if gamma_start is None else np.asarray(gamma_start, float)
    labels = None
    converged = False
    inner_ok = True
    history = []
    for t in range(cfg.outer_max_iter):
        vc = run_step1(data, basis, cfg, gamma_cz, design=design, loss=loss, norm=norm)
        cz = run_step2(data, basis, cfg, vc.gamma, design=design, loss=loss)
        inner_ok = vc.converged and cz.converged
        new_labels = classify(cz.gamma, q)
        change = np.max(np.abs(cz.gamma - gamma_cz))
        history.append({"iteration": t, "labels": new_labels, "change": float(change),
                        "step1_iter": vc.n_iter, "step2_iter": cz.n_iter})
        stable = new_labels == labels and change < cfg.em_tol
        gamma_cz, labels = cz.gamma, new_labels
        if stable:
            converged = True
            break
    return FittedModel(
        gamma=gamma_cz,
        basis=basis,
        bandwidth=cfg.bandwidth,
        labels=labels,
        converged=converged and inner_ok,
        info={"config": cfg, "loss": loss, "norm": norm, "history": history},
    )


def refit_structure(data, basis, labels, h, *, design=None, loss="modal",
                    em_tol=1e-6, em_max_iter=200) -> StepResult:
    """Unpenalized fit of a fixed varying/constant/zero structure."""
    if design is None:
        design = build_design(data, basis)
    q = basis.q
    free = np.ones((len(labels), q), dtype=bool)
    for j, lab in enumerate(labels):
        if j == 0:
            continue
        if lab != "varying":
            free[j, 1:] = False
        if lab == "zero":
            free[j, 0] = False
    free = free.ravel()
    pen = np.zeros(free.size)
    cfg = VcemConfig(0.0, 0.0, h, em_tol=em_tol, em_max_iter=em_max_iter)
    A = design.T @ design
    start = _solve(A, design.T @ data.y, free)
    return _em_loop(
        design, data.y, start, cfg,
        lambda w, g, gram: _m_solve(design, data.y, w, pen, free, gram),
        lambda g: 0.0,
        lambda g: g,
        loss,
    )


def with_bandwidth(cfg: VcemConfig, h: float) -> VcemConfig:
    return replace(cfg, bandwidth=h)
