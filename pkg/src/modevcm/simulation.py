"""Monte Carlo harness for the two benchmark varying coefficient models.

Model 1 has two varying, two constant (0.2 and 2) and ``p - 4`` null
covariates with heteroscedastic noise ``X_3 * eps``; Model 2 has three
varying and three constant effects on AR(0.5)-correlated covariates with
noise ``0.8 X_5 * eps``.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .design import CONSTANT, VARYING, ZERO, Dataset, FittedModel

logger = logging.getLogger(__name__)


class ErrorCase(enum.IntEnum):
    NORMAL = 1
    T3 = 2
    LAPLACE = 3
    MIXTURE = 4


def _m1_alpha0(u):
    return 15.0 + 20.0 * np.sin(2 * np.pi * u)


def _m1_alpha1(u):
    return 2.0 - 3.0 * np.cos((6.0 * u - 5.0) * np.pi / 3.0)


def _m1_alpha2(u):
    return 6.0 - 6.0 * u


def _m2_alpha0(u):
    return 2.0 * np.exp(1.0 - u)


def _m2_alpha1(u):
    return 1.5 + 3.0 * np.cos(2 * np.pi * u) ** 2


def _m2_alpha2(u):
    return 0.5 + 100.0 * u * (1.0 - u) * (u - 0.5)


def _m2_alpha3(u):
    return 2.0 - 3.0 * np.sin(2 * np.pi * u)


_MODELS = {
    1: {"varying": {0: _m1_alpha0, 1: _m1_alpha1, 2: _m1_alpha2},
        "constant": {3: 0.2, 4: 2.0}, "scale": (3, 1.0)},
    2: {"varying": {0: _m2_alpha0, 1: _m2_alpha1, 2: _m2_alpha2, 3: _m2_alpha3},
        "constant": {4: 2.0, 5: 0.4, 6: -1.5}, "scale": (5, 0.8)},
}


@dataclass(frozen=True)
class Scenario:
    model: int = 1
    p: int = 10
    n: int = 500
    error_case: ErrorCase = ErrorCase.NORMAL
    replications: int = 100
    seed: int = 2024

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ValueError(f"unknown model {self.model}")
        object.__setattr__(self, "error_case", ErrorCase(self.error_case))
        active = max(_MODELS[self.model]["constant"])
        if self.p < active:
            raise ValueError(f"model {self.model} needs p >= {active}")
        if self.n < 50:
            raise ValueError("n must be at least 50")
        if self.replications < 1:
            raise ValueError("need at least one replication")


@dataclass(frozen=True)
class TruthLabels:
    labels: tuple[str, ...]
    constants: dict
    functions: dict

    def alpha(self, j: int, u):
        u = np.asarray(u, dtype=float)
        if j in self.functions:
            return self.functions[j](u)
        return np.full(u.shape, self.constants.get(j, 0.0))


def truth_for(model: int, p: int) -> TruthLabels:
    model_def = _MODELS[model]
    labels = []
    for j in range(p + 1):
        if j in model_def["varying"]:
            labels.append(VARYING)
        elif j in model_def["constant"]:
            labels.append(CONSTANT)
        else:
            labels.append(ZERO)
    return TruthLabels(tuple(labels), dict(model_def["constant"]), dict(model_def["varying"]))


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one replication, keyed by ``(seed, index)``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def draw_errors(rng: np.random.Generator, case: ErrorCase, n: int) -> np.ndarray:
    case = ErrorCase(case)
    if case is ErrorCase.NORMAL:
        return rng.standard_normal(n)
    if case is ErrorCase.T3:
        return rng.standard_t(3, n)
    if case is ErrorCase.LAPLACE:
        return rng.laplace(0.0, 1.0, n)
    coin = rng.random(n) < 0.5
    return np.where(coin, rng.normal(-1.0, 2.5, n), rng.normal(1.0, 0.5, n))


def generate(scenario: Scenario, replication_index: int, *, noise: bool = True):
    """Draw one dataset and its true structure.

    ``noise=False`` drops the error term (noiseless-trend sanity data).
    """
    rng = replication_rng(scenario.seed, replication_index)
    n, p = scenario.n, scenario.p
    u = rng.random(n)
    if scenario.model == 1:
        Z = rng.standard_normal((n, p))
    else:
        idx = np.arange(p)
        cov = 0.5 ** np.abs(idx[:, None] - idx[None, :])
        Z = rng.multivariate_normal(np.zeros(p), cov, size=n, method="cholesky")
    eps = draw_errors(rng, scenario.error_case, n)
    X = np.column_stack([np.ones(n), Z])
    truth = truth_for(scenario.model, p)
    y = np.zeros(n)
    for j in range(p + 1):
        y += truth.alpha(j, u) * X[:, j]
    col, mult = _MODELS[scenario.model]["scale"]
    if noise:
        y += mult * X[:, col] * eps
    return Dataset(y, X, u), truth


def score(fit: FittedModel | tuple, truth: TruthLabels) -> tuple[int, int, int]:
    """Counts of correctly labeled varying, constant and null covariates.

    The intercept is excluded.
    """
    labels = fit.labels if isinstance(fit, FittedModel) else tuple(fit)
    if len(labels) != len(truth.labels):
        raise ValueError(f"label length {len(labels)} != truth length {len(truth.labels)}")
    pairs = list(zip(labels[1:], truth.labels[1:]))
    return tuple(sum(f == t == lab for f, t in pairs) for lab in (VARYING, CONSTANT, ZERO))


# ---------------------------------------------------------------------------
# replication runner
# ---------------------------------------------------------------------------

METHODS = ("VCEM", "BSE_L1", "BSE_L2")


def method_fitter(name: str):
    """``(data, grids) -> FittedModel`` for a method name."""
    from .selection import tune_and_fit

    settings = {"VCEM": ("modal", "l2"), "BSE_L1": ("ls", "l1"), "BSE_L2": ("ls", "l2")}
    if name not in settings:
        raise ValueError(f"unknown method {name!r}")
    loss, norm = settings[name]
    return lambda data, grids: tune_and_fit(data, grids, loss=loss, norm=norm)


@dataclass
class SimulationReport:
    scenario: Scenario
    rows: dict  # method -> (SV, SC, SZ) averages
    counts: dict  # method -> number of successful replications
    failures: dict  # method -> list of (replication, message)
    per_replication: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    def records(self) -> list[dict]:
        """One self-describing record per method, oracle first."""
        sc = asdict(self.scenario)
        sc["error_case"] = int(self.scenario.error_case)
        out = []
        for method, (sv, scc, sz) in self.rows.items():
            out.append({"p": self.scenario.p, "case": int(self.scenario.error_case),
                        "method": method, "SV": sv, "SC": scc, "SZ": sz,
                        "replications": self.counts[method],
                        "failures": len(self.failures.get(method, [])),
                        "scenario": sc})
        return out


def _one_replication(scenario, index, methods, grids):
    data, truth = generate(scenario, index)
    out = {}
    for m in methods:
        try:
            fit = method_fitter(m)(data, grids)
            out[m] = ("ok", score(fit, truth), list(fit.labels))
        except Exception as err:  # recorded, never silently dropped
            logger.warning("replication %d, method %s failed: %s", index, m, err)
            out[m] = ("error", repr(err), None)
    return index, out


def run_monte_carlo(scenario: Scenario, methods=METHODS, grids=None, *, n_jobs: int = 1,
                    progress=None) -> SimulationReport:
    """Fit every method on every replication and average the SV/SC/SZ scores.

    Results are identical for any ``n_jobs`` since each replication draws
    from its own keyed random stream and results are reduced in order.
    """
    from .selection import SelectionGrids

    grids = grids or SelectionGrids()
    methods = tuple(methods)
    start = time.perf_counter()
    idx = range(scenario.replications)
    if n_jobs == 1:
        results = []
        for i in idx:
            results.append(_one_replication(scenario, i, methods, grids))
            if progress:
                progress(i, results[-1][1])
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(
            delayed(_one_replication)(scenario, i, methods, grids) for i in idx)
    results.sort(key=lambda r: r[0])

    truth = truth_for(scenario.model, scenario.p)
    oracle = score(truth.labels, truth)
    rows = {"Oracle": tuple(float(v) for v in oracle)}
    counts = {"Oracle": scenario.replications}
    failures, per_rep = {}, {}
    for m in methods:
        scores, fails, labs = [], [], []
        for i, res in results:
            status, val, lab = res[m]
            if status == "ok":
                scores.append(val)
                labs.append(lab)
            else:
                fails.append((i, val))
        arr = np.array(scores, dtype=float).reshape(-1, 3)
        rows[m] = tuple(float(v) for v in arr.mean(axis=0)) if len(arr) else (np.nan,) * 3
        counts[m] = len(scores)
        failures[m] = fails
        per_rep[m] = [list(s) for s in scores]
    return SimulationReport(scenario, rows, counts, failures, per_rep,
                            time.perf_counter() - start)
