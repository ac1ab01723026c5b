import warnings

import numpy as np
import pytest

from modevcm import Dataset, VcemConfig, build_basis, build_design, fit, initial_estimate, run_step1, run_step2
from modevcm.estimator import (
    DegenerateWeightsError,
    UnderdeterminedError,
    e_step,
    m_step_cz,
    m_step_vc,
)
from modevcm.kernel import kernel
from modevcm.scad import ScadParams, scad_derivative
from modevcm.simulation import draw_errors

from conftest import make_dataset


# --- independent oracle -------------------------------------------------------


def penalty_diag(gamma, q, lams, a, thr, norm=None, constant_set=None, lam2=None):
    """Diagonal of the LQA matrix and the free mask, built from scratch."""
    g = gamma.reshape(-1, q)
    diag = np.zeros_like(g)
    free = np.ones(g.shape, bool)
    for j in range(1, g.shape[0]):
        if constant_set is not None:
            if j in constant_set:
                free[j, 1:] = False
                c = abs(g[j, 0])
                if c < thr:
                    free[j, 0] = False
                else:
                    diag[j, 0] = scad_derivative(ScadParams(lam2, a), c) / c
            continue
        if norm == "l2":
            r = np.sqrt(np.sum(g[j, 1:] ** 2))
            if r < thr:
                free[j, 1:] = False
            else:
                diag[j, 1:] = scad_derivative(ScadParams(lams[j - 1], a), r) / r
        else:
            for k in range(1, q):
                c = abs(g[j, k])
                if c < thr:
                    free[j, k] = False
                else:
                    diag[j, k] = scad_derivative(ScadParams(lams[j - 1], a), c) / c
    return diag.ravel(), free.ravel()


def quadratic_oracle(design, y, w, diag, free):
    """argmin 0.5 sum w_i r_i^2 + 0.5 n sum diag_k g_k^2 as an augmented least squares."""
    n = len(y)
    D = design[:, free]
    A = np.vstack([np.sqrt(w)[:, None] * D, np.diag(np.sqrt(n * diag[free]))])
    b = np.concatenate([np.sqrt(w) * y, np.zeros(free.sum())])
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    out = np.zeros(design.shape[1])
    out[free] = sol
    return out


def random_instance(rng):
    n = int(rng.integers(12, 31))
    p = int(rng.integers(1, 3))
    q_max = 12 // (p + 1)
    k = int(rng.integers(0, q_max - 4 + 1))  # d=3: q = k + 4
    knots = np.sort(rng.uniform(0.15, 0.85, k))
    basis = build_basis(3, knots)
    u = rng.random(n)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p))])
    data = Dataset(rng.standard_normal(n) + X[:, 1], X, u)
    design = build_design(data, basis)
    w = rng.random(n) + 0.1
    w /= w.sum()
    gamma_prev = rng.standard_normal(design.shape[1])
    if rng.random() < 0.3:  # one varying block already at zero
        gamma_prev.reshape(-1, basis.q)[p, 1:] = 0.0
    return data, basis, design, w, gamma_prev


def relerr(a, b):
    return np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))


@pytest.mark.filterwarnings("ignore:singular penalized")
def test_m_steps_match_dense_oracle():
    rng = np.random.default_rng(2024)
    worst, checked = 0.0, 0
    for case in range(600):
        data, basis, design, w, g0 = random_instance(rng)
        q, p = basis.q, data.p
        lams = rng.uniform(0.01, 1.0, p)
        cfg = VcemConfig(tuple(lams) if p > 1 else float(lams[0]), float(rng.uniform(0.01, 1)), 1.0)
        kind = case % 3
        if kind < 2:
            norm = ("l2", "l1")[kind]
            got = m_step_vc(design, data.y, w, g0, cfg, q, norm)
            diag, free = penalty_diag(g0, q, lams, 3.7, cfg.zero_threshold, norm=norm)
        else:
            cset = tuple(j for j in range(1, p + 1) if rng.random() < 0.6)
            got = m_step_cz(design, data.y, w, g0, cset, cfg, q)
            diag, free = penalty_diag(g0, q, lams, 3.7, cfg.zero_threshold,
                                      constant_set=cset, lam2=cfg.lambda2)
        A = (design[:, free] * w[:, None]).T @ design[:, free] + data.n * np.diag(diag[free])
        if np.linalg.cond(A) > 1e8:  # minimizer not unique; redraw
            continue
        checked += 1
        want = quadratic_oracle(design, data.y, w, diag, free)
        worst = max(worst, relerr(got, want))
    assert checked >= 200
    assert worst < 1e-6


def test_initial_estimate_cases(rng):
    data = make_dataset(rng, n=60)
    basis = build_basis(3, [0.5])
    design = build_design(data, basis)
    g = rng.standard_normal(design.shape[1])
    np.testing.assert_allclose(initial_estimate(design, design @ g), g, atol=1e-8)
    np.testing.assert_array_equal(initial_estimate(design, np.zeros(60)), 0.0)
    want, *_ = np.linalg.lstsq(design, data.y, rcond=None)
    np.testing.assert_allclose(initial_estimate(design, data.y), want, atol=1e-8)
    with pytest.raises(UnderdeterminedError):
        initial_estimate(design[:5], data.y[:5])


def test_e_step_examples():
    design = np.ones((2, 1))
    h = 0.7
    w = e_step(design, np.array([0.0, h]), np.zeros(1), h)
    np.testing.assert_allclose(w, [0.6224593312, 0.3775406688], atol=1e-9)
    w = e_step(np.ones((5, 1)), np.full(5, 3.0), np.zeros(1), 1.0)
    np.testing.assert_allclose(w, 0.2, atol=1e-15)


def test_e_step_shift_invariance(rng):
    design = np.column_stack([np.ones(10), rng.standard_normal(10)])
    y = rng.standard_normal(10)
    g = np.array([0.3, -0.2])
    w1 = e_step(design, y, g, 0.5)
    w2 = e_step(design, y + 4.0, g + np.array([4.0, 0.0]), 0.5)
    np.testing.assert_allclose(w1, w2, atol=1e-12)
    assert abs(w1.sum() - 1) < 1e-12


def test_e_step_degenerate():
    with pytest.raises(DegenerateWeightsError):
        e_step(np.ones((2, 1)), np.array([1e3, 2e3]), np.zeros(1), 1e-3)


def test_m_step_penalty_free_limits(rng):
    data = make_dataset(rng, n=50)
    basis = build_basis(3, [0.5])
    design = build_design(data, basis)
    w = rng.random(50)
    w /= w.sum()
    cfg = VcemConfig(0.0, 0.0, 1.0)
    g0 = initial_estimate(design, data.y)
    W = np.diag(w)
    wls = np.linalg.solve(design.T @ W @ design, design.T @ W @ data.y)
    np.testing.assert_allclose(m_step_vc(design, data.y, w, g0, cfg, basis.q), wls, atol=1e-8)
    uni = np.full(50, 1 / 50)
    np.testing.assert_allclose(m_step_vc(design, data.y, uni, g0, cfg, basis.q), g0, atol=1e-8)
    np.testing.assert_allclose(m_step_cz(design, data.y, w, g0, (), cfg, basis.q), wls, atol=1e-8)


def test_huge_lambda2_zeroes_constants(rng):
    data = make_dataset(rng, n=80)
    basis = build_basis(3, [0.5])
    cfg = VcemConfig(0.01, 1e6, 1.0)
    vc = run_step1(data, basis, VcemConfig(50.0, 0.0, 1.0))
    res = run_step2(data, basis, cfg, vc.gamma)
    blocks = res.gamma.reshape(-1, basis.q)
    assert np.all(blocks[1:, :] == 0)


def constant_model(seed, n=300, noise=0.5):
    r = np.random.default_rng(seed)
    u = r.random(n)
    X = np.column_stack([np.ones(n), r.standard_normal((n, 3))])
    y = 1.0 + 2.0 * X[:, 1] + 0.0 * X[:, 2] - 1.5 * X[:, 3] + noise * r.standard_normal(n)
    return Dataset(y, X, u)


@pytest.mark.parametrize("seed", range(20))
def test_generous_lambda1_removes_varying_parts(seed):
    data = constant_model(seed)
    basis = build_basis(3, [0.5])
    res = run_step1(data, basis, VcemConfig(0.5, 0.0, 0.8))
    assert np.all(res.gamma.reshape(-1, basis.q)[1:, 1:] == 0)


@pytest.mark.parametrize("seed", range(20))
def test_step2_drops_null_keeps_large(seed):
    data = constant_model(seed)
    basis = build_basis(3, [0.5])
    cfg = VcemConfig(0.5, 0.15, 0.8)
    vc = run_step1(data, basis, cfg)
    cz = run_step2(data, basis, cfg, vc.gamma).gamma.reshape(-1, basis.q)
    assert cz[2, 0] == 0.0
    assert abs(cz[1, 0] - 2.0) < 0.2 and abs(cz[3, 0] + 1.5) < 0.2


def test_lambda_zero_keeps_blocks(rng):
    data = make_dataset(rng, n=80)
    basis = build_basis(3, [0.5])
    res = run_step1(data, basis, VcemConfig(0.0, 0.0, 1.0))
    assert np.all(np.linalg.norm(res.gamma.reshape(-1, basis.q)[1:, 1:], axis=1) > 0)


def test_step1_fixed_point(rng):
    data = make_dataset(rng, n=120)
    basis = build_basis(3, [0.5])
    cfg = VcemConfig(0.05, 0.0, 1.0)
    first = run_step1(data, basis, cfg)
    again = run_step1(data, basis, cfg, first.gamma)
    assert np.max(np.abs(again.gamma - first.gamma)) < cfg.em_tol * 10


def test_step2_without_constants_is_unpenalized_refit(rng):
    data = make_dataset(rng, n=80)
    basis = build_basis(3, [0.5])
    cfg = VcemConfig(0.0, 0.5, 1.0)
    vc = run_step1(data, basis, cfg)
    cz = run_step2(data, basis, cfg, vc.gamma)
    ref = run_step1(data, basis, cfg, vc.gamma)
    np.testing.assert_allclose(cz.gamma, ref.gamma, atol=1e-5)


def test_noiseless_constant_recovery():
    r = np.random.default_rng(3)
    n = 200
    u = r.random(n)
    X = np.column_stack([np.ones(n), r.standard_normal((n, 2))])
    y = 0.7 + 2.0 * X[:, 1] - 1.0 * X[:, 2]
    m = fit(Dataset(y, X, u), build_basis(3, [0.5]), VcemConfig(0.05, 0.01, 0.5))
    # the unpenalized intercept keeps round-off in its varying part
    assert m.labels[1:] == ("constant", "constant")
    np.testing.assert_allclose([m.blocks[1, 0], m.blocks[2, 0]], [2.0, -1.0], atol=1e-4)
    from modevcm import coefficient_curve

    np.testing.assert_allclose(coefficient_curve(m, 0, np.linspace(0, 1, 11)), 0.7, atol=1e-4)


def test_fit_labels_consistent(rng):
    data = make_dataset(rng, n=150, p=2)
    m = fit(data, build_basis(3, [0.5]), VcemConfig(0.05, 0.05, 0.8))
    for j, lab in enumerate(m.labels):
        b = m.blocks[j]
        if lab == "varying":
            assert np.linalg.norm(b[1:]) > 0
        elif lab == "constant":
            assert np.all(b[1:] == 0) and (b[0] != 0 or j == 0)
        else:
            assert np.all(b == 0)


@pytest.mark.parametrize("seed", range(20))
def test_em_objective_is_monotone(seed):
    r = np.random.default_rng(seed)
    data = make_dataset(r, n=150, p=3, noise=0.5)
    basis = build_basis(3, [0.33, 0.66])
    cfg = VcemConfig(float(r.uniform(0.005, 0.05)), float(r.uniform(0.005, 0.05)),
                     float(r.uniform(0.3, 1.0)))
    vc = run_step1(data, basis, cfg, track=True)
    cz = run_step2(data, basis, cfg, vc.gamma, track=True)
    for res in (vc, cz):
        assert res.trace
        for before, after in res.trace:
            assert after <= before + 1e-9 * abs(before)
        starts = [b for b, _ in res.trace]
        for a, b in zip(starts, starts[1:]):
            assert b <= a + 1e-9 * abs(a)


@pytest.mark.parametrize("seed", range(5))
def test_weights_sum_to_one_along_fit(seed):
    r = np.random.default_rng(seed)
    data = make_dataset(r, n=100)
    basis = build_basis(3, [0.5])
    design = build_design(data, basis)
    res = run_step1(data, basis, VcemConfig(0.02, 0.0, 0.6))
    w = e_step(design, data.y, res.gamma, 0.6)
    assert abs(w.sum() - 1) < 1e-12


def test_mode_targeting():
    """Skewed errors with mean 0 and mode near 1: the modal intercept sits above least squares."""
    diffs = []
    for seed in range(10):
        r = np.random.default_rng(seed)
        n = 500
        u = r.random(n)
        X = np.column_stack([np.ones(n), r.standard_normal(n)])
        y = np.sin(2 * np.pi * u) + (1 + u) * X[:, 1] + draw_errors(r, 4, n)
        data = Dataset(y, X, u)
        basis = build_basis(3, [0.5])
        modal = fit(data, basis, VcemConfig(0.01, 0.01, 0.5))
        ls = fit(data, basis, VcemConfig(0.01, 0.01, 0.5), loss="ls")
        grid = np.linspace(0.05, 0.95, 19)
        from modevcm import coefficient_curve

        diffs.append(np.mean(coefficient_curve(modal, 0, grid) - coefficient_curve(ls, 0, grid)))
    assert np.mean(diffs) > 0.3
    assert sum(d > 0 for d in diffs) >= 9


def test_singular_gram_warns():
    n = 30
    u = np.linspace(0, 1, n)
    X = np.column_stack([np.ones(n), np.ones(n)])  # duplicate columns
    data = Dataset(np.arange(n, dtype=float), X, u)
    design = build_design(data, build_basis(1))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        initial_estimate(design, data.y)
    assert any("ridge jitter" in str(w.message) for w in rec)


def test_config_validation():
    with pytest.raises(ValueError):
        VcemConfig(-1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        VcemConfig(0.1, 0.1, 0.0)
    with pytest.raises(ValueError):
        VcemConfig(0.1, 0.1, 1.0, scad_a=2.0)
