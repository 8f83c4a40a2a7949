import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loopcalc.errors import CertificationError, ParameterError
from loopcalc.thresholds import (ALPHA_TOL, alpha_bec, alpha_bsc, bsc_split, certify,
                                 degree_map, find_delta, gbar_near_origin, h2,
                                 hoeffding_window, inner_h, inner_max_y, k_value,
                                 lemma1_eta_window, lemma2_rho_stability, objective_grid,
                                 profile, project_domain, threshold_bisect, x_max, f_value,
                                 g_value, _solve_u)


def ent(x):
    return 0.0 if x in (0.0, 1.0) else -x * math.log(x) - (1 - x) * math.log(1 - x)


def f_direct(x0, xc, y, rho, l, r):
    X = (1 - rho) * x0 + rho * xc
    s = sum(y)
    hy = -sum(v * math.log(v) for v in y if v > 0) - (0 if s >= 1 else (1 - s) * math.log(1 - s))
    lc = sum(v * math.log(math.comb(r, 2 * t)) for t, v in enumerate(y, 1))
    return -l * ent(X) + (1 - rho) * ent(x0) + rho * ent(xc) + l / r * (hy + lc)


def test_h2_and_x_max():
    assert h2(0.0) == 0.0 and h2(1.0) == 0.0
    assert math.isclose(h2(0.5), math.log(2))
    assert x_max(6) == 1.0 and x_max(5) == 0.8
    with pytest.raises(ParameterError):
        h2(1.5)


def test_f_at_origin_is_zero():
    assert f_value(0, 0, [0, 0, 0], 0.3, 3, 6) == 0.0


def test_f_reference_point():
    want = f_direct(0.0, 0.5, [0.1] * 3, 0.48, 3, 6)
    assert math.isclose(f_value(0.0, 0.5, [0.1] * 3, 0.48, 3, 6), want, rel_tol=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 0.99),
       st.lists(st.floats(0, 0.3), min_size=3, max_size=3))
def test_f_matches_direct_sum(x0, xc, rho, y):
    assert math.isclose(f_value(x0, xc, y, rho, 3, 6), f_direct(x0, xc, y, rho, 3, 6),
                        rel_tol=1e-10, abs_tol=1e-12)


def test_f_rejects_bad_input():
    with pytest.raises(ParameterError):
        f_value(0, 0, [0.6, 0.6, 0.0], 0.3, 3, 6)
    with pytest.raises(ParameterError):
        f_value(0, 0, [0.1, 0.1], 0.3, 3, 6)
    with pytest.raises(ParameterError):
        f_value(1.2, 0, [0, 0, 0], 0.3, 3, 6)


def test_k_value():
    assert k_value(0.1, 0.2, 0.5, 0.5) == 0.0
    assert math.isclose(k_value(0.2, 0.5, 0.1, 0.1), (0.05 - 0.18) * math.log(9))
    with pytest.raises(ParameterError):
        k_value(0.1, 0.1, 0.1, 0.0)


def test_project_domain():
    assert project_domain(0.5, 0.5, 3, 5, 0.2).feasible
    assert not project_domain(0.9, 0.9, 3, 5, 0.2).feasible
    assert project_domain(1, 1, 3, 6, 0.2).feasible


def _inner_grid(X, r, pts):
    """Dense scan of the y-simplex slice with sum 2t y_t = r X."""
    T = r // 2
    L = np.log([math.comb(r, 2 * t) for t in range(1, T + 1)])
    axes = np.meshgrid(*[np.linspace(0, 1, pts)] * (T - 1), indexing="ij")
    head = np.stack([a.ravel() for a in axes], axis=-1)
    last = (r * X - head @ (2.0 * np.arange(1, T))) / (2 * T)
    y = np.column_stack([head, last])
    s = y.sum(axis=1)
    ok = (last >= 0) & (s <= 1)
    y, s = y[ok], s[ok]
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(y > 0, y * np.log(y), 0).sum(axis=1)
        h -= np.where(s < 1, (1 - s) * np.log(1 - s), 0)
    return float((h + y @ L).max())


@pytest.mark.parametrize("r", [4, 5, 6])
def test_inner_max_against_dense_grid(r):
    for X in (0.05, 0.2, 0.45, 0.7):
        exact = float(inner_h(np.array([X]), r)[0])
        grid = _inner_grid(X, r, 200_001 if r < 6 else 1501)
        assert grid <= exact + 1e-12
        assert exact - grid <= 1e-4


@pytest.mark.parametrize("r", [4, 5, 6])
def test_inner_maximizer_is_consistent(r):
    for X in (1e-4, 0.1, 0.4, x_max(r) * 0.99):
        y, val = inner_max_y(X, 3, r)
        assert math.isclose(sum(2 * t * v for t, v in enumerate(y, 1)) / r, X, rel_tol=1e-9)
        X0 = sum(2 * t * v for t, v in enumerate(y, 1)) / r
        assert math.isclose(val, f_value(X0, X0, y, 0.5, 3, r) + 3 * ent(X0) - ent(X0),
                            rel_tol=1e-9, abs_tol=1e-12)
        u = _solve_u(np.array([X]), r)
        assert math.isclose(float(degree_map(np.exp(u), r)[0]) / r, X, rel_tol=1e-9)


def test_inner_h_endpoints_and_monotone_degree_map():
    assert inner_h(np.array([0.0]), 6)[0] == 0.0
    assert math.isclose(inner_h(np.array([1.0]), 6)[0], 0.0)
    z = np.geomspace(1e-3, 1e3, 50)
    assert (np.diff(degree_map(z, 6)) > 0).all()
    with pytest.raises(ParameterError):
        inner_h(np.array([0.9]), 5)


@pytest.mark.parametrize("rho,p", [(0.05, 0.05), (0.1, 0.07), (0.3, 0.2)])
def test_bsc_split_is_optimal_on_line(rho, p):
    for X in (0.01, 0.1, 0.3):
        x0s = np.linspace(0, min(1.0, X / (1 - rho)), 20001)
        xcs = (X - (1 - rho) * x0s) / rho
        keep = xcs <= 1
        vals = objective_grid("bsc", x0s[keep], xcs[keep], rho, p, 0.0, 3, 6)
        prof = float(profile("bsc", np.array([X]), rho, p, 3, 6)[0])
        assert vals.max() <= prof + 1e-12
        assert prof - vals.max() <= 1e-6
        x0, xc = bsc_split(np.array([X]), rho, p)
        assert math.isclose((1 - rho) * x0[0] + rho * xc[0], X, rel_tol=1e-12)


def test_profile_vs_2d_grid():
    rho, p = 0.08, 0.08
    g = np.linspace(0, 1, 401)
    x0, xc = np.meshgrid(g, g)
    grid_max = objective_grid("bsc", x0, xc, rho, p, 0.0, 3, 6).max()
    xs = np.linspace(1e-6, 1, 20001)
    assert grid_max <= profile("bsc", xs, rho, p, 3, 6).max() + 1e-6


def test_bec_profile_matches_grid():
    rho = 0.45
    xc = np.linspace(0, 1, 1001)
    vals = objective_grid("bec", np.zeros_like(xc), xc, rho, None, 0.0, 3, 6)
    assert np.allclose(vals, profile("bec", rho * xc, rho, None, 3, 6))
    with pytest.raises(ParameterError):
        objective_grid("bec", np.ones(2), np.ones(2), rho, None, 0.0, 3, 6)


def test_g_value_at_explicit_type():
    y, _ = inner_max_y(0.2, 3, 6)
    x0, xc = bsc_split(np.array([0.2]), 0.1, 0.1)
    g = g_value(x0[0], xc[0], y, 0.1, 0.1, 0.05, 3, 6)
    assert math.isclose(g, profile("bsc", np.array([0.2]), 0.1, 0.1, 3, 6)[0] - 0.02,
                        rel_tol=1e-9)


@pytest.mark.parametrize("family,noise,unique", [("bec", 0.40, True), ("bec", 0.60, False),
                                                 ("bsc", 0.05, True), ("bsc", 0.09, False)])
def test_certificate_examples(family, noise, unique):
    c = certify(family, noise, 3, 6)
    assert c.unique_at_origin == unique
    if unique:
        assert c.value == 0.0 and c.arg[0] == 0.0 and c.arg[1] == 0.0
    else:
        assert c.value > 0 and c.arg[1] > 0


def test_positive_eta_keeps_origin():
    base = alpha_bec(0.45, 0.0, 3, 6)
    shifted = alpha_bec(0.45, 0.2, 3, 6)
    assert shifted.origin_gap <= base.origin_gap


def test_certificate_argument_checks():
    with pytest.raises(ParameterError):
        alpha_bec(0.0, 0.0, 3, 6)
    with pytest.raises(ParameterError):
        alpha_bsc(0.1, 0.6, 0.0, 3, 6)
    with pytest.raises(ParameterError):
        threshold_bisect("bsc", 3, 6, tol_noise=1e-7)


def test_threshold_bracket_is_consistent():
    res = threshold_bisect("bec", 3, 6, tol_noise=1e-3)
    lo, hi = res.bracket
    assert hi - lo <= 1e-3
    assert res.certificates[0].unique_at_origin and not res.certificates[1].unique_at_origin


def test_gbar_slope_and_ratio_monotone():
    # the -X ln(1/X) / 2 term beats the linear slope only very close to 0
    h = 1e-30
    assert gbar_near_origin(h, 3, 6, 0.1, 0.0) / h < 0
    xs = np.geomspace(1e-8, 1 / 18, 40)
    ratios = [gbar_near_origin(x, 3, 6, 0.1, 0.0) / x for x in xs]
    assert (np.diff(ratios) > 0).all()
    with pytest.raises(ParameterError):
        gbar_near_origin(0.1, 3, 6, 0.1, 0.0)


@pytest.mark.parametrize("family,noise", [("bsc", 0.05), ("bec", 0.4)])
def test_find_delta_brackets_sign_change(family, noise):
    p = noise if family == "bsc" else None
    d = find_delta(3, 6, p, 0.0, family)
    assert 0 < d <= 1 / 18
    assert gbar_near_origin(d, 3, 6, p, 0.0, family) < 0
    if d < 1 / 18 * (1 - 1e-6):
        assert gbar_near_origin(min(d * 1.1, 1 / 18), 3, 6, p, 0.0, family) >= 0


def test_find_delta_monotone_in_eta():
    ds = [find_delta(3, 6, 0.05, e) for e in (-1.0, -0.1, -0.01, 0.0)]
    assert all(a <= b for a, b in zip(ds, ds[1:]))


def test_hoeffding_values():
    w, fail = hoeffding_window(100)
    assert math.isclose(w, math.sqrt(math.log(100) / 100))
    assert fail == 2e-4
    with pytest.raises(ParameterError):
        hoeffding_window(1)


def test_lemma1_window():
    win = lemma1_eta_window("bec", 3, 6, 0.4)
    assert win.eta_tilde < 0 and win.delta > 0 and win.lam < 0
    assert win.exact_edge <= win.eta_tilde
    assert win.alpha_at_half == 0.0
    assert certify("bec", 0.4, 3, 6, eta=win.eta_tilde * 0.99).unique_at_origin


def test_lemma1_requires_unique():
    with pytest.raises(CertificationError):
        lemma1_eta_window("bec", 3, 6, 0.6)


def test_lemma2_bec_rows():
    rep = lemma2_rho_stability("bec", 3, 6, 0.4, [10, 10_000])
    assert rep.rows[0].skipped and not rep.rows[1].skipped
    # rho = 0.88 is past the threshold, the n = 10^4 shifts are not
    assert rep.rows[1].alpha > 0 and not rep.passed
    assert all(row.alpha <= ALPHA_TOL for row in rep.rows[2:])
    assert rep.shift_bound_ok


def _slsqp_alpha(rho, p, l, r, starts=60):
    """Multi-start SLSQP over explicit types (x0, xc, y), independent of the profile."""
    from scipy.optimize import minimize
    T = r // 2

    def neg(v):
        try:
            return -g_value(v[0], v[1], v[2:], rho, p, 0.0, l, r)
        except ParameterError:
            return 10.0

    cons = [{"type": "eq", "fun": lambda v: (2 * np.arange(1, T + 1)) @ v[2:] / r
             - ((1 - rho) * v[0] + rho * v[1])},
            {"type": "ineq", "fun": lambda v: 1 - v[2:].sum()}]
    rng = np.random.default_rng(0)
    best = 0.0
    for _ in range(starts):
        v0 = rng.random(2 + T) * np.array([0.05, 1] + [0.3 / t for t in range(1, T + 1)])
        res = minimize(neg, v0, method="SLSQP", bounds=[(0, 1)] * (2 + T), constraints=cons,
                       options={"ftol": 1e-14, "maxiter": 500})
        if res.success:
            best = max(best, -res.fun)
    return best


def test_lemma2_bsc_upper_shift_matches_direct_maximization():
    # p = 0.05 held fixed while rho moves up by sqrt(ln n / n) at n = 10^4
    rep = lemma2_rho_stability("bsc", 3, 6, 0.05, [10_000])
    low, high = rep.rows
    assert low.alpha == 0.0
    assert high.alpha > 0.01
    assert math.isclose(high.alpha, _slsqp_alpha(high.rho, 0.05, 3, 6), rel_tol=1e-7)
    assert rep.shift_bound_ok
