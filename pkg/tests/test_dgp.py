import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from factorclt import _seeding
from factorclt.dgp import (
    Regime,
    SimConfig,
    error_covariance,
    independence_diagnostics,
    make_unit_params,
    simulate_panel,
    theoretical_targets,
    tune_c_omega,
)
from factorclt.errors import ArgumentError


def test_tune_c_omega_zero_tau():
    assert tune_c_omega([0.0, 0.0, 0.0]) == 1.0


def test_tune_c_omega_hand_value():
    # sum (1 + |tau|)^2 = 4 + 4 = 8, sqrt(2 / 8)
    assert tune_c_omega([1.0, -1.0]) == pytest.approx(0.5, abs=1e-15)


def test_tune_c_omega_empty():
    with pytest.raises(ArgumentError):
        tune_c_omega([])


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=300))
def test_tuned_variance_is_one(tau):
    c = tune_c_omega(tau)
    omega = c * (1.0 + np.abs(np.asarray(tau)))
    assert np.mean(omega**2) == pytest.approx(1.0, rel=1e-12)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=50), st.floats(0, 3))
def test_unit_param_identities(tau, c_pi):
    p = make_unit_params(tau, c_pi)
    n = len(tau)
    np.testing.assert_allclose(p.omega, p.c_omega * (1 + np.abs(p.tau)), rtol=1e-15)
    np.testing.assert_allclose(p.pi * math.sqrt(n) - p.tau, c_pi, atol=1e-12)
    assert np.all(p.gamma == 1.0)


@pytest.mark.parametrize("kwargs", [
    dict(n_units=0, n_periods=3),
    dict(n_units=2, n_periods=1),
    dict(n_units=2, n_periods=3, c_fv=1.5),
    dict(n_units=2, n_periods=3, c_pi=-1.0),
    dict(n_units=2, n_periods=3, n_factors=2),
])
def test_sim_config_rejects(kwargs):
    with pytest.raises(ArgumentError):
        SimConfig(**kwargs)


def test_panel_shapes():
    panel = simulate_panel(SimConfig(n_units=2, n_periods=3, master_seed=7), 0)
    assert panel.e.shape == (2, 3)
    assert panel.v.shape == (3,)


def test_panel_deterministic():
    cfg = SimConfig(n_units=4, n_periods=6, c_pi=1.0, c_fv=0.3, master_seed=7)
    a, b = simulate_panel(cfg, 5), simulate_panel(cfg, 5)
    for name in ("e", "v", "f", "eta", "eps_v"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert not np.array_equal(a.e, simulate_panel(cfg, 6).e)


def test_panel_order_independent():
    cfg = SimConfig(n_units=3, n_periods=4, master_seed=11)
    forward = [simulate_panel(cfg, r).e for r in range(5)]
    backward = [simulate_panel(cfg, r).e for r in reversed(range(5))][::-1]
    assert all(np.array_equal(x, y) for x, y in zip(forward, backward))


@pytest.mark.parametrize("c_fv", [0.0, 0.4, -1.0, 1.0])
def test_construction_identities(c_fv):
    cfg = SimConfig(n_units=6, n_periods=9, c_pi=1.5, c_fv=c_fv, master_seed=3)
    p = simulate_panel(cfg, 2)
    pr = p.params
    assert np.array_equal(p.e, pr.pi[:, None] * p.f[None, :] + p.eta)
    assert np.array_equal(p.v, c_fv * p.f + math.sqrt(1 - c_fv**2) * p.eps_v)
    assert np.mean(pr.omega**2) == pytest.approx(1.0, rel=1e-12)


def test_panel_is_immutable():
    p = simulate_panel(SimConfig(n_units=2, n_periods=3), 0)
    with pytest.raises(ValueError):
        p.e[0, 0] = 1.0


def test_freeze_units_keeps_tau():
    cfg = SimConfig(n_units=5, n_periods=4, master_seed=2, freeze_units=True)
    a, b = simulate_panel(cfg, 0), simulate_panel(cfg, 1)
    assert np.array_equal(a.params.tau, b.params.tau)
    assert not np.array_equal(a.f, b.f)
    free = SimConfig(n_units=5, n_periods=4, master_seed=2)
    assert not np.array_equal(simulate_panel(free, 0).params.tau, simulate_panel(free, 1).params.tau)


def test_cells_use_distinct_streams():
    cfg = SimConfig(n_units=3, n_periods=3, master_seed=1)
    a = simulate_panel(cfg, 0, cell=(1, 2))
    b = simulate_panel(cfg, 0, cell=(2, 1))
    assert not np.array_equal(a.f, b.f)


def test_v_and_f_uncorrelated_under_null():
    cfg = SimConfig(n_units=200, n_periods=200, c_fv=0.0, master_seed=99)
    corr = [np.corrcoef(p.v, p.f)[0, 1] for p in (simulate_panel(cfg, r) for r in range(500))]
    assert abs(np.mean(corr)) <= 0.02


def test_targets_degenerate_draws():
    cfg = SimConfig(n_units=4, n_periods=10, c_pi=0.0)
    tm = theoretical_targets(make_unit_params(np.zeros(4), 0.0), cfg)
    assert tm.gamma_pi_gamma == 0.0
    assert tm.gamma_omega == pytest.approx(1.0, rel=1e-15)
    assert tm.omega4 == pytest.approx(1.0, rel=1e-15)
    assert tm.regime is Regime.CONDITIONAL_HETEROSKEDASTICITY


def test_gamma_pi_gamma_tends_to_c_pi():
    rng = np.random.default_rng(5)
    n = 200_000
    cfg = SimConfig(n_units=n, n_periods=10, c_pi=1.3)
    tm = theoretical_targets(make_unit_params(rng.standard_normal(n), 1.3), cfg)
    # Gamma = c_pi + mean(tau) * ... -> c_pi with sd 1/sqrt(N)
    assert tm.gamma_pi_gamma == pytest.approx(1.3, abs=5 / math.sqrt(n))


@pytest.mark.parametrize("c_fv", [0.0, 0.5])
def test_sigma_fv_closed_form_matches_monte_carlo(c_fv):
    # (1/T) sum f_t^2 v_t^2 averaged over 10^4 independent draws
    rng = np.random.default_rng(123)
    t, reps = 100, 10_000
    f = rng.standard_normal((reps, t))
    v = c_fv * f + math.sqrt(1 - c_fv**2) * rng.standard_normal((reps, t))
    mc = np.mean(np.mean(f**2 * v**2, axis=1))
    cfg = SimConfig(n_units=3, n_periods=t, c_fv=c_fv)
    tm = theoretical_targets(make_unit_params(np.zeros(3), 0.0), cfg)
    assert tm.sigma_fv == pytest.approx(mc, rel=0.02)


def test_omega_w_closed_form_matches_monte_carlo():
    # (1/T^2) sum_{t<s} v_s^2 v_t^2 over draws
    rng = np.random.default_rng(321)
    t, reps = 40, 20_000
    v = rng.standard_normal((reps, t))
    sq = v**2
    pair_sum = (sq.sum(axis=1) ** 2 - (sq**2).sum(axis=1)) / 2
    mc = np.mean(pair_sum) / t**2
    tm = theoretical_targets(make_unit_params(np.zeros(3), 0.0), SimConfig(n_units=3, n_periods=t))
    assert tm.omega_w == pytest.approx(mc, rel=0.02)


def test_target_invariants():
    cfg = SimConfig(n_units=50, n_periods=30, c_pi=2.0, c_fv=0.2)
    p = simulate_panel(cfg, 0)
    tm = theoretical_targets(p.params, cfg)
    assert tm.sigma_w == pytest.approx(tm.omega4 * tm.omega_w, rel=1e-15)
    assert tm.sigma_v == pytest.approx(tm.gamma_pi_gamma**2 * tm.sigma_fv + tm.gamma_omega * tm.omega_v)
    assert min(tm.sigma_v, tm.sigma_w, tm.omega_v, tm.omega_w, tm.sigma_fv) > 0
    diag = independence_diagnostics(error_covariance(p.params), p.params.gamma)
    assert tm.a_trace == pytest.approx(diag.a_trace, rel=1e-12)
    assert tm.gamma_sigma == pytest.approx(diag.gamma_sigma, rel=1e-12)


def test_diagnostics_identity():
    d = independence_diagnostics(np.eye(3), np.ones(3))
    assert (d.gamma_sigma, d.a_trace, d.offdiag_norm) == (1.0, 1.0, 0.0)
    assert d.max_eigenvalue == pytest.approx(1.0, abs=1e-12)


def test_diagnostics_diagonal_hand_values():
    d = independence_diagnostics(np.diag([1.0, 4.0]), [1.0, 1.0])
    assert d.gamma_sigma == 2.5
    assert d.a_trace == 8.5
    assert d.max_eigenvalue == pytest.approx(4.0, abs=1e-12)


def test_diagnostics_offdiag_pair():
    d = independence_diagnostics(np.array([[1.0, 0.5], [0.5, 1.0]]), [1, 1], threshold=0.6)
    assert d.offdiag_norm == pytest.approx(0.5, abs=1e-12)
    assert d.near_diagonal is True
    assert independence_diagnostics(np.array([[1.0, 0.5], [0.5, 1.0]]), [1, 1], threshold=0.4).near_diagonal is False


def test_diagnostics_reject_asymmetric():
    with pytest.raises(ArgumentError):
        independence_diagnostics(np.array([[1.0, 0.2], [0.1, 1.0]]), [1, 1])


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(0, 10_000))
def test_diagnostics_known_spectrum(n, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    spectrum = rng.uniform(0.1, 5.0, n)
    cov = (q * spectrum) @ q.T
    cov = (cov + cov.T) / 2
    d = independence_diagnostics(cov, np.ones(n))
    assert d.max_eigenvalue == pytest.approx(spectrum.max(), abs=1e-8)
    assert d.max_eigenvalue >= np.max(np.diag(cov)) - 1e-10
    assert d.a_trace >= np.sum(np.diag(cov) ** 2) / n - 1e-12


def test_seed_bounds():
    with pytest.raises(ValueError):
        _seeding.substream(-1)
    assert _seeding.float_key(-0.0) == _seeding.float_key(0.0)
