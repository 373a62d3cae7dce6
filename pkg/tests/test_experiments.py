import math

import numpy as np
import pytest

from factorclt import report
from factorclt.errors import ConfigError, DegenerateVarianceError
from factorclt.experiments import (
    ExperimentConfig,
    run_distribution_study,
    run_size_power_study,
    run_two_step_study,
    simulate_statistics,
    summarize_moments,
    variance_check,
)


def small(**kw):
    values = dict(n=15, t=20, c_pi=(0.5, 2.0), c_fv=(0.0,), reps=40, boot_reps=39,
                  levels=(0.05, 0.1), seed=123)
    values.update(kw)
    return ExperimentConfig.desk(**values)


# summarize_moments

def test_symmetric_sample():
    s = summarize_moments([-1.0, 1.0] * 50)
    assert s.mean == 0.0 and s.skewness == 0.0


def test_gaussian_moments():
    x = np.random.default_rng(0).standard_normal(1_000_000)
    s = summarize_moments(x)
    assert abs(s.kurtosis - 3.0) <= 0.05
    assert abs(s.right_quantile_5pct - 1.645) <= 0.01
    assert s.n_samples == 1_000_000


def test_constant_sample_rejected():
    with pytest.raises(DegenerateVarianceError):
        summarize_moments(np.full(10, 2.5))
    with pytest.raises(ValueError):
        summarize_moments([1.0, 2.0, 3.0])


def test_hand_computed_summary():
    x = np.array([0.0, 0.0, 0.0, 4.0])
    sd = math.sqrt(4.0)  # sample variance with divisor n-1 is 12/3
    z = x / sd
    c = z - z.mean()
    s = summarize_moments(x)
    assert s.mean == pytest.approx(0.5)
    assert s.skewness == pytest.approx(np.mean(c**3) / np.mean(c**2) ** 1.5)
    assert s.kurtosis == pytest.approx(np.mean(c**4) / np.mean(c**2) ** 2)
    # linear interpolation: position 0.95*3 = 2.85 between 0 and 2
    assert s.right_quantile_5pct == pytest.approx(0.85 * 2.0)


@pytest.mark.parametrize("seed", range(20))
def test_moment_inequality(seed):
    x = np.random.default_rng(seed).exponential(size=50) ** (1 + seed % 3)
    s = summarize_moments(x)
    assert s.kurtosis >= 1 + s.skewness**2 - 1e-12


# config validation

def test_config_levels_sorted():
    assert small(levels=(0.1, 0.05)).levels == (0.05, 0.1)


@pytest.mark.parametrize("kw, key", [
    (dict(c_fv=(1.5,)), "c_fv"),
    (dict(c_pi=(-1.0,)), "c_pi"),
    (dict(c_pi=()), "c_pi"),
    (dict(levels=(0.0,)), "levels"),
    (dict(reps=0), "reps"),
    (dict(boot_reps=10), "boot_reps"),
])
def test_config_rejects(kw, key):
    with pytest.raises(ConfigError) as info:
        small(**kw)
    assert info.value.key == key


def test_config_text_round_trip():
    from factorclt.cli import parse_config
    cfg = small(freeze_units=True)
    assert parse_config(text=cfg.to_config_text()) == cfg


# studies

def test_simulate_statistics_shapes_and_determinism():
    cfg = small()
    a = simulate_statistics(cfg, 0.5)
    b = simulate_statistics(cfg, 0.5, threads=3)
    assert a.xi.shape == (40, 2) and a.sigma_diag.shape == (40, 2)
    assert np.array_equal(a.xi, b.xi) and np.array_equal(a.sigma_diag, b.sigma_diag)
    assert np.all(a.sigma_w_finite >= a.sigma_w * 0.999)


def test_cells_use_distinct_streams():
    cfg = small()
    assert not np.array_equal(simulate_statistics(cfg, 0.5).xi, simulate_statistics(cfg, 2.0).xi)


def test_distribution_study_requires_null():
    with pytest.raises(ConfigError):
        run_distribution_study(small(c_fv=(0.0, 0.1)))


def test_distribution_rows():
    rows = run_distribution_study(small())
    assert [(r.c_pi, r.component) for r in rows] == [
        (0.5, "linear"), (0.5, "quadratic"), (2.0, "linear"), (2.0, "quadratic")]
    assert all(r.summary.n_samples == 40 for r in rows)


def test_variance_check_rows():
    rows = variance_check(small())
    assert len(rows) == 4
    for r in rows:
        assert r.empirical_var > 0 and r.mean_sigma_hat > 0 and r.theoretical > 0
        assert r.ratio_to_sigma_hat == r.empirical_var / r.mean_sigma_hat


def test_size_power_table_invariants():
    cfg = small(c_fv=(0.0, 0.2), reps=30)
    table = run_size_power_study(cfg)
    assert len(table.rows) == 2 * 2 * 2 * 3 * 2
    for r in table.rows:
        assert 0.0 <= r.rate <= 1.0
        assert r.mc_stderr == pytest.approx(math.sqrt(r.rate * (1 - r.rate) / 30))
        assert r.rate * 30 == pytest.approx(round(r.rate * 30))
    # a lower level never rejects more often
    for r in table.rows:
        if r.level == 0.05:
            hi = table.rate(r.c_pi, r.c_fv, r.component, r.method, 0.1)
            assert r.rate <= hi


def test_size_power_thread_independent_csv():
    cfg = small(reps=25)
    texts = {report.table2_csv(run_size_power_study(cfg, threads=k)) for k in (1, 3)}
    assert len(texts) == 1


def test_two_step_study_runs():
    rows = run_two_step_study(20, (30, 60), 20, master_seed=4)
    assert len(rows) == 6
    assert all(r.max_decomposition_error <= 1e-10 for r in rows)
    assert all(math.isfinite(r.mean) and r.mc_stderr > 0 for r in rows)
