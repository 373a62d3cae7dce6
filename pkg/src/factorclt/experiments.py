"""Monte Carlo studies: null distribution, size/power and variance checks.

Every replication draws from its own stream keyed by
``(master_seed, c_pi, c_fv, rep_index)``; results are written into slots
indexed by ``rep_index`` and reduced in a fixed order, so outputs do not
depend on the number of worker threads or on grid ordering.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np
from threadpoolctl import threadpool_limits

from . import _seeding
from .dgp import SimConfig, simulate_panel, theoretical_targets
from .errors import ConfigError, DegenerateVarianceError, ExperimentError, FactorCLTError
from .inference import (
    Method,
    min_bootstrap_reps,
    normal_critical_value,
    run_bootstrap,
    stream_critical_values,
)
from .stats import variance_estimate, xi_sample
from . import twostep

log = logging.getLogger(__name__)

COMPONENTS = ("linear", "quadratic")
METHODS = (Method.ASYMPTOTIC_T, Method.BOOTSTRAP_XI, Method.BOOTSTRAP_T)

DESK_DEFAULTS = dict(
    n=200, t=200, c_pi=(0.5, 1.0, 2.0), c_fv=(0.0, 0.1, 0.2), reps=2000,
    boot_reps=400, seed=20200401, levels=(0.01, 0.05, 0.10), freeze_units=False,
)
FULL_SCALE = dict(n=500, t=500, reps=2000, boot_reps=600)


@dataclass(frozen=True)
class ExperimentConfig:
    base: SimConfig
    c_pi_grid: tuple = DESK_DEFAULTS["c_pi"]
    c_fv_grid: tuple = DESK_DEFAULTS["c_fv"]
    n_reps: int = DESK_DEFAULTS["reps"]
    n_boot: int = DESK_DEFAULTS["boot_reps"]
    levels: tuple = DESK_DEFAULTS["levels"]
    freeze_units: bool = False

    def __post_init__(self):
        c_pi = tuple(float(x) for x in self.c_pi_grid)
        c_fv = tuple(float(x) for x in self.c_fv_grid)
        levels = tuple(sorted(float(x) for x in self.levels))
        if not c_pi:
            raise ConfigError("grid must not be empty", key="c_pi")
        if not c_fv:
            raise ConfigError("grid must not be empty", key="c_fv")
        for x in c_pi:
            if not x >= 0.0:
                raise ConfigError(f"value {x} must be >= 0", key="c_pi")
        for x in c_fv:
            if not -1.0 <= x <= 1.0:
                raise ConfigError(f"value {x} is outside the bound [-1, 1]", key="c_fv")
        if not levels:
            raise ConfigError("at least one level is required", key="levels")
        for x in levels:
            if not 0.0 < x < 1.0:
                raise ConfigError(f"level {x} must lie in (0, 1)", key="levels")
        if int(self.n_reps) != self.n_reps or self.n_reps < 1:
            raise ConfigError("must be a positive integer", key="reps")
        if int(self.n_boot) != self.n_boot or self.n_boot < 1:
            raise ConfigError("must be a positive integer", key="boot_reps")
        needed = min_bootstrap_reps(levels[0])
        if self.n_boot < needed:
            raise ConfigError(
                f"boot_reps = {self.n_boot} is too small for level {levels[0]}: the bootstrap "
                f"quantile precondition needs B >= ceil(1/level) - 1 = {needed}",
                key="boot_reps",
            )
        object.__setattr__(self, "c_pi_grid", c_pi)
        object.__setattr__(self, "c_fv_grid", c_fv)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "base", replace(self.base, freeze_units=bool(self.freeze_units)))

    @classmethod
    def desk(cls, **overrides):
        """Desk-scale defaults with keyword overrides in config-key names."""
        values = {**DESK_DEFAULTS, **overrides}
        base = SimConfig(n_units=int(values["n"]), n_periods=int(values["t"]),
                         master_seed=int(values["seed"]))
        return cls(base=base, c_pi_grid=tuple(values["c_pi"]), c_fv_grid=tuple(values["c_fv"]),
                   n_reps=int(values["reps"]), n_boot=int(values["boot_reps"]),
                   levels=tuple(values["levels"]), freeze_units=bool(values["freeze_units"]))

    @property
    def master_seed(self):
        return self.base.master_seed

    def cell_config(self, c_pi, c_fv):
        return replace(self.base, c_pi=float(c_pi), c_fv=float(c_fv))

    def as_dict(self):
        return {
            "n": self.base.n_units,
            "t": self.base.n_periods,
            "c_pi": list(self.c_pi_grid),
            "c_fv": list(self.c_fv_grid),
            "reps": self.n_reps,
            "boot_reps": self.n_boot,
            "seed": self.base.master_seed,
            "levels": list(self.levels),
            "freeze_units": self.freeze_units,
        }

    def to_config_text(self):
        """Flat ``key = value`` text that parses back to this config."""
        lines = []
        for key, value in self.as_dict().items():
            if isinstance(value, list):
                value = ",".join(repr(float(x)) for x in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DistributionSummary:
    mean: float
    skewness: float
    kurtosis: float
    right_quantile_5pct: float
    n_samples: int


@dataclass(frozen=True)
class DistributionRow:
    c_pi: float
    component: str
    summary: DistributionSummary


@dataclass(frozen=True)
class RejectionCell:
    c_pi: float
    c_fv: float
    component: str
    method: str
    level: float
    rate: float
    mc_stderr: float
    n_reps: int


@dataclass
class RejectionTable:
    rows: list = field(default_factory=list)

    def get(self, c_pi, c_fv, component, method, level):
        method = Method(method).value
        for row in self.rows:
            if (math.isclose(row.c_pi, c_pi) and math.isclose(row.c_fv, c_fv)
                    and row.component == component and row.method == method
                    and math.isclose(row.level, level)):
                return row
        raise KeyError((c_pi, c_fv, component, method, level))

    def rate(self, *key):
        return self.get(*key).rate


@dataclass(frozen=True)
class VarianceCheckRow:
    c_pi: float
    component: str
    empirical_var: float
    mean_sigma_hat: float
    theoretical: float
    finite_target: float
    n_reps: int

    @property
    def ratio_to_sigma_hat(self):
        return self.empirical_var / self.mean_sigma_hat

    @property
    def ratio_to_theoretical(self):
        return self.empirical_var / self.theoretical


@dataclass(frozen=True)
class NullDraws:
    """Per-replication output of one (c_pi, c_fv) cell without bootstrap."""

    c_pi: float
    c_fv: float
    xi: np.ndarray          # R x 2 aggregates
    sigma_diag: np.ndarray  # R x 2 plug-in variances
    sigma_v: np.ndarray     # R finite-N linear targets
    sigma_w: np.ndarray     # R limit-form quadratic targets
    sigma_w_finite: np.ndarray  # R quadratic targets using tr(E^2)/N


def cell_key(c_pi, c_fv):
    return (_seeding.float_key(c_pi), _seeding.float_key(c_fv))


def _map_reps(fn, n_reps, threads):
    threads = max(1, int(threads or 1))
    with threadpool_limits(limits=1):
        if threads == 1:
            return [fn(r) for r in range(n_reps)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(n_reps)))


def _cell_failure(c_pi, c_fv, rep, exc):
    return ExperimentError(
        f"cell (c_pi={c_pi}, c_fv={c_fv}) aborted at replication {rep}: "
        f"{type(exc).__name__}: {exc}"
    )


def summarize_moments(samples):
    """Mean, skewness, raw kurtosis and right 5% quantile of a normalized sample.

    The sample is divided by its standard deviation (divisor n-1). Skewness
    and kurtosis use central moments with divisor n; the quantile
    interpolates linearly between order statistics.
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size < 4:
        raise ValueError(f"need at least 4 samples, got {x.size}")
    sd = float(np.std(x, ddof=1))
    if not sd > 0.0 or not math.isfinite(sd):
        raise DegenerateVarianceError("sample has zero spread; cannot normalize")
    z = x / sd
    mean = float(np.mean(z))
    c = z - mean
    m2 = float(np.mean(c**2))
    m3 = float(np.mean(c**3))
    m4 = float(np.mean(c**4))
    return DistributionSummary(
        mean=mean,
        skewness=m3 / m2**1.5,
        kurtosis=m4 / m2**2,
        right_quantile_5pct=float(np.quantile(z, 0.95)),
        n_samples=int(x.size),
    )


def simulate_statistics(config, c_pi, c_fv=0.0, threads=None):
    """Aggregates, plug-in variances and targets for every replication of a cell."""
    cfg = config.cell_config(c_pi, c_fv)
    cell = cell_key(c_pi, c_fv)

    def one(rep):
        try:
            panel = simulate_panel(cfg, rep, cell=cell)
            sample = xi_sample(panel)
            var = variance_estimate(sample, require_both=False)
            tm = theoretical_targets(panel.params, cfg)
        except FactorCLTError as exc:
            raise _cell_failure(c_pi, c_fv, rep, exc) from exc
        return (*sample.aggregate, var.sigma_hat[0, 0], var.sigma_hat[1, 1],
                tm.sigma_v, tm.sigma_w, tm.sigma_w_finite)

    out = np.array(_map_reps(one, config.n_reps, threads), dtype=float).reshape(-1, 7)
    return NullDraws(c_pi=float(c_pi), c_fv=float(c_fv), xi=out[:, 0:2], sigma_diag=out[:, 2:4],
                     sigma_v=out[:, 4], sigma_w=out[:, 5], sigma_w_finite=out[:, 6])


def _require_null(config):
    if config.c_fv_grid != (0.0,):
        raise ConfigError("the null study needs c_fv = 0 only", key="c_fv")


def distribution_rows(draws):
    return [DistributionRow(draws.c_pi, comp, summarize_moments(draws.xi[:, k]))
            for k, comp in enumerate(COMPONENTS)]


def run_distribution_study(config, threads=None):
    """Finite-sample distribution summaries of both aggregates for each ``c_pi``."""
    _require_null(config)
    rows = []
    for c_pi in config.c_pi_grid:
        log.info("distribution study: c_pi=%g (%d reps)", c_pi, config.n_reps)
        rows.extend(distribution_rows(simulate_statistics(config, c_pi, 0.0, threads)))
    return rows


def variance_rows(draws):
    rows = []
    targets = (
        (draws.sigma_v, draws.sigma_v),
        (draws.sigma_w, draws.sigma_w_finite),
    )
    for k, comp in enumerate(COMPONENTS):
        theo, finite = targets[k]
        rows.append(VarianceCheckRow(
            c_pi=draws.c_pi,
            component=comp,
            empirical_var=float(np.var(draws.xi[:, k], ddof=1)),
            mean_sigma_hat=float(np.mean(draws.sigma_diag[:, k])),
            theoretical=float(np.mean(theo)),
            finite_target=float(np.mean(finite)),
            n_reps=draws.xi.shape[0],
        ))
    return rows


def variance_check(config, threads=None):
    """Empirical variance of each aggregate against the theory and the plug-in mean."""
    _require_null(config)
    rows = []
    for c_pi in config.c_pi_grid:
        log.info("variance check: c_pi=%g (%d reps)", c_pi, config.n_reps)
        rows.extend(variance_rows(simulate_statistics(config, c_pi, 0.0, threads)))
    return rows


def _size_power_cell(config, c_pi, c_fv, threads):
    cfg = config.cell_config(c_pi, c_fv)
    cell = cell_key(c_pi, c_fv)
    levels = config.levels
    z = np.array([normal_critical_value(a) for a in levels])

    def one(rep):
        try:
            panel = simulate_panel(cfg, rep, cell=cell)
            sample = xi_sample(panel)
            var = variance_estimate(sample)
            rng = _seeding.substream(config.master_seed, *cell, rep, _seeding.BOOTSTRAP)
            draws = run_bootstrap(panel, config.n_boot, rng, with_t=True)
            crit_xi = stream_critical_values(draws.xi_star, levels)
            crit_t = stream_critical_values(draws.t_star, levels)
        except FactorCLTError as exc:
            raise _cell_failure(c_pi, c_fv, rep, exc) from exc
        xi = np.abs(np.asarray(sample.aggregate))
        t = np.abs(np.asarray(var.t_stats))
        # levels x components x methods
        return np.stack([t[None, :] > z[:, None], xi[None, :] > crit_xi, t[None, :] > crit_t], axis=-1)

    hits = np.array(_map_reps(one, config.n_reps, threads), dtype=np.int64)
    counts = hits.sum(axis=0)
    rows = []
    r = config.n_reps
    for k, comp in enumerate(COMPONENTS):
        for m, method in enumerate(METHODS):
            for j, level in enumerate(levels):
                p = counts[j, k, m] / r
                rows.append(RejectionCell(
                    c_pi=float(c_pi), c_fv=float(c_fv), component=comp, method=method.value,
                    level=level, rate=float(p), mc_stderr=math.sqrt(p * (1.0 - p) / r), n_reps=r,
                ))
    return rows


def run_size_power_study(config, threads=None):
    """Rejection rates of the asymptotic-t and both bootstrap tests over the grid."""
    table = RejectionTable()
    for c_fv in config.c_fv_grid:
        for c_pi in config.c_pi_grid:
            log.info("size/power: c_pi=%g c_fv=%g (%d reps x %d boot)",
                     c_pi, c_fv, config.n_reps, config.n_boot)
            table.rows.extend(_size_power_cell(config, c_pi, c_fv, threads))
    return table


@dataclass(frozen=True)
class TwoStepRow:
    n_periods: int
    estimator: str
    mean: float
    mc_stderr: float
    max_decomposition_error: float
    n_reps: int


def run_two_step_study(n_units, periods, n_reps, master_seed, true_lambda=1.0, c_pi=0.5,
                       threads=None):
    """Monte Carlo means of the three second-pass estimators for each ``T``."""
    rows = []
    for t in periods:
        cell = (_seeding.float_key(t),)

        def one(rep):
            panel = twostep.simulate_asset_panel(n_units, t, true_lambda, master_seed, rep,
                                                 c_pi=c_pi, cell=cell)
            est = twostep.estimate_all(panel)
            dec = twostep.noise_decomposition(panel, twostep.first_pass_estimates(panel))
            err = abs(dec.linear + dec.quadratic - dec.total)
            return [est["weighted_average"], est["fama_macbeth"], est["split_sample_iv"], err]

        out = np.array(_map_reps(one, n_reps, threads), dtype=float)
        for k, name in enumerate(("weighted_average", "fama_macbeth", "split_sample_iv")):
            rows.append(TwoStepRow(
                n_periods=int(t), estimator=name, mean=float(out[:, k].mean()),
                mc_stderr=float(out[:, k].std(ddof=1) / math.sqrt(n_reps)),
                max_decomposition_error=float(out[:, 3].max()), n_reps=n_reps,
            ))
    return rows
