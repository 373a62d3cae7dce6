"""Asymptotic-t and wild (Rademacher) bootstrap tests for the aggregate.

A bootstrap replicate flips the sign of every error in period ``t`` by an
independent ``delta_t`` in {-1, +1}. Cross-sectional dependence inside a
period is kept; any dependence across periods is destroyed.
"""

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np
from scipy.special import ndtri

from .errors import ArgumentError, DegenerateVarianceError
from .stats import XiSample, aggregate_xi, _arrays, _quadratic_from_products

__all__ = [
    "Method",
    "RademacherWeights",
    "BootstrapDraws",
    "TestDecision",
    "rademacher_weights",
    "rademacher_matrix",
    "bootstrap_replicate",
    "bootstrap_kernel",
    "run_bootstrap",
    "normal_critical_value",
    "bootstrap_critical_value",
    "min_bootstrap_reps",
    "test_asymptotic",
    "test_bootstrap",
    "stream_critical_values",
]

# share of degenerate bootstrap-t replicates tolerated before failing
MAX_EXCLUDED_SHARE = 0.01


class Method(str, Enum):
    ASYMPTOTIC_T = "asy-t"
    BOOTSTRAP_XI = "bootstrap-xi"
    BOOTSTRAP_T = "bootstrap-t"


@dataclass(frozen=True)
class RademacherWeights:
    delta: np.ndarray

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float).reshape(-1)
        if not np.all(np.abs(delta) == 1.0):
            raise ArgumentError("Rademacher weights must be exactly -1 or +1")
        object.__setattr__(self, "delta", delta)

    def __len__(self):
        return self.delta.shape[0]


@dataclass(frozen=True)
class BootstrapDraws:
    xi_star: np.ndarray
    t_star: np.ndarray
    b_reps: int
    n_excluded: tuple = (0, 0)


@dataclass(frozen=True)
class TestDecision:
    __test__ = False  # keep pytest from collecting this class

    statistic: float
    critical_value: float
    level: float
    reject: bool
    method: Method


def rademacher_matrix(n_draws, n_periods, rng):
    """``n_draws`` x ``n_periods`` iid signs, each +1 with probability 1/2."""
    bits = rng.integers(0, 2, size=(n_draws, n_periods), dtype=np.int8)
    return (2 * bits - 1).astype(float)


def rademacher_weights(n_periods, rng):
    if n_periods < 1:
        raise ArgumentError("n_periods must be >= 1")
    return RademacherWeights(rademacher_matrix(1, n_periods, rng)[0])


def _delta_array(delta, t):
    d = delta.delta if isinstance(delta, RademacherWeights) else np.asarray(delta, dtype=float)
    if d.shape != (t,):
        raise ArgumentError(f"delta has length {d.size}, panel has {t} periods")
    return d


def bootstrap_replicate(panel, delta):
    """Statistics recomputed with ``e*_it = delta_t e_it``.

    The sign is absorbed into the period products ``v_t delta_t e_it``
    instead of copying the panel. With ``delta`` all ones the result is
    bit-identical to :func:`~factorclt.stats.xi_sample`.
    """
    e, v, gamma = _arrays(panel)
    t = e.shape[1]
    d = _delta_array(delta, t)
    u = e * (v * d)[None, :]
    lin = gamma * np.sum(u, axis=1) / math.sqrt(t)
    return aggregate_xi(lin, _quadratic_from_products(u))


def bootstrap_kernel(panel, deltas):
    """Batched replicates for product weights.

    Uses ``sum_{t<s} x_t x_s = ((sum x)^2 - sum x^2) / 2`` with
    ``x_t = delta_t v_t e_it``; since ``delta_t^2 = 1`` the square sum does not
    depend on the draw, so all replicates reduce to one ``(N x T) @ (T x B)``
    product.

    Returns
    -------
    xi_star : (B, 2) array
        Bootstrap aggregates.
    sigma_diag : (B, 2) array
        Diagonal of the bootstrap plug-in variance for each replicate.
    """
    e, v, gamma = _arrays(panel)
    n, t = e.shape
    deltas = np.atleast_2d(np.asarray(deltas, dtype=float))
    if deltas.shape[1] != t:
        raise ArgumentError(f"deltas have {deltas.shape[1]} periods, panel has {t}")
    u = e * v[None, :]
    sq = np.sum(u * u, axis=1)
    s = u @ deltas.T  # N x B
    lin = gamma[:, None] * s / math.sqrt(t)
    quad = (s * s - sq[:, None]) / (2.0 * t)
    root_n = math.sqrt(n)
    xi_star = np.column_stack([lin.sum(axis=0), quad.sum(axis=0)]) / root_n
    sigma_diag = np.column_stack([np.mean(lin * lin, axis=0), np.mean(quad * quad, axis=0)])
    return xi_star, sigma_diag


def run_bootstrap(panel, n_boot, rng=None, with_t=True, deltas=None):
    """Wild bootstrap distribution of the aggregate (and its t-statistic).

    Parameters
    ----------
    panel : PanelData or FactorPanel
    n_boot : int
        Number of replicates ``B``.
    rng : numpy.random.Generator
        Source of the Rademacher draws; ignored when ``deltas`` is given.
    with_t : bool
        Also studentize each replicate by its own plug-in variance.
    deltas : (B, T) array, optional
        Explicit sign draws.

    Returns
    -------
    BootstrapDraws
        ``t_star`` is NaN where a replicate variance is zero. More than 1%
        such replicates in a component raises
        :class:`DegenerateVarianceError`.
    """
    if n_boot < 1:
        raise ArgumentError("n_boot must be >= 1")
    t = np.atleast_2d(panel.e).shape[1]
    if deltas is None:
        if rng is None:
            raise ArgumentError("either rng or deltas is required")
        deltas = rademacher_matrix(n_boot, t, rng)
    elif np.atleast_2d(deltas).shape[0] != n_boot:
        raise ArgumentError("deltas must have n_boot rows")
    xi_star, sigma_diag = bootstrap_kernel(panel, deltas)
    if not with_t:
        return BootstrapDraws(xi_star=xi_star, t_star=None, b_reps=n_boot)

    degenerate = sigma_diag <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t_star = np.where(degenerate, np.nan, xi_star / np.sqrt(sigma_diag))
    excluded = tuple(int(c) for c in degenerate.sum(axis=0))
    if max(excluded) > MAX_EXCLUDED_SHARE * n_boot:
        raise DegenerateVarianceError(
            f"{max(excluded)} of {n_boot} bootstrap replicates have zero variance "
            f"(limit {MAX_EXCLUDED_SHARE:.0%})"
        )
    return BootstrapDraws(xi_star=xi_star, t_star=t_star, b_reps=n_boot, n_excluded=excluded)


def _check_level(level):
    if not 0.0 < level < 1.0:
        raise ArgumentError(f"level must lie in (0, 1), got {level}")


def normal_critical_value(level):
    """Two-sided standard normal critical value ``z_{1 - level/2}``."""
    _check_level(level)
    return float(-ndtri(level / 2.0))


def _order_index(level, n):
    # ceil((1 - level)(n + 1)), guarded against representation error
    return math.ceil((1.0 - level) * (n + 1) - 1e-9)


def min_bootstrap_reps(level):
    """Smallest B for which the bootstrap critical value exists."""
    _check_level(level)
    return max(1, math.ceil(1.0 / level - 1.0 - 1e-9))


def bootstrap_critical_value(values, level):
    """The ``ceil((1 - level)(B + 1))``-th order statistic of ``|values|``.

    NaN entries (excluded replicates) are dropped first.
    """
    _check_level(level)
    a = np.abs(np.asarray(values, dtype=float).reshape(-1))
    a = a[~np.isnan(a)]
    k = _order_index(level, a.size)
    if a.size == 0 or k > a.size:
        raise ArgumentError(
            f"B = {a.size} bootstrap values cannot support level {level}: the "
            f"quantile needs B >= ceil(1/level) - 1 = {min_bootstrap_reps(level)}"
        )
    return float(np.partition(a, k - 1)[k - 1])


def test_asymptotic(t_stat, level):
    crit = normal_critical_value(level)
    return TestDecision(
        statistic=float(t_stat),
        critical_value=crit,
        level=level,
        reject=abs(t_stat) > crit,
        method=Method.ASYMPTOTIC_T,
    )


def test_bootstrap(observed, bootstrap_values, level, method=Method.BOOTSTRAP_XI):
    """Two-sided bootstrap test: reject when ``|observed|`` exceeds the critical value.

    Works for both variants: pass ``Xi*`` with the observed aggregate, or
    ``t*`` with the observed t-statistic and ``method=Method.BOOTSTRAP_T``.
    """
    crit = bootstrap_critical_value(bootstrap_values, level)
    return TestDecision(
        statistic=float(observed),
        critical_value=crit,
        level=level,
        reject=abs(observed) > crit,
        method=Method(method),
    )


def stream_critical_values(values, levels):
    """Critical values for several levels from one sort (columns = components)."""
    a = np.sort(np.abs(np.asarray(values, dtype=float)), axis=0)
    out = np.empty((len(levels), a.shape[1]))
    for col in range(a.shape[1]):
        finite = a[:, col][~np.isnan(a[:, col])]
        for j, level in enumerate(levels):
            k = _order_index(level, finite.size)
            if k > finite.size or k < 1:
                raise ArgumentError(
                    f"B = {finite.size} bootstrap values cannot support level {level}: the "
                    f"quantile needs B >= ceil(1/level) - 1 = {min_bootstrap_reps(level)}"
                )
            out[j, col] = finite[k - 1]
    return out
