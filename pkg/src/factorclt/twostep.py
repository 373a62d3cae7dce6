"""Two-step (first pass per unit, second pass across units) estimators.

Demo model: ``r_it = beta_i (lambda + F_t) + e_it`` with ``beta_i ~ N(1, 1)``,
``F_t ~ N(0, 1)`` and ``e`` taken from the factor-panel generator. Then
``E r_it = lambda beta_i`` and the no-intercept slope of ``r_it`` on ``F_t``
targets ``beta_i``, so every second-pass estimator below targets ``lambda``
(the split-sample ratio targets ``1/lambda``, which coincides at ``lambda=1``).
"""

from dataclasses import dataclass
import math

import numpy as np

from . import _seeding
from .dgp import SimConfig, simulate_panel
from .errors import ArgumentError, DegenerateRegressorError
from .inference import bootstrap_critical_value, rademacher_matrix

__all__ = [
    "AssetPanel",
    "FirstPassEstimates",
    "NoiseDecomposition",
    "simulate_asset_panel",
    "split_masks",
    "first_pass",
    "mean_returns",
    "first_pass_estimates",
    "weighted_average_estimator",
    "fama_macbeth",
    "split_sample_iv",
    "estimate_all",
    "noise_decomposition",
    "wild_bootstrap_intervals",
]


@dataclass(frozen=True)
class AssetPanel:
    r: np.ndarray
    F: np.ndarray
    true_lambda: float = math.nan
    true_beta: np.ndarray = None

    def __post_init__(self):
        r = np.atleast_2d(np.asarray(self.r, dtype=float))
        F = np.asarray(self.F, dtype=float).reshape(-1)
        if r.shape[1] != F.shape[0]:
            raise ArgumentError(f"r has {r.shape[1]} periods, F has {F.shape[0]}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "F", F)
        if self.true_beta is not None:
            beta = np.asarray(self.true_beta, dtype=float).reshape(-1)
            if beta.shape[0] != r.shape[0]:
                raise ArgumentError("true_beta length differs from the number of units")
            object.__setattr__(self, "true_beta", beta)

    @property
    def n_units(self):
        return self.r.shape[0]

    @property
    def n_periods(self):
        return self.r.shape[1]


@dataclass(frozen=True)
class FirstPassEstimates:
    beta1: np.ndarray
    beta2: np.ndarray
    beta3: np.ndarray = None


@dataclass(frozen=True)
class NoiseDecomposition:
    linear: float
    quadratic: float
    total: float


def simulate_asset_panel(n_units, n_periods, true_lambda=1.0, master_seed=0, rep_index=0,
                         c_pi=0.5, cell=()):
    """Draw a demo asset panel; errors come from :func:`simulate_panel`."""
    config = SimConfig(n_units=n_units, n_periods=n_periods, c_pi=c_pi, c_fv=0.0,
                       master_seed=master_seed)
    errors = simulate_panel(config, rep_index, cell=(*cell, 1))
    beta_rng, f_rng = _seeding.substreams(master_seed, 2, *cell, rep_index, 7)
    beta = 1.0 + beta_rng.standard_normal(n_units)
    F = f_rng.standard_normal(n_periods)
    r = beta[:, None] * (true_lambda + F)[None, :] + errors.e
    return AssetPanel(r=r, F=F, true_lambda=true_lambda, true_beta=beta)


def split_masks(n_periods, fraction=0.5):
    """Complementary masks: the first ``fraction`` of periods and the rest."""
    if not 0.0 < fraction < 1.0:
        raise ArgumentError("fraction must lie in (0, 1)")
    cut = int(round(fraction * n_periods))
    first = np.zeros(n_periods, dtype=bool)
    first[:cut] = True
    return first, ~first


def first_pass(panel, subsample=None, intercept=False):
    """Per-unit OLS slope of ``r_it`` on ``F_t`` over the masked periods."""
    r, F = panel.r, panel.F
    if subsample is not None:
        mask = np.asarray(subsample, dtype=bool)
        if mask.shape != F.shape:
            raise ArgumentError("subsample mask must have one entry per period")
        r, F = r[:, mask], F[mask]
    if F.size < 2:
        raise DegenerateRegressorError("first pass needs at least two periods")
    if np.ptp(F) == 0.0:
        raise DegenerateRegressorError("factor has zero variance on the selected periods")
    if intercept:
        Fc = F - F.mean()
        rc = r - r.mean(axis=1, keepdims=True)
    else:
        Fc, rc = F, r
    return rc @ Fc / float(Fc @ Fc)


def mean_returns(panel):
    return panel.r.mean(axis=1)


def first_pass_estimates(panel, split=False, fraction=0.5, intercept=False):
    """Average returns plus full-sample (or split-sample) slopes."""
    beta1 = mean_returns(panel)
    if not split:
        return FirstPassEstimates(beta1=beta1, beta2=first_pass(panel, intercept=intercept))
    first, second = split_masks(panel.n_periods, fraction)
    return FirstPassEstimates(
        beta1=beta1,
        beta2=first_pass(panel, first, intercept=intercept),
        beta3=first_pass(panel, second, intercept=intercept),
    )


def _same_length(*arrays):
    arrays = [np.asarray(a, dtype=float).reshape(-1) for a in arrays]
    if len({a.shape[0] for a in arrays}) != 1:
        raise ArgumentError(f"length mismatch: {[a.shape[0] for a in arrays]}")
    return arrays


def weighted_average_estimator(gamma, beta_hat):
    gamma, beta_hat = _same_length(gamma, beta_hat)
    return float(gamma @ beta_hat) / gamma.shape[0]


def fama_macbeth(beta1, beta2):
    """No-intercept cross-sectional OLS of average returns on slopes."""
    beta1, beta2 = _same_length(beta1, beta2)
    denom = float(beta2 @ beta2)
    if denom == 0.0:
        raise DegenerateRegressorError("all first-pass slopes are zero")
    return float(beta1 @ beta2) / denom


def split_sample_iv(beta1, beta2, beta3):
    """``sum(beta3 * beta2) / sum(beta3 * beta1)``, taken literally.

    Note this is the reciprocal of the IV regression of ``beta1`` on
    ``beta2`` instrumented by ``beta3``; it targets ``1/lambda``.
    """
    beta1, beta2, beta3 = _same_length(beta1, beta2, beta3)
    denom = float(beta3 @ beta1)
    if denom == 0.0:
        raise DegenerateRegressorError("instrument is orthogonal to average returns (weak instrument)")
    return float(beta3 @ beta2) / denom


def estimate_all(panel, fraction=0.5, gamma=None):
    """The three second-pass estimates on one panel.

    ``gamma`` defaults to ``beta_i / mean(beta^2)`` built from the true
    loadings, which makes the weighted average target ``lambda``.
    """
    full = first_pass_estimates(panel)
    split = first_pass_estimates(panel, split=True, fraction=fraction)
    if gamma is None:
        if panel.true_beta is None:
            raise ArgumentError("weighted average needs gamma or true_beta")
        beta = panel.true_beta
        gamma = beta / np.mean(beta * beta)
    return {
        "weighted_average": weighted_average_estimator(gamma, full.beta1),
        "fama_macbeth": fama_macbeth(full.beta1, full.beta2),
        "split_sample_iv": split_sample_iv(split.beta1, split.beta2, split.beta3),
    }


def noise_decomposition(panel, estimates, expected_cross=None):
    """Split the centred sample covariance of two first-step estimates.

    With ``beta_hat_j = beta_j + eps_j``::

        N^{-1/2} sum (b1 b2 - E b1 b2)
            = N^{-1/2} sum (beta1 eps2 + beta2 eps1)      # linear
            + N^{-1/2} sum (eps1 eps2 - E eps1 eps2)       # quadratic

    The true first-step targets are ``lambda * beta_i`` (mean return) and
    ``beta_i`` (slope). ``expected_cross`` is ``E eps1_i eps2_i``; the default
    ``lambda beta_i^2 / T`` is exact for the demo model with full-sample
    no-intercept slopes and symmetric iid ``F``.
    """
    if panel.true_beta is None or math.isnan(panel.true_lambda):
        raise ArgumentError("noise decomposition needs true_beta and true_lambda (simulated panels)")
    lam, beta = panel.true_lambda, panel.true_beta
    b1, b2 = estimates.beta1, estimates.beta2
    target1, target2 = lam * beta, beta
    eps1, eps2 = b1 - target1, b2 - target2
    if expected_cross is None:
        expected_cross = lam * beta**2 / panel.n_periods
    root_n = math.sqrt(beta.shape[0])
    linear = float(np.sum(target1 * eps2 + target2 * eps1)) / root_n
    quadratic = float(np.sum(eps1 * eps2 - expected_cross)) / root_n
    total = float(np.sum(b1 * b2 - (target1 * target2 + expected_cross))) / root_n
    return NoiseDecomposition(linear=linear, quadratic=quadratic, total=total)


def wild_bootstrap_intervals(panel, n_boot, rng, level=0.05, fraction=0.5, gamma=None):
    """Symmetric wild-bootstrap intervals for each second-pass estimate.

    Residuals from per-unit regressions with intercept are sign-flipped by
    period (``F`` held fixed), every estimator is recomputed, and the
    interval is ``lambda_hat +/- c`` with ``c`` the bootstrap critical value
    of ``|lambda* - lambda_hat|``.
    """
    r, F = panel.r, panel.F
    Fc = F - F.mean()
    slope = (r - r.mean(axis=1, keepdims=True)) @ Fc / float(Fc @ Fc)
    intercept = r.mean(axis=1) - slope * F.mean()
    fitted = intercept[:, None] + slope[:, None] * F[None, :]
    resid = r - fitted

    point = estimate_all(panel, fraction=fraction, gamma=gamma)
    deltas = rademacher_matrix(n_boot, panel.n_periods, rng)
    draws = {k: np.empty(n_boot) for k in point}
    for b in range(n_boot):
        star = AssetPanel(r=fitted + resid * deltas[b][None, :], F=F,
                          true_lambda=panel.true_lambda, true_beta=panel.true_beta)
        for k, val in estimate_all(star, fraction=fraction, gamma=gamma).items():
            draws[k][b] = val
    out = {}
    for k, est in point.items():
        crit = bootstrap_critical_value(draws[k] - est, level)
        out[k] = {"estimate": est, "lower": est - crit, "upper": est + crit,
                  "level": level, "n_boot": n_boot}
    return out
