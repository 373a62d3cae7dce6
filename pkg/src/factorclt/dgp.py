"""Factor-panel data generating process and its theoretical moment targets.

The design: errors carry a weak latent one-factor structure

    e_it = pi_i * f_t + omega_i * eps_it,
    pi_i = (c_pi + tau_i) / sqrt(N),  omega_i = c_omega * (1 + |tau_i|),

with a common variable ``v_t = c_fv * f_t + sqrt(1 - c_fv**2) * eps_v_t`` and
quadratic weights ``w_st = v_s * v_t``. All shocks are iid standard normal and
mutually independent. ``c_fv = 0`` is the null (mean-zero statistics);
``c_fv != 0`` moves the statistics away from zero.
"""

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from . import _seeding
from .errors import ArgumentError

__all__ = [
    "SimConfig",
    "UnitParams",
    "FactorPanel",
    "PanelData",
    "Regime",
    "TheoreticalMoments",
    "IndependenceDiagnostics",
    "tune_c_omega",
    "make_unit_params",
    "simulate_panel",
    "error_covariance",
    "theoretical_targets",
    "independence_diagnostics",
    "panel_to_csv",
]


@dataclass(frozen=True)
class SimConfig:
    """Dimensions and design constants of one simulated panel."""

    n_units: int
    n_periods: int
    c_pi: float = 0.0
    c_fv: float = 0.0
    master_seed: int = 0
    n_factors: int = 1
    freeze_units: bool = False

    def __post_init__(self):
        if int(self.n_units) != self.n_units or self.n_units < 1:
            raise ArgumentError(f"n_units must be a positive integer, got {self.n_units}")
        if int(self.n_periods) != self.n_periods or self.n_periods < 2:
            raise ArgumentError(f"n_periods must be an integer >= 2, got {self.n_periods}")
        if not self.c_pi >= 0:
            raise ArgumentError(f"c_pi must be >= 0, got {self.c_pi}")
        if not -1.0 <= self.c_fv <= 1.0:
            raise ArgumentError(f"c_fv must lie in [-1, 1], got {self.c_fv}")
        if not 0 <= self.master_seed < 2**64:
            raise ArgumentError("master_seed must be a 64-bit unsigned integer")
        if self.n_factors != 1:
            # only the scalar factor design is generated
            raise ArgumentError("only n_factors = 1 is supported by the generator")


@dataclass(frozen=True)
class UnitParams:
    tau: np.ndarray
    omega: np.ndarray
    pi: np.ndarray
    gamma: np.ndarray
    c_omega: float


@dataclass(frozen=True)
class PanelData:
    """The observable inputs of the statistics: errors, common variable, weights."""

    e: np.ndarray
    v: np.ndarray
    gamma: np.ndarray = None

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.e, dtype=float))
        v = np.asarray(self.v, dtype=float).reshape(-1)
        if e.shape[1] != v.shape[0]:
            raise ArgumentError(f"e has {e.shape[1]} periods but v has {v.shape[0]}")
        gamma = self.gamma
        gamma = np.ones(e.shape[0]) if gamma is None else np.asarray(gamma, dtype=float).reshape(-1)
        if gamma.shape[0] != e.shape[0]:
            raise ArgumentError(f"gamma has {gamma.shape[0]} entries for {e.shape[0]} units")
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n_units(self):
        return self.e.shape[0]

    @property
    def n_periods(self):
        return self.e.shape[1]


@dataclass(frozen=True)
class FactorPanel:
    """One simulated dataset together with the latent draws that built it."""

    e: np.ndarray
    v: np.ndarray
    f: np.ndarray
    eta: np.ndarray
    eps_v: np.ndarray
    params: UnitParams
    config: SimConfig

    @property
    def gamma(self):
        return self.params.gamma

    @property
    def n_units(self):
        return self.e.shape[0]

    @property
    def n_periods(self):
        return self.e.shape[1]


class Regime(str, Enum):
    INDEPENDENCE = "independence"
    CONDITIONAL_HETEROSKEDASTICITY = "conditional_heteroskedasticity"


@dataclass(frozen=True)
class TheoreticalMoments:
    gamma_pi_gamma: float
    gamma_omega: float
    omega4: float
    omega_v: float
    omega_w: float
    sigma_fv: float
    sigma_v: float
    sigma_w: float
    regime: Regime = Regime.CONDITIONAL_HETEROSKEDASTICITY
    # independence-regime counterparts from the unconditional covariance
    gamma_sigma: float = math.nan
    a_trace: float = math.nan

    @property
    def sigma_w_finite(self):
        """Quadratic variance using ``tr(E^2)/N`` in place of its limit."""
        return self.a_trace * self.omega_w


@dataclass(frozen=True)
class IndependenceDiagnostics:
    cov_matrix: np.ndarray
    gamma_sigma: float
    a_trace: float
    max_eigenvalue: float
    offdiag_norm: float
    near_diagonal: bool = None


def tune_c_omega(tau):
    """Scale making the average idiosyncratic variance exactly one.

    Returns ``sqrt(N / sum((1 + |tau_i|)**2))`` so that
    ``mean((c * (1 + |tau|))**2) == 1``.
    """
    tau = np.asarray(tau, dtype=float).reshape(-1)
    if tau.size == 0:
        raise ArgumentError("tau must contain at least one unit")
    return math.sqrt(tau.size / float(np.sum((1.0 + np.abs(tau)) ** 2)))


def make_unit_params(tau, c_pi, gamma=None):
    tau = np.asarray(tau, dtype=float).reshape(-1)
    n = tau.size
    c_omega = tune_c_omega(tau)
    omega = c_omega * (1.0 + np.abs(tau))
    pi = (c_pi + tau) / math.sqrt(n)
    gamma = np.ones(n) if gamma is None else np.asarray(gamma, dtype=float).reshape(-1)
    return UnitParams(tau=tau, omega=omega, pi=pi, gamma=gamma, c_omega=c_omega)


def simulate_panel(config, rep_index, cell=()):
    """Draw replication ``rep_index`` of the factor panel.

    Parameters
    ----------
    config : SimConfig
    rep_index : int
        Replication counter. Together with ``config.master_seed`` and
        ``cell`` it fully determines the draws, so replications can be
        generated in any order or in parallel.
    cell : tuple of int, optional
        Extra stream key separating the cells of an experiment grid.

    Returns
    -------
    FactorPanel
    """
    if rep_index < 0:
        raise ArgumentError("rep_index must be non-negative")
    n, t = config.n_units, config.n_periods
    tau_rng, f_rng, eta_rng, v_rng = _seeding.substreams(
        config.master_seed, 4, *cell, rep_index, _seeding.PANEL
    )
    if config.freeze_units:
        tau_rng = _seeding.substream(config.master_seed, *cell, _seeding.FROZEN_UNITS)
    tau = tau_rng.standard_normal(n)
    f = f_rng.standard_normal(t)
    eps_eta = eta_rng.standard_normal((n, t))
    eps_v = v_rng.standard_normal(t)

    params = make_unit_params(tau, config.c_pi)
    eta = params.omega[:, None] * eps_eta
    e = params.pi[:, None] * f[None, :] + eta
    v = config.c_fv * f + math.sqrt(1.0 - config.c_fv**2) * eps_v
    for arr in (e, v, f, eta, eps_v):
        arr.setflags(write=False)
    return FactorPanel(e=e, v=v, f=f, eta=eta, eps_v=eps_v, params=params, config=config)


def error_covariance(params):
    """Unconditional cross-sectional covariance ``pi pi' + diag(omega**2)``."""
    return np.outer(params.pi, params.pi) + np.diag(params.omega**2)


def theoretical_targets(params, config):
    """Finite-N moment targets of the linear and quadratic aggregates.

    The unit-level pieces (``Gamma_pi_gamma``, ``Gamma_omega``, ``omega^4``)
    are evaluated on the drawn parameters. The time-series pieces use the
    design closed forms ``Omega_v = 1``, ``Sigma_fv = 1 + 2 c_fv^2`` and
    ``Omega_w = (1 - 1/T) / 2``.
    """
    n, t = config.n_units, config.n_periods
    if params.pi.shape[0] != n:
        raise ArgumentError("params do not match config.n_units")
    gamma = params.gamma
    gamma_pi_gamma = float(np.sum(params.pi * gamma)) / math.sqrt(n)
    gamma_omega = float(np.mean(params.omega**2 * gamma**2))
    omega4 = float(np.mean(params.omega**4))
    omega_v = 1.0
    sigma_fv = 1.0 + 2.0 * config.c_fv**2
    omega_w = (1.0 - 1.0 / t) / 2.0

    # tr(E^2) for E = pi pi' + D without forming E
    pp = float(params.pi @ params.pi)
    w2 = params.omega**2
    trace_sq = pp**2 + 2.0 * float(np.sum(params.pi**2 * w2)) + float(np.sum(w2**2))
    gamma_sigma = (float(params.pi @ gamma) ** 2 + float(np.sum(w2 * gamma**2))) / n

    return TheoreticalMoments(
        gamma_pi_gamma=gamma_pi_gamma,
        gamma_omega=gamma_omega,
        omega4=omega4,
        omega_v=omega_v,
        omega_w=omega_w,
        sigma_fv=sigma_fv,
        sigma_v=gamma_pi_gamma**2 * sigma_fv + gamma_omega * omega_v,
        sigma_w=omega4 * omega_w,
        regime=Regime.CONDITIONAL_HETEROSKEDASTICITY,
        gamma_sigma=gamma_sigma,
        a_trace=trace_sq / n,
    )


def _symmetric_spectrum(matrix):
    # LAPACK symmetric eigensolver (converges far below 1e-10)
    return np.linalg.eigvalsh(matrix)


def independence_diagnostics(cov_matrix, gamma, threshold=None, atol=1e-12):
    """Weak-dependence diagnostics of an error covariance matrix.

    Computes ``gamma' E gamma / N``, ``tr(E^2) / N``, the largest eigenvalue
    of ``E`` and the operator norm of its off-diagonal part. When
    ``threshold`` is given, ``near_diagonal`` reports whether that norm is
    below it.
    """
    cov = np.asarray(cov_matrix, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ArgumentError(f"cov_matrix must be square, got shape {cov.shape}")
    asym = float(np.max(np.abs(cov - cov.T))) if cov.size else 0.0
    if asym > atol * max(1.0, float(np.max(np.abs(cov)))):
        raise ArgumentError(f"cov_matrix is not symmetric (max asymmetry {asym:.3g})")
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    n = cov.shape[0]
    if gamma.shape[0] != n:
        raise ArgumentError(f"gamma has {gamma.shape[0]} entries for an {n}x{n} matrix")

    offdiag = cov - np.diag(np.diag(cov))
    spectrum = _symmetric_spectrum(cov)
    off_spectrum = _symmetric_spectrum(offdiag)
    offdiag_norm = float(np.max(np.abs(off_spectrum)))
    return IndependenceDiagnostics(
        cov_matrix=cov,
        gamma_sigma=float(gamma @ cov @ gamma) / n,
        a_trace=float(np.sum(cov * cov)) / n,
        max_eigenvalue=float(spectrum[-1]),
        offdiag_norm=offdiag_norm,
        near_diagonal=None if threshold is None else offdiag_norm < threshold,
    )


def panel_to_csv(matrix, path):
    """Write an N x T matrix as CSV, one row per unit."""
    np.savetxt(path, np.atleast_2d(matrix), delimiter=",", fmt="%.17g")
