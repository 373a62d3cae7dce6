"""Per-unit linear and quadratic statistics, their aggregate and variance.

For unit ``i`` the two components are

    xi_lin_i  = T^{-1/2} sum_s v_s gamma_i e_is
    xi_quad_i = T^{-1}   sum_s sum_{t<s} w_st e_it e_is

and the aggregate is ``Xi = N^{-1/2} sum_i xi_i``. Functions take any object
with ``e`` (N x T), ``v`` (T,) and ``gamma`` (N,) attributes, e.g.
:class:`~factorclt.dgp.PanelData` or :class:`~factorclt.dgp.FactorPanel`.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ArgumentError, DegenerateVarianceError

__all__ = [
    "XiSample",
    "VarianceEstimate",
    "product_weights",
    "cross_product_weights",
    "xi_linear",
    "xi_quadratic_direct",
    "xi_quadratic_factored",
    "aggregate_xi",
    "xi_sample",
    "variance_estimate",
    "prefix_sum",
]

# above this many periods prefix sums switch to compensated accumulation
COMPENSATED_THRESHOLD = 10_000


@dataclass(frozen=True)
class XiSample:
    xi_linear: np.ndarray
    xi_quadratic: np.ndarray
    aggregate: tuple

    @property
    def n_units(self):
        return self.xi_linear.shape[0]

    def stacked(self):
        """N x 2 array of the per-unit vectors."""
        return np.column_stack([self.xi_linear, self.xi_quadratic])


@dataclass(frozen=True)
class VarianceEstimate:
    sigma_hat: np.ndarray
    t_stats: tuple


def product_weights(v):
    """``w_st = v_s v_t`` as a dense T x T array."""
    v = np.asarray(v, dtype=float)
    return np.outer(v, v)


def cross_product_weights(v1, v2):
    """``w_st = v1_s v2_t + v1_t v2_s`` (covariance of two first-step estimates)."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    return np.outer(v1, v2) + np.outer(v2, v1)


def _arrays(panel):
    e = np.atleast_2d(np.asarray(panel.e, dtype=float))
    v = np.asarray(panel.v, dtype=float).reshape(-1)
    gamma = getattr(panel, "gamma", None)
    gamma = np.ones(e.shape[0]) if gamma is None else np.asarray(gamma, dtype=float).reshape(-1)
    return e, v, gamma


def xi_linear(panel):
    e, v, gamma = _arrays(panel)
    t = e.shape[1]
    return gamma * np.sum(e * v[None, :], axis=1) / math.sqrt(t)


def _weight_matrix(w, t):
    if callable(w):
        s_idx, t_idx = np.meshgrid(np.arange(t), np.arange(t), indexing="ij")
        w = np.vectorize(w, otypes=[float])(s_idx, t_idx) if t else np.zeros((0, 0))
    w = np.asarray(w, dtype=float)
    if w.shape != (t, t):
        raise ArgumentError(f"weights must be {t}x{t}, got {w.shape}")
    return w


def xi_quadratic_direct(panel, w=None):
    """Quadratic component by the O(N T^2) double sum over ``t < s``.

    ``w`` is a T x T array read as ``w[s, t]`` for ``t < s`` or a callable
    ``w(s, t)`` (0-based indices). Defaults to product weights of ``v``.
    Diagonal and upper-triangle entries are never used.
    """
    e, v, _ = _arrays(panel)
    t = e.shape[1]
    w = product_weights(v) if w is None else _weight_matrix(w, t)
    lower = np.tril(w, k=-1)
    # sum_s sum_{t<s} e_it w_st e_is
    return np.einsum("it,st,is->i", e, lower, e) / t


def prefix_sum(x, axis=-1):
    """Inclusive running sum; Kahan-compensated for very long series."""
    x = np.asarray(x, dtype=float)
    if x.shape[axis] <= COMPENSATED_THRESHOLD:
        return np.cumsum(x, axis=axis)
    x = np.moveaxis(x, axis, 0)
    out = np.empty_like(x)
    total = np.zeros(x.shape[1:])
    comp = np.zeros(x.shape[1:])
    for k in range(x.shape[0]):
        y = x[k] - comp
        nxt = total + y
        comp = (nxt - total) - y
        total = nxt
        out[k] = total
    return np.moveaxis(out, 0, axis)


def _quadratic_from_products(u):
    # u_is = v_s e_is; sum_s u_is * P_{i,s-1}
    t = u.shape[1]
    if t < 2:
        return np.zeros(u.shape[0])
    running = prefix_sum(u[:, :-1], axis=1)
    return np.sum(u[:, 1:] * running, axis=1) / t


def xi_quadratic_factored(panel):
    """Quadratic component for product weights in O(N T) via prefix sums."""
    e, v, _ = _arrays(panel)
    return _quadratic_from_products(e * v[None, :])


def aggregate_xi(xi_lin, xi_quad):
    xi_lin = np.asarray(xi_lin, dtype=float).reshape(-1)
    xi_quad = np.asarray(xi_quad, dtype=float).reshape(-1)
    if xi_lin.shape != xi_quad.shape:
        raise ArgumentError(
            f"component lengths differ: {xi_lin.shape[0]} vs {xi_quad.shape[0]}"
        )
    if xi_lin.size == 0:
        raise ArgumentError("at least one unit is required")
    root_n = math.sqrt(xi_lin.size)
    aggregate = (float(np.sum(xi_lin)) / root_n, float(np.sum(xi_quad)) / root_n)
    return XiSample(xi_linear=xi_lin, xi_quadratic=xi_quad, aggregate=aggregate)


def xi_sample(panel):
    """Both components through the fast path, aggregated."""
    return aggregate_xi(xi_linear(panel), xi_quadratic_factored(panel))


def variance_estimate(sample, require_both=True):
    """Plug-in covariance ``(1/N) sum xi_i xi_i'`` and component t-statistics.

    Raises :class:`DegenerateVarianceError` when a diagonal entry is zero
    (that component's t-statistic is undefined). With ``require_both=False``
    the undefined t-statistic is returned as NaN instead.
    """
    x = sample.stacked()
    sigma = x.T @ x / x.shape[0]
    t_stats = []
    for k, name in enumerate(("linear", "quadratic")):
        if sigma[k, k] <= 0.0:
            if require_both:
                raise DegenerateVarianceError(
                    f"{name} component has zero estimated variance; t-statistic undefined"
                )
            t_stats.append(math.nan)
        else:
            t_stats.append(sample.aggregate[k] / math.sqrt(sigma[k, k]))
    return VarianceEstimate(sigma_hat=sigma, t_stats=tuple(t_stats))
