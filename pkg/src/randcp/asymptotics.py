"""Null critical values, the argmax law used for intervals, and limit-theory oracles.

The Gumbel approximation for the square root of the maximal statistic uses
the normings

    a(x) = sqrt(2 log x),
    b_d(x) = 2 log x + (d/2) log log x - log Gamma(d/2),

evaluated at ``x = log n``. The oracles further down (``mu_n``,
``zn_value``, ``limit_covariance``, ``mixed_fourth_moment``) need the true
pre/post parameters and exist to validate the asymptotic theory against
simulation; they are not used by :func:`randcp.core.detect`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.special import gammaln

from randcp.errors import InvalidInputError
from randcp.mc import EmpiricalDist, MonteCarloConfig, map_replicates

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from randcp.expfam import ExpFamilyModel

MIN_NORMING_N = 16
MIN_SAMPLER_REPLICATIONS = 1000

# argmax sampler defaults: half-width of the window and grid step
WHAT_T = 200.0
WHAT_H = 0.01
WHAT_DRIFT = 0.5


# -- Gumbel norming ---------------------------------------------------------


def a_norm(x: float) -> float:
    """``a(x) = sqrt(2 log x)`` for ``x > 1``."""
    if not x > 1.0:
        raise InvalidInputError(f"a(x) needs x > 1, got {x!r}")
    return math.sqrt(2.0 * math.log(x))


def b_norm(x: float, d: int) -> float:
    """``b_d(x) = 2 log x + (d/2) log log x - log Gamma(d/2)`` for ``x > 1``."""
    if int(d) < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {d}")
    if not x > 1.0:
        raise InvalidInputError(f"b_d(x) needs x > 1, got {x!r}")
    lx = math.log(x)
    return 2.0 * lx + 0.5 * d * math.log(lx) - float(gammaln(0.5 * d))


@dataclass(frozen=True)
class GumbelNorming:
    a_val: float
    b_val: float
    d: int
    n: int


def gumbel_norming(d: int, n: int) -> GumbelNorming:
    """Normings ``a(log n)`` and ``b_d(log n)``; requires ``n >= 16``."""
    if int(n) < MIN_NORMING_N:
        raise InvalidInputError(f"Gumbel norming needs n >= {MIN_NORMING_N}, got {n}")
    if int(d) < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {d}")
    x = math.log(n)
    return GumbelNorming(a_val=a_norm(x), b_val=b_norm(x, d), d=int(d), n=int(n))


def gumbel_t_alpha(alpha: float) -> float:
    """Solution of ``exp(-2 exp(-t)) = 1 - alpha``."""
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    return -math.log(-0.5 * math.log1p(-alpha))


def gumbel_critical_value(alpha: float, d: int, n: int) -> float:
    """Asymptotic level-``alpha`` critical value for the root statistic.

    Examples
    --------
    >>> round(gumbel_critical_value(0.05, 2, 10_000), 4)
    4.2242
    """
    g = gumbel_norming(d, n)
    return (gumbel_t_alpha(alpha) + g.b_val) / g.a_val


def gumbel_pvalue(stat_root: float, d: int, n: int) -> float:
    """Asymptotic p-value of an observed root statistic, clamped to ``[0, 1]``."""
    if not stat_root >= 0:
        raise InvalidInputError(f"stat_root must be non-negative, got {stat_root!r}")
    g = gumbel_norming(d, n)
    t = g.a_val * stat_root - g.b_val
    # -expm1 keeps precision where the p-value is tiny
    p = -math.expm1(-2.0 * math.exp(-t)) if t > -700 else 1.0
    return min(1.0, max(0.0, p))


# -- Brownian-bridge supremum -----------------------------------------------


def _check_sampler_mc(mc: MonteCarloConfig) -> None:
    if mc.replications < MIN_SAMPLER_REPLICATIONS:
        raise InvalidInputError(
            f"sampler needs at least {MIN_SAMPLER_REPLICATIONS} replications, got {mc.replications}"
        )


def _bridge_sup_replicate(rng: np.random.Generator, d: int, n: int) -> float:
    s = np.cumsum(rng.standard_normal((n, d)), axis=0)
    t = np.arange(1, n, dtype=float) / n
    bridge = (s[:-1] - t[:, None] * s[-1]) / math.sqrt(n)
    return float(np.max(np.sum(bridge * bridge, axis=1) / (t * (1.0 - t))))


def sup_bridge_samples(d: int, n: int, mc: MonteCarloConfig) -> EmpiricalDist:
    """Samples of ``sup_t sum_i B_i(t)**2 / (t (1 - t))`` over ``t = k/n``, ``1 <= k < n``.

    Each bridge is built from a Gaussian random walk of ``n`` steps, which is
    the natural resolution of the discrete statistic.
    """
    if int(d) < 1 or int(n) < 2:
        raise InvalidInputError("need d >= 1 and n >= 2")
    _check_sampler_mc(mc)
    return EmpiricalDist(map_replicates(_bridge_sup_replicate, mc, int(d), int(n)))


def sup_bridge_critical_value(alpha: float, d: int, n: int, mc: MonteCarloConfig) -> float:
    """Monte Carlo ``(1 - alpha)``-quantile of the bridge supremum on the root scale."""
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    return math.sqrt(sup_bridge_samples(d, n, mc).quantile(1.0 - alpha))


# -- argmax of the two-sided drifted Brownian motion --------------------------


def _what_replicate(rng: np.random.Generator, steps: int, h: float, drift: float) -> float:
    noise = rng.standard_normal((2, steps))
    paths = np.cumsum(noise, axis=1) * math.sqrt(h) - drift * h * np.arange(1, steps + 1)
    # first occurrence gives the smallest |u| on each side
    j_left = int(np.argmax(paths[0]))
    j_right = int(np.argmax(paths[1]))
    v_left, v_right = paths[0, j_left], paths[1, j_right]
    best = max(v_left, v_right)
    if best <= 0.0:
        return 0.0
    if v_left > v_right or (v_left == v_right and j_left < j_right):
        return -(j_left + 1) * h
    return (j_right + 1) * h


def sample_argmax_what(
    mc: MonteCarloConfig,
    T: float = WHAT_T,
    h: float = WHAT_H,
    drift: float = WHAT_DRIFT,
) -> EmpiricalDist:
    """Samples of the argmax of ``W(u) - drift |u|`` on ``[-T, T]``.

    ``W`` is two-sided with independent Brownian motions on each half line,
    discretized on a grid of step ``h``. Ties go to the smallest ``|u|``.
    """
    _check_sampler_mc(mc)
    return argmax_what_draws(mc, T, h, drift)


def argmax_what_draws(
    mc: MonteCarloConfig,
    T: float = WHAT_T,
    h: float = WHAT_H,
    drift: float = WHAT_DRIFT,
) -> EmpiricalDist:
    """Same draws as :func:`sample_argmax_what` without the minimum-size check.

    Meant for plumbing (file manifests, smoke runs); quantiles from fewer
    than a thousand draws are not reliable.
    """
    if not (T > 0 and h > 0 and drift > 0):
        raise InvalidInputError("T, h and drift must be positive")
    steps = int(round(T / h))
    if steps < 1:
        raise InvalidInputError("T / h must be at least 1")
    return EmpiricalDist(map_replicates(_what_replicate, mc, steps, float(h), float(drift)))


# -- alternative parameters and limit-theory oracles --------------------------


@dataclass(frozen=True, eq=False)
class AlternativeParams:
    """Pre/post parameters of a single change, in both parametrizations.

    ``tau_A`` is the moment point where ``H''`` is evaluated for
    ``sigma_a_sq``; it defaults to the midpoint of ``tau1`` and ``tau2``.
    """

    theta1: NDArray[np.float64]
    theta2: NDArray[np.float64]
    tau1: NDArray[np.float64]
    tau2: NDArray[np.float64]
    sigma1_mat: NDArray[np.float64]
    sigma2_mat: NDArray[np.float64]
    delta_sq: float
    Delta_sq: float
    tau_A: NDArray[np.float64]
    sigma_a_sq: float


def alternative_params(
    model: ExpFamilyModel,
    theta1: ArrayLike,
    theta2: ArrayLike,
    tau_a: ArrayLike | None = None,
) -> AlternativeParams:
    """Build :class:`AlternativeParams` from two natural parameters."""
    th1 = np.asarray(theta1, dtype=float).reshape(-1)
    th2 = np.asarray(theta2, dtype=float).reshape(-1)
    tau1, tau2 = model.a_grad(th1), model.a_grad(th2)
    tau_A = 0.5 * (tau1 + tau2) if tau_a is None else np.asarray(tau_a, dtype=float).reshape(-1)
    diff = tau1 - tau2
    delta_sq = float(diff @ diff)
    partial = AlternativeParams(
        theta1=th1,
        theta2=th2,
        tau1=tau1,
        tau2=tau2,
        sigma1_mat=model.a_hess(th1),
        sigma2_mat=model.a_hess(th2),
        delta_sq=delta_sq,
        Delta_sq=float((th1 - th2) @ (th1 - th2)),
        tau_A=tau_A,
        sigma_a_sq=math.nan,
    )
    s2 = sigma_a_sq(partial, model) if delta_sq > 0 else math.nan
    return AlternativeParams(**{**partial.__dict__, "sigma_a_sq": s2})


def alternative_from_moments(
    model: ExpFamilyModel,
    mean1: ArrayLike,
    mean2: ArrayLike,
    var1: ArrayLike | None = None,
    var2: ArrayLike | None = None,
) -> AlternativeParams:
    """:func:`alternative_params` for normal laws given by mean and variance."""
    return alternative_params(
        model,
        model.nat_param_from_moments(mean1, var1),
        model.nat_param_from_moments(mean2, var2),
    )


def sigma_a_sq(ap: AlternativeParams, model: ExpFamilyModel) -> float:
    """Rayleigh quotient of ``H''(tau_A)`` in the direction ``tau1 - tau2``."""
    diff = np.asarray(ap.tau1, dtype=float) - np.asarray(ap.tau2, dtype=float)
    dd = float(diff @ diff)
    if not dd > 0:
        raise InvalidInputError("sigma_A^2 is undefined without a change (delta^2 = 0)")
    return float(diff @ model.h_hess(ap.tau_A) @ diff) / dd


def limit_covariance(
    t: float, lam: float, t2: float, lam2: float, sigma_a_sq: float = 1.0
) -> float:
    """Covariance of the Gaussian limit of the rescaled ``Z_n`` process."""
    for v in (t, lam, t2, lam2):
        if not 0.0 <= v <= 1.0:
            raise InvalidInputError(f"arguments must lie in [0, 1], got {v!r}")
    if t <= lam and t2 <= lam2:
        pref = (1.0 - lam) * (1.0 - lam2)
        val = 0.0 if pref == 0.0 else pref * min(t / (1.0 - t), t2 / (1.0 - t2))
    elif t <= lam:
        pref = (1.0 - lam) * lam2
        val = 0.0 if pref == 0.0 else pref * min(t * (1.0 - t2) / ((1.0 - t) * t2), 1.0)
    elif t2 <= lam2:
        pref = lam * (1.0 - lam2)
        val = 0.0 if pref == 0.0 else pref * min((1.0 - t) * t2 / (t * (1.0 - t2)), 1.0)
    else:
        val = lam * lam2 * min((1.0 - t) / t, (1.0 - t2) / t2)
    return sigma_a_sq * val


def _check_pair(k: int, k_star: int, n: int) -> None:
    if not (1 <= k <= n - 1 and 1 <= k_star <= n - 1):
        raise InvalidInputError(f"need 1 <= k, k* <= n - 1, got k={k}, k*={k_star}, n={n}")


def _mix(x: float, ap: AlternativeParams) -> NDArray[np.float64]:
    return x * ap.tau1 + (1.0 - x) * ap.tau2


def mu_n(k: int, k_star: int, n: int, ap: AlternativeParams, model: ExpFamilyModel) -> float:
    """Expected value of ``S_n(k)`` when the change sits at ``k_star``."""
    _check_pair(k, k_star, n)
    pooled = n * model.h_value(_mix(k_star / n, ap))
    if k <= k_star:
        return k * model.h_value(ap.tau1) + (n - k) * model.h_value(_mix((k_star - k) / (n - k), ap)) - pooled
    return k * model.h_value(_mix(k_star / k, ap)) + (n - k) * model.h_value(ap.tau2) - pooled


def centered_prefix(t_values: ArrayLike, tau: ArrayLike) -> NDArray[np.float64]:
    """Prefix sums of ``T(X_i) - tau`` with a leading zero row, shape ``(n + 1, d)``."""
    t = np.asarray(t_values, dtype=float)
    if t.ndim == 1:
        t = t[:, None]
    out = np.zeros((t.shape[0] + 1, t.shape[1]))
    np.cumsum(t - np.asarray(tau, dtype=float).reshape(1, -1), axis=0, out=out[1:])
    return out


def zn_value(
    c1: NDArray[np.float64],
    c2: NDArray[np.float64],
    k: int,
    k_star: int,
    ap: AlternativeParams,
    model: ExpFamilyModel,
) -> float:
    """First-order Taylor term of ``S_n(k) - mu_n(k, k*)``.

    ``c1`` and ``c2`` come from :func:`centered_prefix` applied to the full
    pre-change and post-change streams; the observed series uses the first
    stream up to ``k_star`` and the second one afterwards.
    """
    n = c1.shape[0] - 1
    if c2.shape != c1.shape:
        raise InvalidInputError("prefix arrays must have the same shape")
    if not (1 <= k <= n and 1 <= k_star <= n - 1):
        raise InvalidInputError(f"need 1 <= k <= n and 1 <= k* <= n - 1, got k={k}, k*={k_star}")

    def h(x: float) -> NDArray[np.float64]:
        return model.h_grad(_mix(x, ap))

    whole = c1[k_star] + c2[n] - c2[k_star]
    if k <= k_star:
        mid = c1[k_star] - c1[k] + c2[n] - c2[k_star]
        z = h(1.0) @ c1[k] + h((k_star - k) / (n - k)) @ mid - h(k_star / n) @ whole
    else:
        head = c1[k_star] + c2[k] - c2[k_star]
        z = h(k_star / k) @ head + h(0.0) @ (c2[n] - c2[k]) - h(k_star / n) @ whole
    return float(z)


def _overlap(a: Sequence[float], b: Sequence[float]) -> float:
    return max(min(a[1], b[1]) - max(a[0], b[0]), 0.0)


def mixed_fourth_moment(intervals: Sequence[Sequence[float]]) -> float:
    """Limit of ``E[prod_i (W(beta_i) - W(alpha_i))]`` over four increments.

    Sum over the three pairings of products of interval overlaps.
    """
    iv = [tuple(float(x) for x in p) for p in intervals]
    if len(iv) != 4 or any(len(p) != 2 for p in iv):
        raise InvalidInputError("need exactly four (alpha, beta) pairs")
    for a, b in iv:
        if not 0.0 <= a <= b <= 1.0:
            raise InvalidInputError(f"interval ({a}, {b}) must satisfy 0 <= alpha <= beta <= 1")
    o = _overlap
    return (
        o(iv[0], iv[1]) * o(iv[2], iv[3])
        + o(iv[0], iv[2]) * o(iv[1], iv[3])
        + o(iv[0], iv[3]) * o(iv[1], iv[2])
    )

