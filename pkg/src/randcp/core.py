"""Maximally selected log-likelihood ratio and change-point estimation.

For a split at ``k`` the log-likelihood ratio between the two-segment and the
pooled fit of an exponential family is

    S_n(k) = k H(B_n(k)) + (n - k) H(B*_n(k)) - n H(B_n(n)),

where ``B_n(k)`` and ``B*_n(k)`` are the segment means of the sufficient
statistic. With prefix sums of ``T`` every ``S_n(k)`` costs O(1), so the whole
path is O(n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from randcp.errors import DegenerateMomentError, DegenerateSeriesError, InvalidInputError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from randcp.expfam import ExpFamilyModel
    from randcp.mc import EmpiricalDist, MonteCarloConfig

SCHEMA_VERSION = 1

# outward CI rounding ignores distances to an integer below this
_ROUND_TOL = 1e-9


def k_min(model: ExpFamilyModel) -> int:
    """Smallest admissible segment length, ``m + 1``."""
    return model.m + 1


@dataclass(frozen=True, eq=False)
class PrefixStats:
    """Cumulative sums of ``T(X_i)``.

    ``cum[k]`` is the sum of the first ``k`` sufficient statistics, so
    ``cum[0]`` is zero and ``cum`` has ``n + 1`` rows. ``origin`` is the
    location subtracted from every observation before applying ``T`` (zero
    unless the stats were built with ``center=True``).
    """

    model: ExpFamilyModel
    cum: NDArray[np.float64]
    origin: NDArray[np.float64] = field(repr=False)

    @property
    def n(self) -> int:
        return self.cum.shape[0] - 1

    @property
    def k_range(self) -> tuple[int, int]:
        """Inclusive range ``(k_min, n - k_min)`` of candidate splits.

        Raises
        ------
        InvalidInputError
            If the series is shorter than ``2 k_min``.
        """
        lo = k_min(self.model)
        if self.n < 2 * lo:
            raise InvalidInputError(
                f"series of length {self.n} is too short; need at least {2 * lo} observations"
            )
        return lo, self.n - lo

    def before(self, k: int) -> NDArray[np.float64]:
        """``B_n(k)``, mean of ``T`` over the first ``k`` observations."""
        return self.cum[k] / k

    def after(self, k: int) -> NDArray[np.float64]:
        """``B*_n(k)``, mean of ``T`` over observations ``k+1..n``."""
        return (self.cum[self.n] - self.cum[k]) / (self.n - k)

    def pooled(self) -> NDArray[np.float64]:
        return self.cum[self.n] / self.n


def prefix_stats(data: ArrayLike, model: ExpFamilyModel, *, center: bool = False) -> PrefixStats:
    """Build :class:`PrefixStats` for a series.

    With ``center=True`` the sample mean is subtracted first. All supported
    models are translation invariant, so ``S_n`` is unchanged while the
    ``x**2`` component of ``normal-meanvar`` loses its cancellation error
    for series far from the origin. Any non-empty series is accepted; the
    length check happens when splits are evaluated.
    """
    obs = model.as_observations(data)
    n = obs.shape[0]
    if n < 1:
        raise InvalidInputError("series is empty")
    origin = obs.mean(axis=0) if center else np.zeros(model.m)
    t = model.suff_stat(obs - origin)
    cum = np.zeros((n + 1, model.d))
    np.cumsum(t, axis=0, out=cum[1:])
    cum.setflags(write=False)
    return PrefixStats(model=model, cum=cum, origin=origin)


def sn_path(ps: PrefixStats) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """``S_n(k)`` for every ``k`` in ``[k_min, n - k_min]``.

    Splits with a degenerate segment are skipped and come back as NaN.
    Values within rounding error of zero are reported as exactly zero.
    """
    lo, hi = ps.k_range
    n = ps.n
    ks = np.arange(lo, hi + 1)
    kf = ks.astype(float)[:, None]
    total = ps.cum[n]
    before = ps.cum[lo : hi + 1] / kf
    after = (total - ps.cum[lo : hi + 1]) / (n - kf)
    model = ps.model
    pooled = total / n
    h_pool = float(model.h_values(pooled))
    if not np.isfinite(h_pool):
        return ks, np.full(ks.shape, np.nan)
    t1 = ks * model.h_values(before)
    t2 = (n - ks) * model.h_values(after)
    t3 = n * h_pool
    s = t1 + t2 - t3
    noise = 16.0 * np.finfo(float).eps * (np.abs(t1) + np.abs(t2) + abs(t3))
    s = np.where(np.abs(s) <= noise, 0.0, s)
    return ks, s


def sn_at(ps: PrefixStats, k: int) -> float:
    """``S_n(k)`` for a single split; NaN marks a skipped (degenerate) split."""
    lo, hi = ps.k_range
    if not lo <= k <= hi:
        raise InvalidInputError(f"k={k} outside the admissible range [{lo}, {hi}]")
    model = ps.model
    n = ps.n
    vals = model.h_values(np.stack([ps.before(k), ps.after(k), ps.pooled()]))
    if not np.all(np.isfinite(vals)):
        return math.nan
    terms = np.array([k * vals[0], (n - k) * vals[1], -n * vals[2]])
    s = float(terms.sum())
    if abs(s) <= 16.0 * np.finfo(float).eps * float(np.abs(terms).sum()):
        return 0.0
    return s


def max_statistic(ps: PrefixStats) -> tuple[float, int]:
    """Return ``(max_k 2 S_n(k), smallest maximizing k)``.

    Raises
    ------
    DegenerateSeriesError
        If every candidate split is degenerate.
    """
    ks, s = sn_path(ps)
    if not np.any(np.isfinite(s)):
        raise DegenerateSeriesError("every candidate split has a degenerate segment")
    idx = int(np.nanargmax(s))
    return max(0.0, 2.0 * float(s[idx])), int(ks[idx])


def size_of_change(ps: PrefixStats, k_hat: int) -> float:
    """Quadratic-form estimate of the size of the change at ``k_hat``.

    Computes ``(B_n(k) - B*_n(k))^T H''(B_n(n)) (B_n(k) - B*_n(k))``.
    """
    lo, hi = ps.k_range
    if not lo <= k_hat <= hi:
        raise InvalidInputError(f"k_hat={k_hat} outside the admissible range [{lo}, {hi}]")
    try:
        hess = ps.model.h_hess(ps.pooled())
    except DegenerateMomentError as exc:
        raise DegenerateSeriesError(f"pooled moment point is degenerate: {exc}") from exc
    diff = ps.before(k_hat) - ps.after(k_hat)
    return max(0.0, float(diff @ hess @ diff))


def _floor(x: float) -> int:
    r = round(x)
    return int(r) if abs(x - r) <= _ROUND_TOL else math.floor(x)


def _ceil(x: float) -> int:
    r = round(x)
    return int(r) if abs(x - r) <= _ROUND_TOL else math.ceil(x)


def confidence_interval(
    k_hat: int,
    delta_hat_sq: float,
    xi_quantiles: tuple[float, float],
    n: int | None = None,
) -> tuple[int, int]:
    """Interval for the change location from quantiles of ``argmax W_hat``.

    Inverts ``delta_hat_sq * (k_hat - k*) ~ xi``: with ``xi_quantiles =
    (q_low, q_high)`` the interval is ``[k_hat - q_high / delta_hat_sq,
    k_hat - q_low / delta_hat_sq]``, rounded outward and clipped to
    ``[1, n - 1]`` when ``n`` is given.
    """
    if not delta_hat_sq > 0 or not math.isfinite(delta_hat_sq):
        raise InvalidInputError(f"delta_hat_sq must be positive and finite, got {delta_hat_sq!r}")
    q_low, q_high = (float(q) for q in xi_quantiles)
    if q_low > q_high:
        raise InvalidInputError("xi_quantiles must be ordered (q_low, q_high)")
    low = _floor(k_hat - q_high / delta_hat_sq)
    high = _ceil(k_hat - q_low / delta_hat_sq)
    if n is not None:
        low, high = max(low, 1), min(high, n - 1)
    return low, high


def xi_quantile_pair(xi: EmpiricalDist, alpha: float) -> tuple[float, float]:
    """Equal-tailed ``(alpha/2, 1 - alpha/2)`` quantiles of an argmax sample."""
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    return xi.quantile(alpha / 2.0), xi.quantile(1.0 - alpha / 2.0)


@dataclass(frozen=True)
class DetectionReport:
    stat: float
    stat_root: float
    k_hat: int
    lambda_hat: float
    delta_hat_sq: float
    reject: bool
    alpha: float
    critical_value: float
    n: int
    model: str
    method: str
    ci: tuple[int, int] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "stat": self.stat,
            "stat_root": self.stat_root,
            "k_hat": self.k_hat,
            "lambda_hat": self.lambda_hat,
            "delta_hat_sq": self.delta_hat_sq,
            "reject": self.reject,
            "alpha": self.alpha,
            "critical_value": self.critical_value,
            "ci_low": None if self.ci is None else self.ci[0],
            "ci_high": None if self.ci is None else self.ci[1],
            "n": self.n,
            "model": self.model,
            "method": self.method,
        }


def resolve_critical_value(
    source: str | float,
    alpha: float,
    d: int,
    n: int,
    mc: MonteCarloConfig | None = None,
) -> tuple[float, str]:
    """Critical value for ``S_n^{1/2}`` and a label for the method used."""
    from randcp import asymptotics

    if isinstance(source, str):
        if source == "gumbel":
            return asymptotics.gumbel_critical_value(alpha, d, n), "gumbel"
        if source == "bridge":
            from randcp.mc import MonteCarloConfig

            mc = mc or MonteCarloConfig(replications=2000)
            return asymptotics.sup_bridge_critical_value(alpha, d, n, mc), "bridge"
        raise InvalidInputError(f"unknown critical-value source {source!r}; use 'gumbel', 'bridge' or a number")
    value = float(source)
    if not value >= 0:
        raise InvalidInputError("an explicit critical value must be non-negative")
    return value, "fixed"


def detect(
    data: ArrayLike,
    model: ExpFamilyModel,
    alpha: float = 0.05,
    critical_value: str | float = "gumbel",
    *,
    xi: EmpiricalDist | None = None,
    mc: MonteCarloConfig | None = None,
) -> DetectionReport:
    """Test for one change and locate it.

    Parameters
    ----------
    data : array_like
        Observations, shape ``(n,)`` or ``(n, m)``.
    model : ExpFamilyModel
    alpha : float
        Significance level.
    critical_value : {"gumbel", "bridge"} or float
        Source of the critical value for ``S_n^{1/2}``. ``"bridge"`` runs a
        Monte Carlo configured by ``mc``.
    xi : EmpiricalDist, optional
        Sample of ``argmax W_hat``. When given and the size-of-change
        estimate is positive, the report carries a ``1 - alpha`` interval.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    ps = prefix_stats(data, model, center=True)
    stat, k_hat = max_statistic(ps)
    stat_root = math.sqrt(stat)
    kappa, method = resolve_critical_value(critical_value, alpha, model.d, ps.n, mc)
    delta_hat_sq = size_of_change(ps, k_hat)
    ci = None
    if xi is not None and delta_hat_sq > 0:
        ci = confidence_interval(k_hat, delta_hat_sq, xi_quantile_pair(xi, alpha), ps.n)
    return DetectionReport(
        stat=stat,
        stat_root=stat_root,
        k_hat=k_hat,
        lambda_hat=k_hat / ps.n,
        delta_hat_sq=delta_hat_sq,
        reject=bool(stat_root > kappa),
        alpha=float(alpha),
        critical_value=float(kappa),
        n=ps.n,
        model=model.kind,
        method=method,
        ci=ci,
    )
