"""Synthetic series with one change at a random, possibly data-driven, location.

Two generators are provided:

* :func:`gen_amoc_normal` draws normal observations whose mean and standard
  deviation switch after ``k*``. Means are given on the physical scale and
  applied as ``mu / sqrt(n)``. The location ``k*`` is either the first time
  the scaled partial-sum path drops below a barrier, or is drawn
  independently of the noise.
* :func:`gen_ito_path` discretizes a drifted diffusion with seasonal
  stochastic volatility and adds a jump to the volatility at ``k*``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from randcp.errors import InvalidInputError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

_INT_TOL = 1e-9


class LocationLaw(str, enum.Enum):
    STOPPING_TIME = "stopping-time"
    UNIFORM = "uniform"
    TRUNCNORM = "truncnorm"


def location_bounds(n: int, gamma: float) -> tuple[int, int]:
    """Inclusive range ``(ceil(gamma n), floor((1 - gamma) n))`` of ``k*``."""
    lo = math.ceil(gamma * n - _INT_TOL)
    hi = math.floor((1.0 - gamma) * n + _INT_TOL)
    return lo, hi


def _check_common(n: int, gamma: float) -> None:
    if int(n) < 2:
        raise InvalidInputError(f"n must be >= 2, got {n}")
    if not 0.0 < gamma < 0.5:
        raise InvalidInputError(f"gamma must lie in (0, 0.5), got {gamma}")
    lo, hi = location_bounds(n, gamma)
    if lo > hi or lo < 1 or hi > n - 1:
        raise InvalidInputError(f"n={n} is too small for gamma={gamma}")


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class SimConfig:
    """Parameters of the normal one-change generator."""

    n: int
    mu1: float = -2.0
    mu2: float = -2.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    gamma: float = 0.1
    location_law: LocationLaw = LocationLaw.STOPPING_TIME
    kappa: float = -1.0
    ar_coeff: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        _check_common(self.n, self.gamma)
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise InvalidInputError("sigma1 and sigma2 must be positive")
        if not -1.0 < self.ar_coeff < 1.0:
            raise InvalidInputError(f"ar_coeff must lie in (-1, 1), got {self.ar_coeff}")
        object.__setattr__(self, "location_law", LocationLaw(self.location_law))

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["location_law"] = self.location_law.value
        return out


@dataclass(frozen=True, eq=False)
class SimOutput:
    data: NDArray[np.float64]
    k_star: int
    partial_sums: NDArray[np.float64]

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    @property
    def lambda_star(self) -> float:
        return self.k_star / self.n


def scaled_partial_sums(data: ArrayLike) -> NDArray[np.float64]:
    """``n**-0.5`` times the running sum, with a leading zero (length ``n + 1``)."""
    x = np.asarray(data, dtype=float).reshape(-1)
    out = np.zeros(x.size + 1)
    np.cumsum(x, out=out[1:])
    return out / math.sqrt(x.size)


def stopping_time_location(partial_sums: ArrayLike, gamma: float, kappa: float) -> int:
    """First ``k >= ceil(gamma n)`` with ``partial_sums[k] < kappa``, capped at ``floor((1-gamma) n)``."""
    ps = np.asarray(partial_sums, dtype=float).reshape(-1)
    n = ps.size - 1
    _check_common(n, gamma)
    lo, hi = location_bounds(n, gamma)
    hits = np.flatnonzero(ps[lo : hi + 1] < kappa)
    return lo + int(hits[0]) if hits.size else hi


def uniform_location(gamma: float, n: int, rng: np.random.Generator) -> int:
    _check_common(n, gamma)
    lo, hi = location_bounds(n, gamma)
    return int(rng.integers(lo, hi + 1))


def truncnorm_scale(gamma: float) -> float:
    """Standard deviation of the normal before truncation, ``1/6 - gamma/3``."""
    return 1.0 / 6.0 - gamma / 3.0


def truncnorm_location(gamma: float, n: int, rng: np.random.Generator) -> int:
    """``k* = round(n lambda*)`` with ``lambda*`` a normal(1/2, scale) truncated to ``[gamma, 1 - gamma]``."""
    _check_common(n, gamma)
    lo, hi = location_bounds(n, gamma)
    sd = truncnorm_scale(gamma)
    while True:
        lam = 0.5 + sd * rng.standard_normal()
        if gamma <= lam <= 1.0 - gamma:
            break
    return min(max(int(math.floor(n * lam + 0.5)), lo), hi)


def ar_transform(data: ArrayLike, a: float) -> NDArray[np.float64]:
    """``y'[0] = y[0]`` and ``y'[k] = a y[k-1] + sqrt(1 - a**2) y[k]`` afterwards."""
    if not -1.0 < a < 1.0:
        raise InvalidInputError(f"AR coefficient must lie in (-1, 1), got {a}")
    y = np.asarray(data, dtype=float).reshape(-1)
    if a == 0.0:
        return y.copy()
    out = np.empty_like(y)
    out[0] = y[0]
    out[1:] = a * y[:-1] + math.sqrt(1.0 - a * a) * y[1:]
    return out


def gen_amoc_normal(cfg: SimConfig, rng: np.random.Generator | None = None) -> SimOutput:
    """Draw one series from ``cfg``.

    Under the stopping-time law a full pre-change path is drawn first and
    ``k*`` is read off its (dependence-transformed) partial sums. Entries
    after ``k*`` are then replaced with fresh post-change draws, so the
    observations up to ``k*`` and hence ``k*`` itself do not depend on the
    tail. Other laws draw ``k*`` before any noise.
    """
    rng = make_rng(cfg.seed) if rng is None else rng
    n = cfg.n
    scale = 1.0 / math.sqrt(n)
    if cfg.location_law is LocationLaw.STOPPING_TIME:
        raw = cfg.mu1 * scale + cfg.sigma1 * rng.standard_normal(n)
        k_star = stopping_time_location(
            scaled_partial_sums(ar_transform(raw, cfg.ar_coeff)), cfg.gamma, cfg.kappa
        )
    else:
        if cfg.location_law is LocationLaw.UNIFORM:
            k_star = uniform_location(cfg.gamma, n, rng)
        else:
            k_star = truncnorm_location(cfg.gamma, n, rng)
        raw = np.empty(n)
        raw[:k_star] = cfg.mu1 * scale + cfg.sigma1 * rng.standard_normal(k_star)
    raw[k_star:] = cfg.mu2 * scale + cfg.sigma2 * rng.standard_normal(n - k_star)
    data = ar_transform(raw, cfg.ar_coeff)
    data.setflags(write=False)
    return SimOutput(data=data, k_star=int(k_star), partial_sums=scaled_partial_sums(data))


# -- Ito semimartingale with a volatility jump -----------------------------------


def seasonality(t: ArrayLike) -> NDArray[np.float64] | float:
    """``v(t) = 1 - 0.2 sin(3 pi t / 4)``."""
    val = 1.0 - 0.2 * np.sin(0.75 * np.pi * np.asarray(t, dtype=float))
    return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class ItoConfig:
    """Parameters of the stochastic-volatility generator on ``[0, 1]``."""

    n: int
    drift: float = -2.0
    c: float = 0.1
    rho: float = 0.5
    jump_size: float = 0.3
    gamma: float = 0.1
    location_law: LocationLaw = LocationLaw.STOPPING_TIME
    kappa: float = -1.0
    seed: int = 0

    def __post_init__(self) -> None:
        _check_common(self.n, self.gamma)
        if not -1.0 <= self.rho <= 1.0:
            raise InvalidInputError(f"rho must lie in [-1, 1], got {self.rho}")
        object.__setattr__(self, "location_law", LocationLaw(self.location_law))

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["location_law"] = self.location_law.value
        return out


@dataclass(frozen=True, eq=False)
class ItoPath:
    """Increments ``X(t_k) - X(t_{k-1})``, volatility on the grid and the jump index.

    ``sigma_path[j]`` is the volatility at ``t_j = j / n`` for ``j = 0..n``
    and already includes the jump for ``j >= k_star``.
    """

    increments: NDArray[np.float64]
    sigma_path: NDArray[np.float64]
    k_star: int

    @property
    def path(self) -> NDArray[np.float64]:
        out = np.zeros(self.increments.size + 1)
        np.cumsum(self.increments, out=out[1:])
        return out


def gen_ito_path(cfg: ItoConfig, rng: np.random.Generator | None = None) -> ItoPath:
    """Euler scheme with step ``1/n`` and a volatility jump at ``k*``.

    The jump is added to ``sigma`` from grid index ``k*`` on, so it first
    moves the increment ending at ``t_{k*+1}``. The Brownian increments are
    shared between the pre-jump path used to find ``k*`` and the final path.
    """
    rng = make_rng(cfg.seed) if rng is None else rng
    n = cfg.n
    sd = 1.0 / math.sqrt(n)
    dw = sd * rng.standard_normal(n)
    dw_perp = sd * rng.standard_normal(n)
    factor = np.ones(n + 1)
    np.cumsum(
        cfg.c * (cfg.rho * dw + math.sqrt(1.0 - cfg.rho**2) * dw_perp), out=factor[1:]
    )
    factor[1:] += 1.0
    sigma = factor * seasonality(np.arange(n + 1) / n)
    drift = cfg.drift / n
    if cfg.location_law is LocationLaw.STOPPING_TIME:
        pre = np.zeros(n + 1)
        np.cumsum(drift + sigma[:-1] * dw, out=pre[1:])
        k_star = stopping_time_location(pre, cfg.gamma, cfg.kappa)
    elif cfg.location_law is LocationLaw.UNIFORM:
        k_star = uniform_location(cfg.gamma, n, rng)
    else:
        k_star = truncnorm_location(cfg.gamma, n, rng)
    sigma[k_star:] += cfg.jump_size
    sigma.setflags(write=False)
    increments = drift + sigma[:-1] * dw
    increments.setflags(write=False)
    return ItoPath(increments=increments, sigma_path=sigma, k_star=int(k_star))
