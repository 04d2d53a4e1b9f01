"""Block-ratio test for a jump in the volatility of high-frequency increments.

Squared increments are truncated at ``u_n = sqrt(2 log n / n)``, summed over
adjacent blocks of ``k_n`` increments, and the largest deviation of the ratio
of the two block sums from one is normalized to a statistic with a standard
Gumbel null limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from randcp.errors import DegenerateSeriesError, InvalidInputError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike

DEFAULT_C = 1.5
SCHEMA_VERSION = 1


def truncation_threshold(n: int) -> float:
    """``u_n = sqrt(2 log n) / sqrt(n)``."""
    if not n >= 2:
        raise InvalidInputError(f"n must be >= 2, got {n}")
    return math.sqrt(2.0 * math.log(n)) / math.sqrt(n)


def block_length(n: int, C: float = DEFAULT_C) -> int:
    """``k_n = floor(C sqrt(log n) sqrt(n))``; requires ``2 k_n < n``."""
    if not n >= 2:
        raise InvalidInputError(f"n must be >= 2, got {n}")
    if not C > 0:
        raise InvalidInputError(f"C must be positive, got {C}")
    k_n = math.floor(C * math.sqrt(math.log(n)) * math.sqrt(n))
    if k_n < 1 or 2 * k_n >= n:
        raise InvalidInputError(f"block length k_n={k_n} needs 1 <= k_n and 2 k_n < n={n}")
    return k_n


def m_of(n: int, k_n: int) -> int:
    """Number of disjoint blocks, ``floor(n / k_n)``."""
    if k_n < 1:
        raise InvalidInputError("k_n must be >= 1")
    return n // k_n


def vstar(increments: ArrayLike, k_n: int, u_n: float) -> float:
    """Largest ``|before / after - 1|`` over split points ``i = k_n..n-k_n``.

    ``before`` sums the truncated squared increments ``j = i-k_n+1..i`` and
    ``after`` those with ``j = i+1..i+k_n``. Split points whose ``after``
    sum vanishes are skipped.

    Raises
    ------
    DegenerateSeriesError
        If every split point is skipped.
    """
    x = np.asarray(increments, dtype=float).reshape(-1)
    n = x.size
    if k_n < 1 or n < 2 * k_n:
        raise InvalidInputError(f"need 1 <= k_n and n >= 2 k_n, got n={n}, k_n={k_n}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("increments must be finite")
    sq = np.where(np.abs(x) <= u_n, x * x, 0.0)
    # direct window sums avoid the cancellation of differenced prefix sums
    windows = np.lib.stride_tricks.sliding_window_view(sq, k_n).sum(axis=1)
    before = windows[: n - 2 * k_n + 1]
    after = windows[k_n:]
    ok = after > 0
    if not np.any(ok):
        raise DegenerateSeriesError("every trailing block has a zero truncated sum")
    return float(np.max(np.abs(before[ok] / after[ok] - 1.0)))


def vn_normalized(vstar_value: float, n: int, k_n: int) -> float:
    """Centered and scaled statistic with a standard Gumbel null limit."""
    m_n = m_of(n, k_n)
    if m_n < 3:
        raise InvalidInputError(f"need m_n >= 3 blocks, got m_n={m_n}")
    lm = math.log(m_n)
    return math.sqrt(lm * k_n / 2.0) * vstar_value - 2.0 * lm - 0.5 * math.log(lm) - math.log(3.0)


def gumbel_threshold(alpha: float) -> float:
    """Standard Gumbel ``(1 - alpha)``-quantile, ``-log(-log(1 - alpha))``."""
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    return -math.log(-math.log1p(-alpha))


def nonparam_decision(vn: float, alpha: float) -> bool:
    return bool(vn > gumbel_threshold(alpha))


@dataclass(frozen=True)
class NonparamConfig:
    n: int
    C: float = DEFAULT_C
    alpha: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {self.alpha}")
        block_length(self.n, self.C)

    @property
    def k_n(self) -> int:
        return block_length(self.n, self.C)

    @property
    def u_n(self) -> float:
        return truncation_threshold(self.n)

    @property
    def m_n(self) -> int:
        return m_of(self.n, self.k_n)


@dataclass(frozen=True)
class NonparamReport:
    vstar: float
    vn: float
    k_n: int
    u_n: float
    m_n: int
    reject: bool
    alpha: float
    critical_value: float
    n: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "method": "nonparam",
            "vstar": self.vstar,
            "vn": self.vn,
            "k_n": self.k_n,
            "u_n": self.u_n,
            "m_n": self.m_n,
            "reject": self.reject,
            "alpha": self.alpha,
            "critical_value": self.critical_value,
            "n": self.n,
        }


def nonparam_test(increments: ArrayLike, C: float = DEFAULT_C, alpha: float = 0.05) -> NonparamReport:
    """Run the block-ratio test on a series of increments."""
    x = np.asarray(increments, dtype=float).reshape(-1)
    cfg = NonparamConfig(n=x.size, C=C, alpha=alpha)
    k_n, u_n = cfg.k_n, cfg.u_n
    v = vstar(x, k_n, u_n)
    vn = vn_normalized(v, cfg.n, k_n)
    crit = gumbel_threshold(alpha)
    return NonparamReport(
        vstar=v,
        vn=vn,
        k_n=k_n,
        u_n=u_n,
        m_n=cfg.m_n,
        reject=vn > crit,
        alpha=float(alpha),
        critical_value=crit,
        n=cfg.n,
    )
