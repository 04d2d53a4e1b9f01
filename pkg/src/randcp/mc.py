"""Reproducible Monte Carlo plumbing.

Replicate ``i`` of an experiment with master seed ``s`` always draws from
``np.random.Generator(PCG64(SeedSequence(s, spawn_key=(i,))))``, so results
do not depend on how replicates are distributed over worker processes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable

import numpy as np

from randcp.errors import DegenerateMomentError, DegenerateSeriesError, InvalidInputError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

WORKERS_ENV = "RANDCP_WORKERS"
SUMMARY_QUANTILES = (0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99)


def default_parallelism() -> int:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise InvalidInputError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, value)


@dataclass(frozen=True)
class MonteCarloConfig:
    """Replication count, master seed and a worker-count hint.

    ``parallelism=None`` defers to the ``RANDCP_WORKERS`` environment
    variable (default 1).
    """

    replications: int
    master_seed: int = 0
    parallelism: int | None = None

    def __post_init__(self) -> None:
        if int(self.replications) < 1:
            raise InvalidInputError(f"replications must be >= 1, got {self.replications}")
        if self.parallelism is not None and int(self.parallelism) < 1:
            raise InvalidInputError(f"parallelism must be >= 1, got {self.parallelism}")

    @property
    def workers(self) -> int:
        return default_parallelism() if self.parallelism is None else int(self.parallelism)


def seed_stream(master_seed: int, replicate_index: int) -> np.random.SeedSequence:
    """Seed of one replicate, derived by spawn-key extension of the master seed.

    Distinct indices give distinct spawn keys, so the map is injective by
    construction; the hash inside ``SeedSequence`` is platform independent.
    """
    if replicate_index < 0:
        raise InvalidInputError("replicate_index must be non-negative")
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate_index),))


def replicate_rng(master_seed: int, replicate_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_stream(master_seed, replicate_index)))


@dataclass(frozen=True)
class Skip:
    """Marker for a replicate that hit a degenerate series."""

    reason: str


_SKIPPABLE = (DegenerateSeriesError, DegenerateMomentError)


def _run_range(fn: Callable[..., Any], master_seed: int, start: int, stop: int, args: tuple) -> list:
    out = []
    for i in range(start, stop):
        try:
            out.append(fn(replicate_rng(master_seed, i), *args))
        except _SKIPPABLE as exc:
            out.append(Skip(f"{type(exc).__name__}: {exc}"))
    return out


def map_replicates(fn: Callable[..., Any], mc: MonteCarloConfig, *args: Any) -> list:
    """Evaluate ``fn(rng, *args)`` for every replicate, in replicate order.

    ``fn`` and ``args`` must be picklable when more than one worker is used.
    Replicates raising a degenerate-series/moment error are returned as
    :class:`Skip` markers instead of aborting the run.
    """
    reps = int(mc.replications)
    workers = min(mc.workers, reps)
    if workers <= 1:
        return _run_range(fn, mc.master_seed, 0, reps, args)
    # a few chunks per worker keeps the pool busy when replicate costs vary
    n_chunks = min(reps, 4 * workers)
    bounds = np.linspace(0, reps, n_chunks + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_range, fn, mc.master_seed, int(lo), int(hi), args)
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        results: list = []
        for fut in futures:
            results.extend(fut.result())
    return results


class EmpiricalDist:
    """Sorted sample with quantile, ECDF and Kolmogorov-Smirnov accessors."""

    def __init__(self, samples: ArrayLike) -> None:
        arr = np.sort(np.asarray(samples, dtype=float).reshape(-1))
        if arr.size == 0:
            raise InvalidInputError("empirical distribution needs at least one sample")
        if np.any(np.isnan(arr)):
            raise InvalidInputError("empirical distribution samples must not be NaN")
        arr.setflags(write=False)
        self._samples = arr

    @property
    def samples(self) -> NDArray[np.float64]:
        return self._samples

    @property
    def count(self) -> int:
        return int(self._samples.size)

    def __len__(self) -> int:
        return self.count

    def __repr__(self) -> str:
        return f"EmpiricalDist(count={self.count}, median={self.quantile(0.5):.6g})"

    def quantile(self, p: float) -> float:
        """Lower order statistic at rank ``ceil(p * count)`` (rank 1 for ``p = 0``)."""
        if not 0.0 <= p <= 1.0:
            raise InvalidInputError(f"quantile level must lie in [0, 1], got {p}")
        rank = max(1, math.ceil(p * self.count - 1e-12))
        return float(self._samples[rank - 1])

    def quantiles(self, ps: ArrayLike = SUMMARY_QUANTILES) -> dict[float, float]:
        return {float(p): self.quantile(float(p)) for p in np.atleast_1d(ps)}

    def ecdf(self, x: ArrayLike) -> NDArray[np.float64] | float:
        """Right-continuous ECDF, ``#{samples <= x} / count``."""
        vals = np.searchsorted(self._samples, np.asarray(x, dtype=float), side="right") / self.count
        return float(vals) if np.ndim(vals) == 0 else vals

    def ks_distance(self, other: EmpiricalDist | Callable[[NDArray[np.float64]], ArrayLike]) -> float:
        return ks_distance(self, other)

    def summary(self) -> dict[str, Any]:
        s = self._samples
        return {
            "count": self.count,
            "mean": float(s.mean()),
            "std": float(s.std(ddof=1)) if self.count > 1 else 0.0,
            "min": float(s[0]),
            "max": float(s[-1]),
            "quantiles": {f"{p:g}": v for p, v in self.quantiles().items()},
        }


def empirical_quantile(dist: EmpiricalDist, p: float) -> float:
    return dist.quantile(p)


def ecdf(dist: EmpiricalDist, x: ArrayLike) -> NDArray[np.float64] | float:
    return dist.ecdf(x)


def ks_distance(
    a: EmpiricalDist, b: EmpiricalDist | Callable[[NDArray[np.float64]], ArrayLike]
) -> float:
    """Kolmogorov-Smirnov distance between two samples or a sample and a CDF.

    For two samples the supremum is taken over the pooled sample points,
    where both right-continuous step functions attain every difference. For
    a continuous CDF both one-sided gaps at each sample point are checked.
    """
    xs = a.samples
    if isinstance(b, EmpiricalDist):
        pooled = np.concatenate([xs, b.samples])
        return float(np.max(np.abs(a.ecdf(pooled) - b.ecdf(pooled))))
    cdf = np.asarray(b(xs), dtype=float)
    upper = np.searchsorted(xs, xs, side="right") / a.count
    lower = np.searchsorted(xs, xs, side="left") / a.count
    # left limit of the reference CDF matters only when it has an atom at x
    cdf_left = np.asarray(b(np.nextafter(xs, -np.inf)), dtype=float)
    return float(max(np.max(np.abs(upper - cdf)), np.max(np.abs(lower - cdf_left))))
