"""Minimal, byte-reproducible SVG renders of histograms and sample paths."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

_RC = {"svg.hashsalt": "randcp", "svg.fonttype": "none", "path.simplify": False}
_METADATA = {"Date": None, "Creator": None}


def histogram_edges(samples: Mapping[str, ArrayLike], bins: int = 50) -> NDArray[np.float64]:
    """Common bin edges for several samples, so histograms overlay cleanly."""
    pooled = np.concatenate([np.asarray(v, dtype=float).reshape(-1) for v in samples.values()])
    return np.histogram_bin_edges(pooled, bins=bins)


def write_histogram_svg(
    path: str | Path,
    samples: Mapping[str, ArrayLike],
    edges: ArrayLike,
    *,
    title: str = "",
    xlabel: str = "",
) -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for label, values in samples.items():
            ax.hist(np.asarray(values, dtype=float), bins=np.asarray(edges), alpha=0.55, label=label, density=True)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("density")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata=_METADATA)
        plt.close(fig)


def write_path_svg(
    path: str | Path,
    x: ArrayLike,
    series: Mapping[str, ArrayLike],
    *,
    marker: float | None = None,
    title: str = "",
    xlabel: str = "t",
) -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for label, y in series.items():
            ax.plot(np.asarray(x, dtype=float), np.asarray(y, dtype=float), linewidth=0.8, label=label)
        if marker is not None:
            ax.axvline(marker, color="black", linestyle="--", linewidth=0.8)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata=_METADATA)
        plt.close(fig)
