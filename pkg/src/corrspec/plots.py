"""SVG figure emission for every pipeline stage.

All figures are written as SVG with a pinned hash salt and no embedded
creation date, so rerunning the pipeline with the same inputs produces
byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.cluster import hierarchy

from .changepoint import ChangepointPosterior
from .rmt import EigenSpectrumSeries, MPBounds, mp_density
from .sectors import Dendrogram, VariancePath
from .spectra import TVSpectrum

matplotlib.rcParams["svg.hashsalt"] = "corrspec"


def _savefig(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def density_plot_data(eigenvalues: np.ndarray, bounds: MPBounds,
                      bins: int = 60) -> dict:
    """Histogram and overlay curve backing the eigenvalue density figure.

    The histogram is area-normalized, so its integral is exactly 1 and
    directly comparable to the overlay density.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float).ravel()
    hi = max(float(eigenvalues.max()), bounds.lambda_plus) * 1.05
    edges = np.linspace(0.0, hi, bins + 1)
    heights, _ = np.histogram(eigenvalues, bins=edges, density=True)
    grid = np.linspace(0.0, hi, 512)
    curve = mp_density(grid, bounds)
    return {"heights": heights, "edges": edges, "grid": grid, "curve": curve}


def plot_mp_density(eigenvalues: np.ndarray, bounds: MPBounds, path,
                    bins: int = 60) -> Path:
    """Pooled eigenvalue histogram with the theoretical density overlay."""
    data = density_plot_data(eigenvalues, bounds, bins=bins)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.stairs(data["heights"], data["edges"], fill=True, alpha=0.45,
              color="tab:blue", label="eigenvalues")
    ax.plot(data["grid"], data["curve"], color="tab:red", lw=1.5,
            label="random null")
    for edge, name in ((bounds.lambda_minus, "lower edge"),
                       (bounds.lambda_plus, "upper edge")):
        ax.axvline(edge, color="0.4", ls="--", lw=0.8)
    ax.set_xlabel("eigenvalue")
    ax.set_ylabel("density")
    ax.legend(loc="upper right")
    fig.tight_layout()
    return _savefig(fig, path)


def plot_rmt_series(series: EigenSpectrumSeries, path) -> Path:
    """Leading eigenvalue and above-edge count through time."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 5.5), sharex=True)
    ax1.plot(series.times, series.lambda1, color="tab:blue", lw=1.0,
             label="leading eigenvalue")
    ax1.plot(series.times, [b.lambda_plus for b in series.bounds],
             color="tab:red", ls="--", lw=0.9, label="random upper edge")
    ax1.set_ylabel("eigenvalue")
    ax1.legend(loc="upper left")
    ax2.step(series.times, series.nonrandom, where="mid", color="tab:green", lw=1.0)
    ax2.set_ylabel("count above edge")
    ax2.set_xlabel("window end")
    fig.tight_layout()
    return _savefig(fig, path)


def plot_variance_paths(paths: Sequence[VariancePath], path) -> Path:
    """Explanatory-variance share of the leading eigenvalue per sector."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for vp in paths:
        ax.plot(vp.times, vp.values, lw=1.0, label=vp.sector)
    ax.set_xlabel("window end")
    ax.set_ylabel("leading-eigenvalue variance share")
    ax.set_ylim(0.0, 1.0)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _savefig(fig, path)


def _to_scipy_linkage(dend: Dendrogram) -> np.ndarray:
    return np.asarray([[a, b, h, s] for a, b, h, s in dend.merges], dtype=float)


def plot_dendrogram(dend: Dendrogram, path, title: str = "") -> Path:
    """Merge-tree rendering of a clustering result."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    hierarchy.dendrogram(_to_scipy_linkage(dend), labels=list(dend.labels),
                         ax=ax, leaf_rotation=60, color_threshold=0.0,
                         above_threshold_color="tab:blue")
    ax.set_ylabel(f"{dend.linkage} linkage distance")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _savefig(fig, path)


def plot_changepoint_posterior(x: np.ndarray, posterior: ChangepointPosterior,
                               path, label: str = "") -> Path:
    """Series with changepoint locations shaded by posterior mass."""
    x = np.asarray(x, dtype=float)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(np.arange(x.size), x, color="0.3", lw=0.7)
    for dist in posterior.distributions:
        top = float(dist.probs.max())
        for idx, prob in zip(dist.support, dist.probs):
            ax.axvline(int(idx), color="tab:red",
                       alpha=max(0.04, 0.9 * float(prob) / top), lw=1.0)
    ax.set_xlabel("time index")
    ax.set_ylabel("value")
    if label:
        ax.set_title(f"{label}: {posterior.map_m} regime(s)")
    fig.tight_layout()
    return _savefig(fig, path)


def plot_tv_spectrum(surface: TVSpectrum, path, label: str = "") -> Path:
    """Heatmap of the time-varying log-spectrum."""
    fig, ax = plt.subplots(figsize=(8, 4))
    mesh = ax.pcolormesh(surface.times, surface.freqs, surface.surface.T,
                         shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="log power")
    ax.set_xlabel("time index")
    ax.set_ylabel("frequency")
    if label:
        ax.set_title(label)
    fig.tight_layout()
    return _savefig(fig, path)
