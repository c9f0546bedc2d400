"""Time-varying log-spectrum surfaces from changepoint posteriors.

A surface assigns every time index the fitted log-spectrum of its segment
under the MAP partition: segment boundaries sit at the modal changepoint
locations, and each segment's coefficients are the posterior mean over the
samples with the MAP segment count.  Surfaces on a common grid are compared
with a mean absolute distance, which is a pseudometric (two different
regimes can produce identical spectra).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import whittle
from .changepoint import ChangepointPosterior, SegmentModel
from .sectors import DistanceMatrix


class SpectraError(ValueError):
    """Inconsistent posterior/chain pairing or grid mismatch."""


@dataclass(frozen=True)
class TVSpectrum:
    """Log-spectrum surface: ``surface[t, k]`` at time ``t``, frequency ``freqs[k]``."""

    times: np.ndarray
    freqs: np.ndarray
    surface: np.ndarray

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=int)
        freqs = np.ascontiguousarray(self.freqs, dtype=float)
        surface = np.ascontiguousarray(self.surface, dtype=float)
        for arr in (times, freqs, surface):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "surface", surface)
        if surface.shape != (times.size, freqs.size):
            raise SpectraError(
                f"surface shape {surface.shape} != ({times.size}, {freqs.size})")
        if not np.all(np.isfinite(surface)):
            raise SpectraError("non-finite surface values")


def tv_spectrum(x: np.ndarray, posterior: ChangepointPosterior,
                samples: Sequence[SegmentModel], n_freq: int = 64) -> TVSpectrum:
    """Surface from the MAP partition and posterior-mean coefficients.

    Parameters
    ----------
    x : series the posterior was fitted on (only its length is used).
    posterior : MAP summary of the chain.
    samples : post-burn-in segment models the summary came from.
    n_freq : grid size; frequencies are uniform on [0, 0.5].

    Raises
    ------
    SpectraError
        If the grid is empty, no sample has the MAP segment count, or the
        modal boundaries do not form a strictly increasing partition.
    """
    if n_freq < 2:
        raise SpectraError(f"need at least 2 grid frequencies, got {n_freq}")
    n = int(np.asarray(x).size)
    selected = [s for s in samples if s.m == posterior.map_m]
    if not selected:
        raise SpectraError(
            f"no samples with MAP segment count {posterior.map_m}; "
            "posterior and chain do not match")
    if len(posterior.distributions) != posterior.map_m - 1:
        raise SpectraError("posterior distributions do not match its MAP count")

    boundaries = [0] + [d.mode() for d in posterior.distributions] + [n]
    if any(b2 <= b1 for b1, b2 in zip(boundaries, boundaries[1:])):
        raise SpectraError(f"modal boundaries not increasing: {boundaries}")

    n_coef = selected[0].beta[0].size
    mean_beta = np.zeros((posterior.map_m, n_coef))
    for s in selected:
        for j in range(posterior.map_m):
            mean_beta[j] += s.beta[j]
    mean_beta /= len(selected)

    freqs = np.linspace(0.0, 0.5, n_freq)
    basis = whittle.cosine_design(freqs, n_coef - 1)
    surface = np.empty((n, n_freq))
    for j in range(posterior.map_m):
        surface[boundaries[j]:boundaries[j + 1]] = basis @ mean_beta[j]
    return TVSpectrum(times=np.arange(n), freqs=freqs, surface=surface)


def spectral_distance(a: TVSpectrum, b: TVSpectrum) -> float:
    """Mean absolute gap between two surfaces on an identical grid."""
    if a.times.shape != b.times.shape or np.any(a.times != b.times):
        raise SpectraError("surfaces cover different time axes")
    if a.freqs.shape != b.freqs.shape or np.any(a.freqs != b.freqs):
        raise SpectraError("surfaces cover different frequency grids")
    return float(np.mean(np.abs(a.surface - b.surface)))


def spectral_distance_matrix(
        surfaces: Mapping[str, TVSpectrum] | Sequence[TVSpectrum]) -> DistanceMatrix:
    """Pairwise surface distances; sequences get positional labels."""
    if isinstance(surfaces, Mapping):
        labels = tuple(sorted(surfaces))
        items = [surfaces[lab] for lab in labels]
    else:
        items = list(surfaces)
        labels = tuple(str(i) for i in range(len(items)))
    n = len(items)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = spectral_distance(items[i], items[j])
    return DistanceMatrix(labels=labels, values=values)
