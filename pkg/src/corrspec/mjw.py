"""Distances between sets of discrete distributions on a time axis.

Building blocks: exact 1-D Wasserstein distance between discrete
distributions over integer indices, and the symmetrized minimum-matching
semi-metric between two finite sets of such distributions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sectors import DistanceMatrix


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class IndexDistribution:
    """Discrete probability distribution over integer time indices."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        support = np.ascontiguousarray(self.support, dtype=int)
        probs = np.ascontiguousarray(self.probs, dtype=float)
        support.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        if support.size == 0 or support.size != probs.size:
            raise DistributionError("support and probs must be equal-length and non-empty")
        if np.any(np.diff(support) <= 0):
            raise DistributionError("support must be strictly increasing")
        if np.any(probs <= 0):
            raise DistributionError("probabilities must be positive")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise DistributionError(
                f"probabilities sum to {float(probs.sum()):.15f}, not 1")

    @classmethod
    def from_mapping(cls, mapping) -> "IndexDistribution":
        items = sorted(mapping.items())
        return cls(support=np.asarray([k for k, _ in items]),
                   probs=np.asarray([v for _, v in items]))

    @classmethod
    def point(cls, index: int) -> "IndexDistribution":
        return cls(support=np.asarray([index]), probs=np.asarray([1.0]))

    def mode(self) -> int:
        # ties break toward the smallest index
        return int(self.support[int(np.argmax(self.probs))])


def _cdf_on(grid: np.ndarray, dist: IndexDistribution) -> np.ndarray:
    idx = np.searchsorted(dist.support, grid, side="right")
    cum = np.concatenate([[0.0], np.cumsum(dist.probs)])
    return cum[idx]


def wasserstein_1d(f: IndexDistribution, g: IndexDistribution) -> float:
    """Exact order-1 Wasserstein distance via CDF differences.

    On the merged support grid ``x_1 < ... < x_k`` the distance is
    ``sum_i |F(x_i) - G(x_i)| * (x_{i+1} - x_i)``.
    """
    grid = np.union1d(f.support, g.support)
    if grid.size == 1:
        return 0.0
    gaps = np.diff(grid).astype(float)
    diff = np.abs(_cdf_on(grid, f) - _cdf_on(grid, g))
    return float(np.sum(diff[:-1] * gaps))


@dataclass(frozen=True)
class DistributionSet:
    """Labeled finite set of index distributions (possibly empty)."""

    label: str
    members: tuple[IndexDistribution, ...]

    def __len__(self) -> int:
        return len(self.members)


def mjw_distance(s: DistributionSet, t: DistributionSet, order: float = 1.0) -> float:
    """Symmetrized minimum-matching distance between two distribution sets.

    Each member of one set is matched to its nearest member of the other;
    the two directed averages of matched distances to the power ``order``
    are averaged and the result taken to the ``1/order`` power.  Semi-metric:
    symmetric and nonnegative, triangle inequality not guaranteed.

    Raises
    ------
    DistributionError
        If either set is empty (see :func:`mjw_matrix` for the convention
        that papers over empty sets) or ``order < 1``.
    """
    if order < 1.0:
        raise DistributionError(f"order must be >= 1, got {order}")
    if not s.members or not t.members:
        raise DistributionError(
            f"empty distribution set: {s.label if not s.members else t.label!r}")
    cross = np.asarray([[wasserstein_1d(a, b) for b in t.members] for a in s.members])
    to_t = cross.min(axis=1) ** order  # nearest match for each member of s
    to_s = cross.min(axis=0) ** order
    half = float(to_t.sum()) / (2 * len(s.members)) + float(to_s.sum()) / (2 * len(t.members))
    return float(half ** (1.0 / order))


def mjw_matrix(sets: Sequence[DistributionSet], order: float = 1.0,
               empty_set_penalty: float | None = None) -> DistanceMatrix:
    """Pairwise set distances; empty sets handled by a fixed penalty.

    A set with no members (no detected events) is at distance
    ``empty_set_penalty`` from every non-empty set and at 0 from other empty
    sets.  Passing ``None`` while empty sets are present is an error, so the
    convention is always an explicit caller choice.
    """
    empty = [s.label for s in sets if not s.members]
    if empty and empty_set_penalty is None:
        raise DistributionError(
            f"empty set(s) {', '.join(sorted(empty))} need an explicit "
            "empty_set_penalty")
    n = len(sets)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            a, b = sets[i], sets[j]
            if not a.members or not b.members:
                d = 0.0 if (not a.members and not b.members) else float(empty_set_penalty)
            else:
                d = mjw_distance(a, b, order=order)
            values[i, j] = values[j, i] = d
    return DistanceMatrix(labels=tuple(s.label for s in sets), values=values)
