"""Sector explanatory-variance paths and hierarchical clustering of them.

For each sector, the share of variance captured by the leading eigenvalue of
the sector's rolling correlation matrix traces a path through time.  Paths
are compared with a mean absolute (L1) distance and grouped with bottom-up
agglomerative clustering over the resulting distance matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .ingest import ReturnsPanel
from .rmt import eigen_spectrum
from .rollcorr import rolling_correlation_series

LINKAGES = ("average", "single", "complete")


class SectorError(ValueError):
    """Invalid sector panel, path alignment, or clustering input."""


@dataclass(frozen=True)
class VariancePath:
    """Leading-eigenvalue variance share of one sector, per window end."""

    sector: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=int)
        values = np.ascontiguousarray(self.values, dtype=float)
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.size != values.size:
            raise SectorError(f"sector {self.sector}: times/values length mismatch")
        if times.size == 0:
            raise SectorError(f"sector {self.sector}: empty path")
        if np.any(values < -1e-12) or np.any(values > 1.0 + 1e-12):
            raise SectorError(f"sector {self.sector}: variance shares outside [0, 1]")


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative distances with a zero diagonal."""

    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        n = len(self.labels)
        if values.shape != (n, n):
            raise SectorError(f"distance matrix shape {values.shape} != {n} labels")
        if len(set(self.labels)) != n:
            raise SectorError("duplicate labels in distance matrix")
        if not np.all(np.isfinite(values)):
            raise SectorError("non-finite distances")
        if np.abs(values - values.T).max(initial=0.0) > 1e-12:
            raise SectorError("distance matrix not symmetric")
        if np.abs(np.diag(values)).max(initial=0.0) > 1e-12:
            raise SectorError("distance matrix diagonal not zero")
        if values.min(initial=0.0) < 0.0:
            raise SectorError("negative distances")


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge history.

    ``merges`` rows are ``(a, b, height, size)`` where ``a`` and ``b`` index
    clusters: ``0 .. n-1`` are the leaves (in ``labels`` order) and ``n + i``
    is the cluster created by merge row ``i``.  Heights are non-decreasing
    for the provided linkages.
    """

    labels: tuple[str, ...]
    merges: tuple[tuple[int, int, float, int], ...]
    linkage: str

    def __post_init__(self):
        n = len(self.labels)
        if len(self.merges) != max(n - 1, 0):
            raise SectorError(
                f"{len(self.merges)} merges for {n} leaves; expected {n - 1}")
        heights = [m[2] for m in self.merges]
        if any(h2 < h1 - 1e-12 for h1, h2 in zip(heights, heights[1:])):
            raise SectorError("merge heights decrease")
        if any(h < 0 for h in heights):
            raise SectorError("negative merge height")

    def leaf_sets(self) -> list[frozenset[str]]:
        """Member labels of every cluster, leaves first, merges after."""
        n = len(self.labels)
        sets: list[frozenset[str]] = [frozenset([lab]) for lab in self.labels]
        for a, b, _, _ in self.merges:
            sets.append(sets[a] | sets[b])
        return sets

    def heights(self) -> np.ndarray:
        return np.asarray([m[2] for m in self.merges], dtype=float)


def variance_paths(sector_panels: Mapping[str, ReturnsPanel],
                   window: int) -> list[VariancePath]:
    """Leading-eigenvalue variance-share path per sector, sorted by name.

    Raises
    ------
    SectorError
        If any sector holds fewer than two assets (a single asset has a
        degenerate 1x1 correlation matrix whose share is identically 1).
    """
    paths = []
    for sector in sorted(sector_panels):
        panel = sector_panels[sector]
        if len(panel.assets) < 2:
            raise SectorError(
                f"sector {sector!r} has {len(panel.assets)} asset(s); need >= 2")
        times, shares = [], []
        for matrix in rolling_correlation_series(panel, window):
            spectrum = eigen_spectrum(matrix)
            times.append(matrix.t)
            shares.append(float(spectrum.weights[0]))
        paths.append(VariancePath(sector=sector,
                                  times=np.asarray(times, dtype=int),
                                  values=np.asarray(shares, dtype=float)))
    return paths


def l1_path_distance(a: VariancePath, b: VariancePath) -> float:
    """Mean absolute gap between two aligned paths.

    Raises
    ------
    SectorError
        If the paths cover different window ends.
    """
    if a.times.size != b.times.size or np.any(a.times != b.times):
        raise SectorError(
            f"paths {a.sector!r} and {b.sector!r} are not aligned")
    return float(np.mean(np.abs(a.values - b.values)))


def l1_distance_matrix(paths: Sequence[VariancePath]) -> DistanceMatrix:
    """Pairwise mean-absolute-gap distances between sector paths."""
    n = len(paths)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = l1_path_distance(paths[i], paths[j])
    return DistanceMatrix(labels=tuple(p.sector for p in paths), values=values)


def _lance_williams(linkage: str, d_ai: float, d_bi: float,
                    size_a: int, size_b: int) -> float:
    if linkage == "single":
        return min(d_ai, d_bi)
    if linkage == "complete":
        return max(d_ai, d_bi)
    return (size_a * d_ai + size_b * d_bi) / (size_a + size_b)


def agglomerative_cluster(dist: DistanceMatrix, linkage: str = "average") -> Dendrogram:
    """Bottom-up clustering of a distance matrix.

    Ties on merge distance break lexicographically: among minimum-distance
    pairs, the pair whose smallest member label sorts first wins, then the
    smaller of the two partner keys.  With every off-diagonal distance equal
    this makes the merge order fully deterministic.

    Parameters
    ----------
    dist : DistanceMatrix
    linkage : {"average", "single", "complete"}
        Average is unweighted pair-group (mean over all cross pairs);
        updates use the Lance-Williams recursion.
    """
    if linkage not in LINKAGES:
        raise SectorError(f"unknown linkage {linkage!r}; expected one of {LINKAGES}")
    n = len(dist.labels)
    if n < 2:
        raise SectorError(f"need at least 2 items to cluster, got {n}")

    work = dist.values.astype(float).copy()
    active: dict[int, dict] = {
        i: {"row": i, "size": 1, "key": dist.labels[i]} for i in range(n)}
    # `row` indexes into `work`, reusing the absorbing cluster's row.
    merges: list[tuple[int, int, float, int]] = []
    next_id = n

    while len(active) > 1:
        best = None
        for a in active:
            for b in active:
                if a >= b:
                    continue
                d = work[active[a]["row"], active[b]["row"]]
                ka, kb = sorted((active[a]["key"], active[b]["key"]))
                cand = (d, ka, kb, a, b)
                if best is None or cand < best:
                    best = cand
        d, _, _, a, b = best
        if active[a]["key"] > active[b]["key"]:
            a, b = b, a
        row_a, row_b = active[a]["row"], active[b]["row"]
        size_a, size_b = active[a]["size"], active[b]["size"]
        for other in active:
            if other in (a, b):
                continue
            row_o = active[other]["row"]
            merged = _lance_williams(linkage, work[row_a, row_o],
                                     work[row_b, row_o], size_a, size_b)
            work[row_a, row_o] = work[row_o, row_a] = merged
        merges.append((a, b, float(d), size_a + size_b))
        active[next_id] = {"row": row_a, "size": size_a + size_b,
                           "key": min(active[a]["key"], active[b]["key"])}
        del active[a], active[b]
        next_id += 1

    return Dendrogram(labels=dist.labels, merges=tuple(merges), linkage=linkage)
