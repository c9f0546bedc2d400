"""Trailing risk-adjusted-return portfolio simulations.

Both algorithms walk the panel day by day.  At each evaluation day ``t`` the
trailing window covers return rows ``t - S .. t`` inclusive (``S + 1`` rows);
the score of a candidate is its cumulative return over the window divided by
its population variance over the window (variance, not standard deviation).

* Security selection: within every sector, hold the top ``B`` securities by
  that score, equally weighted; the day's portfolio return is the mean of
  the sector returns.
* Sector allocation: score whole sectors (equal-weight constituents inside),
  hold the top ``B`` sectors.

As written, both algorithms book the trailing cumulative return of the
selection at ``t`` itself, so the selection window and the booked return
overlap; ``out_of_sample=True`` instead books the next day's return, with
selection stopping one day earlier.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .ingest import ReturnsPanel

logger = logging.getLogger(__name__)


class PortfolioError(ValueError):
    """Invalid simulation configuration or unusable panel."""


@dataclass(frozen=True)
class SimConfig:
    """Window length ``S`` (trailing, in return rows) and selection size ``B``."""

    window: int
    best: int

    def __post_init__(self):
        if self.window < 2:
            raise PortfolioError(f"window must be >= 2, got {self.window}")
        if self.best < 1:
            raise PortfolioError(f"best must be >= 1, got {self.best}")


@dataclass
class SimResult:
    """Per-day portfolio returns and the selections behind them."""

    times: np.ndarray
    per_t: np.ndarray
    total: float
    selections: list
    config: SimConfig
    out_of_sample: bool

    def __post_init__(self):
        if abs(self.total - float(self.per_t.sum())) > 1e-10 * max(
                1.0, abs(self.total)):
            raise PortfolioError("total does not equal the sum of per-day returns")
        if len(self.selections) != self.per_t.size or self.times.size != self.per_t.size:
            raise PortfolioError("result arrays have mismatched lengths")


def _window_slices(returns: ReturnsPanel, window: int):
    """Trailing sums and population variances per (window end, column)."""
    values = returns.values
    n_rows = values.shape[0]
    if n_rows < window + 1:
        raise PortfolioError(
            f"need at least {window + 1} return rows for window {window}, "
            f"have {n_rows}")
    ends = np.arange(window, n_rows)
    blocks = np.lib.stride_tricks.sliding_window_view(values, window + 1, axis=0)
    # blocks[i] is rows i .. i + window, i.e. the window ending at row i + window
    sums = blocks.sum(axis=2)
    variances = blocks.var(axis=2)
    return ends, sums, variances


def _rank(scores: list[tuple[float, str]], best: int) -> list[str]:
    """Top labels by score, descending, ties toward the earlier label."""
    ordered = sorted(scores, key=lambda pair: (-pair[0], pair[1]))
    return [label for _, label in ordered[:best]]


def _column_indices(returns: ReturnsPanel,
                    sectors: Mapping[str, Sequence[str]]) -> dict[str, list[int]]:
    tickers = returns.tickers
    lookup = {tk: i for i, tk in enumerate(tickers)}
    out: dict[str, list[int]] = {}
    for sector in sorted(sectors):
        members = sorted(sectors[sector])
        if not members:
            raise PortfolioError(f"sector {sector!r} has no members")
        missing = [tk for tk in members if tk not in lookup]
        if missing:
            raise PortfolioError(
                f"sector {sector!r} names tickers outside the panel: "
                f"{', '.join(missing)}")
        out[sector] = [lookup[tk] for tk in members]
    if not out:
        raise PortfolioError("no sectors supplied")
    return out


def algo1_security_selection(returns: ReturnsPanel,
                             sectors: Mapping[str, Sequence[str]],
                             config: SimConfig,
                             out_of_sample: bool = False) -> SimResult:
    """Per-sector security selection on the trailing score.

    At each day, every sector ranks its members by trailing cumulative
    return over population variance and holds the top ``B`` (all members if
    fewer).  Members with zero trailing variance are unrankable; if a sector
    has no rankable member that day, ranking falls back to the cumulative
    return alone (logged once).
    """
    cols = _column_indices(returns, sectors)
    ends, sums, variances = _window_slices(returns, config.window)
    if out_of_sample:
        ends = ends[:-1]
        if ends.size == 0:
            raise PortfolioError("no evaluation days left in out-of-sample mode")
    per_t = np.empty(ends.size)
    selections = []
    warned = False
    ticker_of = returns.tickers
    col_of = {tk: i for i, tk in enumerate(ticker_of)}
    for i, t in enumerate(ends):
        day_sectors = {}
        sector_returns = []
        for sector, idxs in cols.items():
            scored = [(sums[i, c] / variances[i, c], ticker_of[c])
                      for c in idxs if variances[i, c] > 0.0]
            if not scored:
                if not warned:
                    logger.warning(
                        "sector %r has no positive-variance member at t=%d; "
                        "ranking by trailing return instead", sector, int(t))
                    warned = True
                scored = [(sums[i, c], ticker_of[c]) for c in idxs]
            chosen = _rank(scored, config.best)
            chosen_idx = [col_of[tk] for tk in chosen]
            if out_of_sample:
                booked = float(returns.values[t + 1, chosen_idx].mean())
            else:
                booked = float(sums[i, chosen_idx].mean())
            sector_returns.append(booked)
            day_sectors[sector] = tuple(chosen)
        per_t[i] = float(np.mean(sector_returns))
        selections.append(day_sectors)
    return SimResult(times=ends, per_t=per_t, total=float(per_t.sum()),
                     selections=selections, config=config,
                     out_of_sample=out_of_sample)


def algo2_sector_allocation(returns: ReturnsPanel,
                            sectors: Mapping[str, Sequence[str]],
                            config: SimConfig,
                            out_of_sample: bool = False) -> SimResult:
    """Sector allocation on the trailing score of equal-weighted sectors.

    A sector's trailing return is the mean of its members' trailing
    cumulative returns; its variance is the population variance of the
    equal-weighted constituent portfolio over the window (equivalently
    ``w' Cov w`` with equal weights).  The top ``B`` sectors are held.
    """
    cols = _column_indices(returns, sectors)
    ends, sums, _ = _window_slices(returns, config.window)
    sector_names = list(cols)
    # equal-weight portfolio series per sector, then its trailing variance
    port = np.column_stack([returns.values[:, idxs].mean(axis=1)
                            for idxs in cols.values()])
    blocks = np.lib.stride_tricks.sliding_window_view(port, config.window + 1, axis=0)
    sector_var = blocks.var(axis=2)
    sector_sum = np.column_stack([sums[:, idxs].mean(axis=1)
                                  for idxs in cols.values()])
    if out_of_sample:
        ends = ends[:-1]
        if ends.size == 0:
            raise PortfolioError("no evaluation days left in out-of-sample mode")
    per_t = np.empty(ends.size)
    selections = []
    warned = False
    for i, t in enumerate(ends):
        scored = [(sector_sum[i, s] / sector_var[i, s], name)
                  for s, name in enumerate(sector_names) if sector_var[i, s] > 0.0]
        if not scored:
            if not warned:
                logger.warning(
                    "no positive-variance sector at t=%d; ranking by trailing "
                    "return instead", int(t))
                warned = True
            scored = [(sector_sum[i, s], name)
                      for s, name in enumerate(sector_names)]
        chosen = _rank(scored, config.best)
        chosen_pos = [sector_names.index(name) for name in chosen]
        if out_of_sample:
            booked = float(np.mean([returns.values[t + 1, cols[name]].mean()
                                    for name in chosen]))
        else:
            booked = float(sector_sum[i, chosen_pos].mean())
        per_t[i] = booked
        selections.append(tuple(chosen))
    return SimResult(times=ends, per_t=per_t, total=float(per_t.sum()),
                     selections=selections, config=config,
                     out_of_sample=out_of_sample)


@dataclass(frozen=True)
class SweepRow:
    window: int
    best: int
    algo1_total: float
    algo2_total: float


def sweep(returns: ReturnsPanel, sectors: Mapping[str, Sequence[str]],
          windows: Sequence[int], bests: Sequence[int],
          out_of_sample: bool = False) -> list[SweepRow]:
    """Grid of both algorithms' totals, ordered by window then by ``B``."""
    rows = []
    for window in sorted(set(int(w) for w in windows)):
        for best in sorted(set(int(b) for b in bests)):
            config = SimConfig(window=window, best=best)
            r1 = algo1_security_selection(returns, sectors, config,
                                          out_of_sample=out_of_sample)
            r2 = algo2_sector_allocation(returns, sectors, config,
                                         out_of_sample=out_of_sample)
            rows.append(SweepRow(window=window, best=best,
                                 algo1_total=r1.total, algo2_total=r2.total))
    return rows
