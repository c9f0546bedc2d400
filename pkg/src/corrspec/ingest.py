"""Panel construction: price loading, alignment, log returns, standardization.

Input CSVs follow two schemas:

* prices: ``date,ticker,close`` (ISO dates, positive closes, long format)
* sector map: ``ticker,asset_class,sector`` with one row per membership;
  a ticker listed under several sectors belongs to all of them.

Alignment keeps the intersection of trading dates across all retained
tickers, so every column of the resulting panel covers the same dates.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

ASSET_CLASSES = ("crypto", "equity")

PRICE_COLUMNS = ("date", "ticker", "close")
SECTOR_COLUMNS = ("ticker", "asset_class", "sector")


class IngestError(ValueError):
    """Malformed input data: bad schema, bad values, or empty alignment."""


class ZeroVarianceError(ValueError):
    """A standardization window contained a constant return column."""

    def __init__(self, t: int, tickers: tuple[str, ...]):
        self.t = t
        self.tickers = tickers
        super().__init__(
            f"zero-variance column(s) in window ending at t={t}: {', '.join(tickers)}")


@dataclass(frozen=True)
class AssetMeta:
    """Identity and classification of one asset."""

    ticker: str
    asset_class: str
    sectors: frozenset[str]

    def __post_init__(self):
        if not self.ticker:
            raise IngestError("empty ticker")
        if self.asset_class not in ASSET_CLASSES:
            raise IngestError(
                f"unknown asset class {self.asset_class!r} for {self.ticker}; "
                f"expected one of {ASSET_CLASSES}")
        if not self.sectors or any(not s for s in self.sectors):
            raise IngestError(f"ticker {self.ticker} has no valid sector")


def _freeze(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=float)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class PricePanel:
    """Aligned close prices: rows are dates, columns are assets."""

    dates: tuple[dt.date, ...]
    assets: tuple[AssetMeta, ...]
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "prices", _freeze(self.prices))
        _validate_panel(self, positive=True)

    @property
    def tickers(self) -> tuple[str, ...]:
        return tuple(a.ticker for a in self.assets)

    @property
    def shape(self) -> tuple[int, int]:
        return self.prices.shape


@dataclass(frozen=True)
class ReturnsPanel:
    """Aligned log returns: row ``t`` is the return from date ``t-1`` to ``t``."""

    dates: tuple[dt.date, ...]
    assets: tuple[AssetMeta, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        _validate_panel(self, positive=False)

    @property
    def tickers(self) -> tuple[str, ...]:
        return tuple(a.ticker for a in self.assets)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def column(self, ticker: str) -> np.ndarray:
        """Return series of one ticker."""
        try:
            idx = self.tickers.index(ticker)
        except ValueError:
            raise KeyError(f"ticker {ticker!r} not in panel") from None
        return self.values[:, idx]


def _validate_panel(panel, positive: bool) -> None:
    matrix = panel.prices if positive else panel.values
    if matrix.ndim != 2:
        raise IngestError(f"panel matrix must be 2-D, got shape {matrix.shape}")
    n_dates, n_assets = matrix.shape
    if n_dates != len(panel.dates) or n_assets != len(panel.assets):
        raise IngestError(
            f"shape mismatch: matrix {matrix.shape}, "
            f"{len(panel.dates)} dates, {len(panel.assets)} assets")
    if any(b <= a for a, b in zip(panel.dates, panel.dates[1:])):
        raise IngestError("dates must be strictly increasing")
    tickers = [a.ticker for a in panel.assets]
    if len(set(tickers)) != len(tickers):
        raise IngestError("duplicate tickers in panel")
    if not np.all(np.isfinite(matrix)):
        raise IngestError("panel contains non-finite values")
    if positive and np.any(matrix <= 0):
        raise IngestError("panel contains non-positive prices")


def _read_csv_checked(path, expected: tuple[str, ...], label: str) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype=str)
    got = tuple(c.strip() for c in frame.columns)
    if got != expected:
        raise IngestError(
            f"{label} file {path}: expected columns {expected}, got {got}")
    if frame.isna().any().any():
        raise IngestError(f"{label} file {path}: missing values present")
    for col in expected:
        frame[col] = frame[col].str.strip()
    return frame


def load_sector_map(path, asset_class: str | None = None) -> dict[str, AssetMeta]:
    """Parse a sector-map CSV into per-ticker metadata, keyed by ticker."""
    frame = _read_csv_checked(path, SECTOR_COLUMNS, "sector map")
    metas: dict[str, AssetMeta] = {}
    by_ticker: dict[str, dict] = {}
    for row in frame.itertuples(index=False):
        rec = by_ticker.setdefault(row.ticker, {"asset_class": row.asset_class,
                                                "sectors": set()})
        if rec["asset_class"] != row.asset_class:
            raise IngestError(
                f"ticker {row.ticker} mapped to conflicting asset classes "
                f"{rec['asset_class']!r} and {row.asset_class!r}")
        if row.sector in rec["sectors"]:
            raise IngestError(f"duplicate sector row for ticker {row.ticker}: {row.sector}")
        rec["sectors"].add(row.sector)
    for ticker, rec in by_ticker.items():
        if asset_class is not None and rec["asset_class"] != asset_class:
            continue
        metas[ticker] = AssetMeta(ticker=ticker, asset_class=rec["asset_class"],
                                  sectors=frozenset(rec["sectors"]))
    return metas


def load_prices(prices_path, sectors_path, asset_class: str | None = None) -> PricePanel:
    """Load and align a long-format price file against a sector map.

    Parameters
    ----------
    prices_path, sectors_path : path-like
        CSVs following the module-level schemas.
    asset_class : str, optional
        Keep only tickers of this class (both files are filtered).

    Returns
    -------
    PricePanel
        Dates sorted ascending (intersection across tickers), assets sorted
        by ticker.

    Raises
    ------
    IngestError
        On schema violations, non-positive or missing closes, duplicate
        (date, ticker) rows, tickers present in only one of the two files,
        or an empty date intersection.
    """
    metas = load_sector_map(sectors_path, asset_class=asset_class)
    if not metas:
        raise IngestError(f"sector map {sectors_path} has no tickers"
                          + (f" of class {asset_class!r}" if asset_class else ""))

    frame = _read_csv_checked(prices_path, PRICE_COLUMNS, "prices")
    try:
        frame["date"] = pd.to_datetime(frame["date"], format="ISO8601").dt.date
    except (ValueError, TypeError) as exc:
        raise IngestError(f"prices file {prices_path}: unparseable date ({exc})") from exc
    close = pd.to_numeric(frame["close"], errors="coerce")
    bad = ~np.isfinite(close) | (close <= 0)
    if bad.any():
        row = frame[bad].iloc[0]
        raise IngestError(
            f"prices file {prices_path}: non-positive or unparseable close for "
            f"ticker {row['ticker']} on {row['date']}")
    frame["close"] = close

    price_tickers = set(frame["ticker"])
    unmapped = sorted(price_tickers - set(load_sector_map(sectors_path)))
    if unmapped:
        raise IngestError(f"prices contain unmapped tickers: {', '.join(unmapped)}")
    unknown = sorted(set(metas) - price_tickers)
    if unknown:
        raise IngestError(f"sector map names tickers absent from prices: {', '.join(unknown)}")

    frame = frame[frame["ticker"].isin(metas)]
    if frame.empty:
        raise IngestError("no price rows left after filtering")

    dup = frame.duplicated(subset=["date", "ticker"])
    if dup.any():
        row = frame[dup].iloc[0]
        raise IngestError(
            f"duplicate price row for ticker {row['ticker']} on {row['date']}")

    wide = frame.pivot(index="date", columns="ticker", values="close")
    wide = wide.dropna(axis=0, how="any").sort_index()
    if wide.empty:
        raise IngestError("empty date intersection across tickers")

    tickers = sorted(wide.columns)
    assets = tuple(metas[t] for t in tickers)
    return PricePanel(dates=tuple(wide.index),
                      assets=assets,
                      prices=wide[tickers].to_numpy(dtype=float))


def log_returns(panel: PricePanel) -> ReturnsPanel:
    """Log returns ``ln(p_t / p_{t-1})``; drops the first date."""
    if len(panel.dates) < 2:
        raise IngestError("need at least two dates to compute returns")
    values = np.log(panel.prices[1:] / panel.prices[:-1])
    return ReturnsPanel(dates=panel.dates[1:], assets=panel.assets, values=values)


def standardize_window(returns: ReturnsPanel, window: int, t: int) -> np.ndarray:
    """Standardize the ``window`` rows ending at row ``t`` (0-based, inclusive).

    Each column is centered and scaled by its population standard deviation
    over the window.

    Raises
    ------
    ZeroVarianceError
        If any column is constant over the window (carries the tickers).
    IndexError
        If the window does not fit: requires ``window - 1 <= t < len(returns)``.
    """
    n_rows = returns.values.shape[0]
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    if t < window - 1 or t >= n_rows:
        raise IndexError(
            f"window end t={t} out of range [{window - 1}, {n_rows - 1}] "
            f"for window {window}")
    block = returns.values[t - window + 1:t + 1]
    std = block.std(axis=0)
    dead = np.flatnonzero(std == 0.0)
    if dead.size:
        raise ZeroVarianceError(t, tuple(returns.tickers[i] for i in dead))
    return (block - block.mean(axis=0)) / std


def sector_partition(returns: ReturnsPanel) -> dict[str, ReturnsPanel]:
    """Split a returns panel by sector, duplicating multi-sector assets.

    Returns a dict keyed by sector name (sorted); each sub-panel keeps the
    full date axis and the sector's members sorted by ticker.
    """
    sectors: dict[str, list[int]] = {}
    for idx, asset in enumerate(returns.assets):
        for sector in asset.sectors:
            sectors.setdefault(sector, []).append(idx)
    out: dict[str, ReturnsPanel] = {}
    for sector in sorted(sectors):
        idxs = sorted(sectors[sector], key=lambda i: returns.assets[i].ticker)
        out[sector] = ReturnsPanel(
            dates=returns.dates,
            assets=tuple(returns.assets[i] for i in idxs),
            values=returns.values[:, idxs])
    return out


def sector_membership(panel: PricePanel | ReturnsPanel) -> dict[str, tuple[str, ...]]:
    """Sector name -> sorted member tickers, from panel metadata."""
    members: dict[str, list[str]] = {}
    for asset in panel.assets:
        for sector in asset.sectors:
            members.setdefault(sector, []).append(asset.ticker)
    return {s: tuple(sorted(ts)) for s, ts in sorted(members.items())}


# --- panel serialization -------------------------------------------------

def save_panel(panel: PricePanel, path) -> None:
    """Write a price panel to JSON (dates ISO, assets with sector lists)."""
    doc = {
        "kind": "prices",
        "dates": [d.isoformat() for d in panel.dates],
        "assets": [{"ticker": a.ticker,
                    "asset_class": a.asset_class,
                    "sectors": sorted(a.sectors)} for a in panel.assets],
        "prices": [[float(v) for v in row] for row in panel.prices],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_panel(path) -> PricePanel:
    """Read a price panel written by :func:`save_panel`."""
    doc = json.loads(Path(path).read_text())
    if doc.get("kind") != "prices":
        raise IngestError(f"{path}: not a price panel file")
    assets = tuple(AssetMeta(ticker=a["ticker"], asset_class=a["asset_class"],
                             sectors=frozenset(a["sectors"]))
                   for a in doc["assets"])
    dates = tuple(dt.date.fromisoformat(d) for d in doc["dates"])
    return PricePanel(dates=dates, assets=assets,
                      prices=np.asarray(doc["prices"], dtype=float))
