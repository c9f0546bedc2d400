"""Regenerate the bundled demo panel (src/corrspec/data/*.csv).

Nine synthetic crypto tickers in three sectors (one ticker carries a dual
membership), 420 daily closes, with a volatility-and-autocorrelation regime
switch at a sector-specific day so the changepoint stages have something to
find.  Deterministic: fixed seed, values rounded before writing.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "corrspec" / "data"
N_DAYS = 420
START = np.datetime64("2021-01-04")

SECTORS = {
    "exchange": ["ABC", "BDX", "CER", "NEX"],
    "platform": ["DQN", "EXM", "FLT"],
    "wallet": ["GMA", "HUB", "NEX"],
}
SWITCH = {"exchange": 200, "platform": 225, "wallet": 250}
PHI = (0.5, -0.4)
VOL = (0.015, 0.030)


def sector_factor(rng: np.random.Generator, switch: int) -> np.ndarray:
    out = np.empty(N_DAYS)
    prev = 0.0
    for t in range(N_DAYS):
        regime = int(t >= switch)
        prev = PHI[regime] * prev + VOL[regime] * rng.standard_normal()
        out[t] = prev
    return out


def main() -> None:
    rng = np.random.default_rng(20210104)
    factors = {s: sector_factor(rng, SWITCH[s]) for s in sorted(SECTORS)}
    tickers = sorted({tk for members in SECTORS.values() for tk in members})
    returns = {}
    for ticker in tickers:
        homes = sorted(s for s, members in SECTORS.items() if ticker in members)
        base = np.mean([factors[s] for s in homes], axis=0)
        idio = 0.010 * rng.standard_normal(N_DAYS)
        returns[ticker] = base + idio

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    dates = [str(START + np.timedelta64(i, "D")) for i in range(N_DAYS)]
    with (OUT_DIR / "demo_prices.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "ticker", "close"])
        for ticker in tickers:
            prices = 100.0 * np.exp(np.cumsum(returns[ticker]))
            for day, price in zip(dates, prices):
                writer.writerow([day, ticker, f"{price:.6f}"])

    with (OUT_DIR / "demo_sectors.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ticker", "asset_class", "sector"])
        for sector in sorted(SECTORS):
            for ticker in sorted(SECTORS[sector]):
                writer.writerow([ticker, "crypto", sector])

    print(f"wrote {N_DAYS} days x {len(tickers)} tickers to {OUT_DIR}")


if __name__ == "__main__":
    main()
