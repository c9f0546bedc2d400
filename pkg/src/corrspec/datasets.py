"""Bundled demo data: a small synthetic crypto panel with regime switches."""

from __future__ import annotations

from importlib.resources import files
from pathlib import Path


def demo_paths() -> tuple[Path, Path]:
    """Paths of the bundled demo price and sector CSVs."""
    data = files("corrspec") / "data"
    return Path(str(data / "demo_prices.csv")), Path(str(data / "demo_sectors.csv"))
