import datetime as dt

import numpy as np
import pytest

from corrspec.ingest import AssetMeta, PricePanel, ReturnsPanel


def make_returns(values: np.ndarray, sectors=None,
                 asset_class: str = "crypto") -> ReturnsPanel:
    """Wrap a raw array as a ReturnsPanel with synthetic dates and tickers."""
    n, k = values.shape
    tickers = [f"T{idx:02d}" for idx in range(k)]
    if sectors is None:
        sectors = {t: ("all",) for t in tickers}
    assets = tuple(AssetMeta(ticker=t, asset_class=asset_class,
                             sectors=frozenset(sectors[t])) for t in tickers)
    start = dt.date(2020, 1, 1)
    dates = tuple(start + dt.timedelta(days=i) for i in range(n))
    return ReturnsPanel(dates=dates, assets=assets, values=values)


def make_prices(values: np.ndarray, sectors=None) -> PricePanel:
    n, k = values.shape
    tickers = [f"T{idx:02d}" for idx in range(k)]
    if sectors is None:
        sectors = {t: ("all",) for t in tickers}
    assets = tuple(AssetMeta(ticker=t, asset_class="crypto",
                             sectors=frozenset(sectors[t])) for t in tickers)
    start = dt.date(2020, 1, 1)
    dates = tuple(start + dt.timedelta(days=i) for i in range(n))
    return PricePanel(dates=dates, assets=assets, prices=values)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_returns(rng):
    return make_returns(rng.normal(0.0, 0.02, size=(220, 6)))


@pytest.fixture
def demo_files():
    from corrspec.datasets import demo_paths
    return demo_paths()
