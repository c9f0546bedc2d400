import datetime as dt
import json
from pathlib import Path

import numpy as np
import pytest

from corrspec.ingest import (AssetMeta, IngestError, PricePanel, ZeroVarianceError,
                             load_panel, load_prices, load_sector_map, log_returns,
                             save_panel, sector_membership, sector_partition,
                             standardize_window)

from conftest import make_prices, make_returns


PRICES_HEADER = "date,ticker,close\n"
SECTORS_HEADER = "ticker,asset_class,sector\n"


def write_prices(tmp_path: Path, rows: list[str], name="prices.csv") -> Path:
    path = tmp_path / name
    path.write_text(PRICES_HEADER + "".join(r + "\n" for r in rows))
    return path


def write_sectors(tmp_path: Path, rows: list[str], name="sectors.csv") -> Path:
    path = tmp_path / name
    path.write_text(SECTORS_HEADER + "".join(r + "\n" for r in rows))
    return path


class TestSectorMap:
    def test_multi_sector_ticker(self, tmp_path):
        path = write_sectors(tmp_path, ["AAA,crypto,defi", "AAA,crypto,wallet",
                                        "BBB,equity,tech"])
        metas = load_sector_map(path)
        assert metas["AAA"].sectors == frozenset({"defi", "wallet"})
        assert metas["BBB"].asset_class == "equity"

    def test_class_filter(self, tmp_path):
        path = write_sectors(tmp_path, ["AAA,crypto,defi", "BBB,equity,tech"])
        metas = load_sector_map(path, asset_class="equity")
        assert set(metas) == {"BBB"}

    def test_conflicting_class_rejected(self, tmp_path):
        path = write_sectors(tmp_path, ["AAA,crypto,defi", "AAA,equity,defi"])
        with pytest.raises(IngestError, match="AAA"):
            load_sector_map(path)

    def test_duplicate_sector_row_rejected(self, tmp_path):
        path = write_sectors(tmp_path, ["AAA,crypto,defi", "AAA,crypto,defi"])
        with pytest.raises(IngestError):
            load_sector_map(path)

    def test_unknown_class_rejected(self, tmp_path):
        path = write_sectors(tmp_path, ["AAA,commodity,metals"])
        with pytest.raises(IngestError, match="commodity"):
            load_sector_map(path)


class TestLoadPrices:
    def test_alignment_intersects_dates(self, tmp_path):
        prices = write_prices(tmp_path, [
            "2021-01-01,AAA,10", "2021-01-02,AAA,11", "2021-01-03,AAA,12",
            "2021-01-01,BBB,20", "2021-01-03,BBB,22",
        ])
        sectors = write_sectors(tmp_path, ["AAA,crypto,defi", "BBB,crypto,defi"])
        panel = load_prices(prices, sectors)
        assert panel.shape == (2, 2)
        assert [d.isoformat() for d in panel.dates] == ["2021-01-01", "2021-01-03"]
        assert panel.prices[1, 0] == 12.0

    def test_tickers_sorted(self, tmp_path):
        prices = write_prices(tmp_path, [
            "2021-01-01,ZZZ,5", "2021-01-01,AAA,10",
            "2021-01-02,ZZZ,6", "2021-01-02,AAA,11",
        ])
        sectors = write_sectors(tmp_path, ["ZZZ,crypto,defi", "AAA,crypto,defi"])
        panel = load_prices(prices, sectors)
        assert panel.tickers == ("AAA", "ZZZ")

    def test_nonpositive_price_names_offender(self, tmp_path):
        prices = write_prices(tmp_path, [
            "2021-01-01,AAA,10", "2021-01-02,AAA,-3",
        ])
        sectors = write_sectors(tmp_path, ["AAA,crypto,defi"])
        with pytest.raises(IngestError, match="AAA.*2021-01-02"):
            load_prices(prices, sectors)

    def test_price_ticker_missing_from_map(self, tmp_path):
        prices = write_prices(tmp_path, ["2021-01-01,AAA,10", "2021-01-02,AAA,11"])
        sectors = write_sectors(tmp_path, ["BBB,crypto,defi"])
        with pytest.raises(IngestError, match="AAA"):
            load_prices(prices, sectors)

    def test_map_ticker_missing_from_prices(self, tmp_path):
        prices = write_prices(tmp_path, ["2021-01-01,AAA,10", "2021-01-02,AAA,11"])
        sectors = write_sectors(tmp_path, ["AAA,crypto,defi", "CCC,crypto,defi"])
        with pytest.raises(IngestError, match="CCC"):
            load_prices(prices, sectors)

    def test_class_filter_ignores_other_class_prices(self, tmp_path):
        prices = write_prices(tmp_path, [
            "2021-01-01,AAA,10", "2021-01-02,AAA,11",
            "2021-01-01,BBB,20", "2021-01-02,BBB,21",
        ])
        sectors = write_sectors(tmp_path, ["AAA,crypto,defi", "BBB,equity,tech"])
        panel = load_prices(prices, sectors, asset_class="crypto")
        assert panel.tickers == ("AAA",)

    def test_duplicate_observation_rejected(self, tmp_path):
        prices = write_prices(tmp_path, [
            "2021-01-01,AAA,10", "2021-01-01,AAA,10", "2021-01-02,AAA,11",
        ])
        sectors = write_sectors(tmp_path, ["AAA,crypto,defi"])
        with pytest.raises(IngestError):
            load_prices(prices, sectors)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text("day,ticker,close\n2021-01-01,AAA,10\n")
        sectors = write_sectors(tmp_path, ["AAA,crypto,defi"])
        with pytest.raises(IngestError):
            load_prices(path, sectors)


class TestReturns:
    def test_log_returns_values(self):
        prices = np.array([[100.0, 50.0], [110.0, 45.0], [121.0, 54.0]])
        panel = make_prices(prices)
        returns = log_returns(panel)
        assert returns.shape == (2, 2)
        np.testing.assert_allclose(returns.values[:, 0], np.log(1.1), rtol=1e-12)
        np.testing.assert_allclose(returns.values[1, 1], np.log(54.0 / 45.0),
                                   rtol=1e-12)
        assert returns.dates == panel.dates[1:]

    def test_returns_are_readonly(self, small_returns):
        with pytest.raises(ValueError):
            small_returns.values[0, 0] = 1.0

    def test_column_lookup(self, small_returns):
        col = small_returns.column("T03")
        np.testing.assert_array_equal(col, small_returns.values[:, 3])
        with pytest.raises(KeyError):
            small_returns.column("NOPE")


class TestStandardize:
    def test_population_moments(self, rng):
        returns = make_returns(rng.normal(size=(60, 4)))
        z = standardize_window(returns, window=30, t=45)
        assert z.shape == (30, 4)
        np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(z.std(axis=0), 1.0, atol=1e-12)

    def test_window_rows_end_at_t(self):
        values = np.arange(40.0).reshape(20, 2)
        values[:, 1] = values[:, 1] ** 1.5
        returns = make_returns(values)
        z = standardize_window(returns, window=5, t=10)
        raw = values[6:11, 0]
        np.testing.assert_allclose(
            z[:, 0], (raw - raw.mean()) / raw.std(), rtol=1e-12)

    def test_zero_variance_names_tickers(self):
        values = np.ones((30, 3))
        values[:, 0] = np.linspace(0.0, 1.0, 30)
        returns = make_returns(values)
        with pytest.raises(ZeroVarianceError) as err:
            standardize_window(returns, window=10, t=15)
        assert set(err.value.tickers) == {"T01", "T02"}

    def test_bad_t_rejected(self, small_returns):
        with pytest.raises(IndexError):
            standardize_window(small_returns, window=30, t=10)


class TestSectors:
    def test_partition_duplicates_multi_sector_members(self, rng):
        values = rng.normal(size=(50, 3))
        sectors = {"T00": ("a",), "T01": ("a", "b"), "T02": ("b",)}
        returns = make_returns(values, sectors=sectors)
        parts = sector_partition(returns)
        assert sorted(parts) == ["a", "b"]
        assert parts["a"].tickers == ("T00", "T01")
        assert parts["b"].tickers == ("T01", "T02")
        np.testing.assert_array_equal(parts["b"].values[:, 0], values[:, 1])

    def test_membership(self, rng):
        returns = make_returns(rng.normal(size=(10, 2)),
                               sectors={"T00": ("x",), "T01": ("x",)})
        assert sector_membership(returns) == {"x": ("T00", "T01")}


class TestPanelRoundTrip:
    def test_save_load(self, tmp_path, rng):
        panel = make_prices(np.exp(rng.normal(size=(25, 3))))
        path = tmp_path / "panel.json"
        save_panel(panel, path)
        loaded = load_panel(path)
        assert loaded.dates == panel.dates
        assert loaded.tickers == panel.tickers
        assert [a.sectors for a in loaded.assets] == [a.sectors for a in panel.assets]
        np.testing.assert_allclose(loaded.prices, panel.prices, rtol=0, atol=0)

    def test_save_is_deterministic(self, tmp_path, rng):
        panel = make_prices(np.exp(rng.normal(size=(25, 3))))
        save_panel(panel, tmp_path / "a.json")
        save_panel(panel, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


class TestValidation:
    def test_unsorted_dates_rejected(self):
        dates = (dt.date(2021, 1, 2), dt.date(2021, 1, 1))
        assets = (AssetMeta("AAA", "crypto", ("s",)),)
        with pytest.raises(IngestError):
            PricePanel(dates=dates, assets=assets,
                       prices=np.array([[1.0], [2.0]]))

    def test_nonfinite_rejected(self):
        with pytest.raises(IngestError):
            make_returns(np.array([[0.0, np.nan]] * 3))

    def test_empty_sector_tuple_rejected(self):
        with pytest.raises(IngestError):
            AssetMeta("AAA", "crypto", ())
