"""Command-line entry points.

Each subcommand exposes one analysis stage; ``pipeline`` chains them all.
Flags always override config-file values.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, pipeline, plots
from .changepoint import (RJMCMCConfig, extract_posterior, load_chain,
                          run_rjmcmc, save_chain)
from .ingest import (IngestError, load_panel, load_prices, log_returns,
                     save_panel, sector_membership, sector_partition)
from .mjw import DistributionSet, IndexDistribution, mjw_matrix
from .rmt import time_varying_rmt, write_series_csv
from .rollcorr import rolling_correlation_series
from .sectors import agglomerative_cluster, l1_distance_matrix, variance_paths
from .spectra import spectral_distance_matrix, tv_spectrum
from .portfolio import sweep


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints: {text!r}") from exc


def _add_panel_arg(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--panel", required=True, help="panel JSON from `corrspec ingest`")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrspec",
        description="Rolling correlation spectra, spectral regime detection, "
                    "and trailing-window portfolio simulation.")
    parser.add_argument("--version", action="version", version=f"corrspec {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log at DEBUG instead of INFO")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="align a price CSV into a panel JSON")
    p.add_argument("--prices", required=True)
    p.add_argument("--sectors", required=True)
    p.add_argument("--asset-class", default=None)
    p.add_argument("--out", required=True)

    p = subs.add_parser("rollcorr", help="rolling correlation matrices to npz")
    _add_panel_arg(p)
    p.add_argument("--window", type=int, default=150)
    p.add_argument("--out", required=True)

    p = subs.add_parser("rmt", help="eigenspectrum series against the random-matrix null")
    _add_panel_arg(p)
    p.add_argument("--window", type=int, default=150)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", default=None, help="optional SVG path for the series plot")

    p = subs.add_parser("sectors", help="sector variance paths and their clustering")
    _add_panel_arg(p)
    p.add_argument("--window", type=int, default=150)
    p.add_argument("--linkage", choices=("average", "single", "complete"),
                   default="average")
    p.add_argument("--out", required=True, help="output directory")

    p = subs.add_parser("changepoints", help="spectral regime detection for one series")
    _add_panel_arg(p)
    p.add_argument("--series", required=True,
                   help="ticker, or sector name (runs its representative)")
    p.add_argument("--representative", default=None,
                   help="ticker to use when --series names a sector")
    p.add_argument("--iterations", type=int, default=10000)
    p.add_argument("--burnin", type=int, default=5000)
    p.add_argument("--tmin", type=int, default=40)
    p.add_argument("--max-segments", type=int, default=10)
    p.add_argument("--basis", type=int, default=10)
    p.add_argument("--pi", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="chain output path (.json.gz)")

    p = subs.add_parser("spectra", help="time-varying spectra from saved chains")
    _add_panel_arg(p)
    p.add_argument("--chains", required=True, nargs="+",
                   help="label=chain.json.gz pairs")
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--out", required=True, help="output directory")

    p = subs.add_parser("mjw", help="distances between saved regime posteriors")
    p.add_argument("--posteriors", required=True, nargs="+",
                   help="label=posterior.json pairs")
    p.add_argument("--order", type=float, default=1.0)
    p.add_argument("--empty-penalty", type=float, default=None)
    p.add_argument("--out", required=True)

    p = subs.add_parser("portfolio", help="trailing-window simulation sweep")
    _add_panel_arg(p)
    p.add_argument("--windows", type=_int_list, default=[120, 150, 180])
    p.add_argument("--best", type=_int_list, default=[2, 3, 4, 5])
    p.add_argument("--oos", action="store_true",
                   help="book the day after each window instead of its last day")
    p.add_argument("--out", required=True)

    p = subs.add_parser("pipeline", help="run every stage and write a manifest")
    p.add_argument("--config", default=None, help="YAML or JSON config file")
    p.add_argument("--prices", default=None)
    p.add_argument("--sectors", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--burnin", type=int, default=None)
    p.add_argument("--no-plots", action="store_true")

    return parser


def _resolve_series(panel, name: str, representative: str | None) -> str:
    """A ticker that exists always wins; otherwise treat ``name`` as a sector."""
    if name in panel.tickers:
        return name
    membership = sector_membership(panel)
    if name not in membership:
        raise IngestError(f"{name!r} is neither a ticker nor a sector")
    if representative is not None:
        if representative not in membership[name]:
            raise IngestError(
                f"{representative!r} is not a member of sector {name!r}")
        return representative
    return membership[name][0]


def _parse_labeled(pairs: list[str], what: str) -> dict[str, Path]:
    out: dict[str, Path] = {}
    for pair in pairs:
        label, sep, path = pair.partition("=")
        if not sep or not label or not path:
            raise IngestError(f"expected label=path for {what}, got {pair!r}")
        if label in out:
            raise IngestError(f"duplicate {what} label {label!r}")
        out[label] = Path(path)
    return out


def _cmd_ingest(args) -> int:
    panel = load_prices(args.prices, args.sectors, asset_class=args.asset_class)
    save_panel(panel, args.out)
    print(f"wrote {args.out}: {panel.shape[0]} dates x {panel.shape[1]} tickers")
    return 0


def _cmd_rollcorr(args) -> int:
    panel = load_panel(args.panel)
    returns = log_returns(panel)
    mats = list(rolling_correlation_series(returns, args.window))
    arrays = {f"t{m.t}": m.values for m in mats}
    np.savez_compressed(args.out, tickers=np.array(mats[0].tickers),
                        times=np.array([m.t for m in mats]), **arrays)
    print(f"wrote {args.out}: {len(mats)} matrices of size {len(mats[0].tickers)}")
    return 0


def _cmd_rmt(args) -> int:
    panel = load_panel(args.panel)
    returns = log_returns(panel)
    mats = list(rolling_correlation_series(returns, args.window))
    series = time_varying_rmt(mats, args.window)
    write_series_csv(series, args.out)
    above = int(np.sum(series.nonrandom > 0))
    print(f"wrote {args.out}: {series.times.size} windows, "
          f"{above} with structure above the null edge")
    if args.plot:
        plots.plot_rmt_series(series, args.plot)
        print(f"wrote {args.plot}")
    return 0


def _cmd_sectors(args) -> int:
    panel = load_panel(args.panel)
    returns = log_returns(panel)
    paths = variance_paths(sector_partition(returns), args.window)
    dist = l1_distance_matrix(paths)
    dend = agglomerative_cluster(dist, linkage=args.linkage)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pipeline._write_distance_csv(dist, out / "variance_path_distances.csv")
    pipeline._write_dendrogram_json(dend, out / "variance_path_dendrogram.json")
    plots.plot_dendrogram(dend, out / "variance_path_dendrogram.svg",
                          f"{args.linkage} linkage")
    print(f"wrote {out}: distances, dendrogram JSON and SVG "
          f"({len(paths)} sectors)")
    return 0


def _cmd_changepoints(args) -> int:
    panel = load_panel(args.panel)
    returns = log_returns(panel)
    ticker = _resolve_series(returns, args.series, args.representative)
    x = returns.column(ticker)
    config = RJMCMCConfig(iterations=args.iterations, burnin=args.burnin,
                          t_min=args.tmin, max_segments=args.max_segments,
                          n_basis=args.basis, mix_pi=args.pi, seed=args.seed)
    result = run_rjmcmc(x, config)
    save_chain(result, args.out)
    posterior = result.posterior()
    modes = [d.mode() for d in posterior.distributions]
    print(f"wrote {args.out}: series {ticker}, "
          f"{posterior.map_m} segments, boundaries at {modes}")
    return 0


def _cmd_spectra(args) -> int:
    panel = load_panel(args.panel)
    returns = log_returns(panel)
    chains = _parse_labeled(args.chains, "chain")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    surfaces = {}
    for label, chain_path in chains.items():
        ticker = _resolve_series(returns, label, None)
        samples, meta = load_chain(chain_path)
        posterior = extract_posterior(samples)
        surfaces[label] = tv_spectrum(returns.column(ticker), posterior,
                                      samples, n_freq=args.grid)
        pipeline._write_surface_csv(surfaces[label], out / f"tv_spectrum_{label}.csv")
    if len(surfaces) >= 2:
        dist = spectral_distance_matrix(surfaces)
        pipeline._write_distance_csv(dist, out / "spectral_distances.csv")
    print(f"wrote {out}: {len(surfaces)} spectral surfaces")
    return 0


def _cmd_mjw(args) -> int:
    paths = _parse_labeled(args.posteriors, "posterior")
    sets = []
    for label in sorted(paths):
        doc = json.loads(Path(paths[label]).read_text())
        members = tuple(
            IndexDistribution.from_mapping({int(k): float(v) for k, v in d.items()})
        for d in doc["distributions"])
        sets.append(DistributionSet(label=label, members=members))
    dist = mjw_matrix(sets, order=args.order, empty_set_penalty=args.empty_penalty)
    pipeline._write_distance_csv(dist, Path(args.out))
    print(f"wrote {args.out}: {len(sets)} regime sets")
    return 0


def _cmd_portfolio(args) -> int:
    panel = load_panel(args.panel)
    returns = log_returns(panel)
    membership = sector_membership(returns)
    rows = sweep(returns, membership, args.windows, args.best,
                 out_of_sample=args.oos)
    pipeline._write_sweep_csv(rows, Path(args.out))
    print(f"wrote {args.out}: {len(rows)} sweep rows")
    return 0


def _cmd_pipeline(args) -> int:
    overrides = {"prices": args.prices, "sectors": args.sectors,
                 "out_dir": args.out, "seed": args.seed, "window": args.window,
                 "iterations": args.iterations, "burnin": args.burnin}
    if args.no_plots:
        overrides["make_plots"] = False
    cfg = pipeline.load_config(args.config, overrides)
    result = pipeline.run_pipeline(cfg)
    print(f"wrote {result.manifest_path}: {len(result.artifacts)} artifacts")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "rollcorr": _cmd_rollcorr,
    "rmt": _cmd_rmt,
    "sectors": _cmd_sectors,
    "changepoints": _cmd_changepoints,
    "spectra": _cmd_spectra,
    "mjw": _cmd_mjw,
    "portfolio": _cmd_portfolio,
    "pipeline": _cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, pipeline.PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
