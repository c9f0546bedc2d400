"""End-to-end orchestration: every analysis stage over one input panel.

The pipeline runs per asset class: align prices, roll correlation windows,
track the eigenspectrum against the random-matrix null, cluster sector
variance paths, detect spectral regimes per sector representative, compare
regime sets and spectral surfaces, and simulate the trailing portfolios.
Every file written is recorded in ``manifest.json`` with its SHA-256, and a
rerun with the same inputs and seed reproduces every byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml

from . import plots
from .changepoint import ChangepointPosterior, RJMCMCConfig, run_rjmcmc, save_chain
from .ingest import (load_prices, load_sector_map, log_returns, save_panel,
                     sector_membership, sector_partition)
from .mjw import DistributionSet, mjw_matrix
from .rmt import (eigen_spectrum, reported_edge_discrepancies, time_varying_rmt,
                  write_series_csv)
from .rollcorr import rolling_correlation_series
from .sectors import DistanceMatrix, agglomerative_cluster, l1_distance_matrix, variance_paths
from .spectra import TVSpectrum, spectral_distance_matrix, tv_spectrum
from .portfolio import sweep

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "CORRSPEC_CONFIG"


class PipelineError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage {stage!r}: {message}")


@dataclass(frozen=True)
class PipelineConfig:
    """Inputs, outputs and stage settings for one pipeline run."""

    prices: str = ""
    sectors: str = ""
    out_dir: str = ""
    asset_classes: tuple[str, ...] | None = None
    window: int = 150
    linkage: str = "average"
    freq_grid: int = 64
    mjw_order: float = 1.0
    sweep_windows: tuple[int, ...] = (120, 150, 180)
    sweep_best: tuple[int, ...] = (2, 3, 4, 5)
    seed: int = 0
    iterations: int = 10000
    burnin: int = 5000
    t_min: int = 40
    max_segments: int = 10
    n_basis: int = 10
    mix_pi: float = 0.8
    representatives: Mapping[str, str] = field(default_factory=dict)
    make_plots: bool = True

    def rjmcmc_config(self, seed: int) -> RJMCMCConfig:
        return RJMCMCConfig(iterations=self.iterations, burnin=self.burnin,
                            t_min=self.t_min, max_segments=self.max_segments,
                            n_basis=self.n_basis, mix_pi=self.mix_pi, seed=seed)


_TUPLE_FIELDS = {"asset_classes", "sweep_windows", "sweep_best"}


def load_config(path=None, overrides: Mapping | None = None) -> PipelineConfig:
    """Build a config from an optional file plus explicit overrides.

    The file may be YAML or JSON, keyed by field name.  ``path=None`` falls
    back to the ``CORRSPEC_CONFIG`` environment variable; overrides (CLI
    flags) always win over file values.
    """
    doc: dict = {}
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is not None:
        text = Path(path).read_text()
        doc = (json.loads(text) if str(path).endswith(".json")
               else yaml.safe_load(text)) or {}
        if not isinstance(doc, dict):
            raise PipelineError("config", f"{path}: expected a mapping")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise PipelineError("config", f"unknown config keys: {', '.join(unknown)}")
    merged = dict(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    for key in _TUPLE_FIELDS & set(merged):
        if merged[key] is not None:
            merged[key] = tuple(merged[key])
    return PipelineConfig(**merged)


@dataclass
class PipelineResult:
    out_dir: Path
    artifacts: list[str]
    manifest_path: Path


class _ArtifactLog:
    """Tracks every file the run writes, for the closing manifest."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.relative_paths: list[str] = []

    def register(self, path: Path) -> Path:
        rel = Path(path).relative_to(self.out_dir).as_posix()
        if rel in self.relative_paths:
            raise PipelineError("manifest", f"artifact {rel} written twice")
        self.relative_paths.append(rel)
        return Path(path)

    def manifest(self) -> dict:
        entries = []
        for rel in sorted(self.relative_paths):
            blob = (self.out_dir / rel).read_bytes()
            entries.append({"path": rel, "bytes": len(blob),
                            "sha256": hashlib.sha256(blob).hexdigest()})
        return {"artifacts": entries}


def _write_distance_csv(matrix: DistanceMatrix, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + list(matrix.labels))
        for i, label in enumerate(matrix.labels):
            writer.writerow([label] + [repr(float(v)) for v in matrix.values[i]])


def _write_dendrogram_json(dend, path: Path) -> None:
    doc = {"labels": list(dend.labels), "linkage": dend.linkage,
           "merges": [[a, b, h, s] for a, b, h, s in dend.merges]}
    path.write_text(json.dumps(doc, sort_keys=True) + "\n")


def _write_posterior_json(posterior: ChangepointPosterior, path: Path) -> None:
    doc = {"map_m": posterior.map_m,
           "m_counts": {str(k): v for k, v in posterior.m_counts.items()},
           "distributions": [{str(int(i)): float(p)
                              for i, p in zip(d.support, d.probs)}
                             for d in posterior.distributions]}
    path.write_text(json.dumps(doc, sort_keys=True) + "\n")


def _write_surface_csv(surface: TVSpectrum, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"f{f:.6f}" for f in surface.freqs])
        for i, t in enumerate(surface.times):
            writer.writerow([int(t)] + [repr(float(v)) for v in surface.surface[i]])


def _write_sweep_csv(rows, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window", "best", "algo1_total", "algo2_total"])
        for row in rows:
            writer.writerow([row.window, row.best,
                             repr(row.algo1_total), repr(row.algo2_total)])


def _maybe_plot(log: _ArtifactLog, fn, *args, **kwargs) -> None:
    """Figures are best-effort: a drawing failure is logged, not fatal."""
    try:
        log.register(fn(*args, **kwargs))
    except Exception:  # pragma: no cover - matplotlib edge cases
        logger.exception("plot emission failed for %s", getattr(fn, "__name__", fn))


def _series_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


def _run_class(cfg: PipelineConfig, asset_class: str, log: _ArtifactLog) -> None:
    out = log.out_dir / asset_class
    out.mkdir(parents=True, exist_ok=True)
    plot_dir = out / "plots"

    # --- ingest ---
    try:
        panel = load_prices(cfg.prices, cfg.sectors, asset_class=asset_class)
    except Exception as exc:
        raise PipelineError("ingest", f"{asset_class}: {exc}") from exc
    save_panel(panel, log.register(out / "panel.json"))
    returns = log_returns(panel)

    # --- rolling spectra against the random-matrix null ---
    try:
        matrices = list(rolling_correlation_series(returns, cfg.window))
        series = time_varying_rmt(matrices, cfg.window)
    except Exception as exc:
        raise PipelineError("rmt", f"{asset_class}: {exc}") from exc
    write_series_csv(series, log.register(out / "rmt_series.csv"))
    if cfg.make_plots:
        pooled = np.concatenate([eigen_spectrum(m).eigenvalues for m in matrices])
        _maybe_plot(log, plots.plot_mp_density, pooled, series.bounds[-1],
                    plot_dir / "eigenvalue_density.svg")
        _maybe_plot(log, plots.plot_rmt_series, series, plot_dir / "rmt_series.svg")

    # --- sector variance paths and clustering ---
    try:
        parts = sector_partition(returns)
        paths = variance_paths(parts, cfg.window)
        path_dist = l1_distance_matrix(paths)
        dend = agglomerative_cluster(path_dist, linkage=cfg.linkage)
    except Exception as exc:
        raise PipelineError("sectors", f"{asset_class}: {exc}") from exc
    with log.register(out / "variance_paths.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [p.sector for p in paths])
        for i in range(paths[0].times.size):
            writer.writerow([int(paths[0].times[i])]
                            + [repr(float(p.values[i])) for p in paths])
    _write_distance_csv(path_dist, log.register(out / "variance_path_distances.csv"))
    _write_dendrogram_json(dend, log.register(out / "variance_path_dendrogram.json"))
    if cfg.make_plots:
        _maybe_plot(log, plots.plot_variance_paths, paths,
                    plot_dir / "variance_paths.svg")
        _maybe_plot(log, plots.plot_dendrogram, dend,
                    plot_dir / "variance_path_dendrogram.svg",
                    f"{asset_class}: variance-path clustering")

    # --- changepoints per sector representative ---
    membership = sector_membership(returns)
    posteriors: dict[str, ChangepointPosterior] = {}
    surfaces: dict[str, TVSpectrum] = {}
    for index, sector in enumerate(sorted(membership)):
        ticker = cfg.representatives.get(sector, membership[sector][0])
        if ticker not in membership[sector]:
            raise PipelineError(
                "changepoints",
                f"representative {ticker!r} is not a member of sector {sector!r}")
        x = returns.column(ticker)
        rj_cfg = cfg.rjmcmc_config(_series_seed(cfg.seed, index))
        try:
            result = run_rjmcmc(x, rj_cfg)
            posterior = result.posterior()
        except Exception as exc:
            raise PipelineError("changepoints", f"{sector} ({ticker}): {exc}") from exc
        posteriors[sector] = posterior
        save_chain(result, log.register(out / f"chain_{sector}.json.gz"))
        _write_posterior_json(posterior, log.register(out / f"posterior_{sector}.json"))
        with log.register(out / f"chain_summary_{sector}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sweep", "m", "log_posterior"])
            for sweep_i in range(result.trace_m.size):
                writer.writerow([sweep_i, int(result.trace_m[sweep_i]),
                                 repr(float(result.trace_logpost[sweep_i]))])
        if cfg.make_plots:
            _maybe_plot(log, plots.plot_changepoint_posterior, x, posterior,
                        plot_dir / f"changepoints_{sector}.svg",
                        f"{sector} ({ticker})")

        # --- time-varying spectrum of the same series ---
        try:
            surfaces[sector] = tv_spectrum(x, posterior, result.samples,
                                           n_freq=cfg.freq_grid)
        except Exception as exc:
            raise PipelineError("spectra", f"{sector} ({ticker}): {exc}") from exc
        _write_surface_csv(surfaces[sector],
                           log.register(out / f"tv_spectrum_{sector}.csv"))
        if cfg.make_plots:
            _maybe_plot(log, plots.plot_tv_spectrum, surfaces[sector],
                        plot_dir / f"tv_spectrum_{sector}.svg", sector)

    # --- distances between regime structures ---
    try:
        sets = [DistributionSet(label=s, members=posteriors[s].distributions)
                for s in sorted(posteriors)]
        mjw = mjw_matrix(sets, order=cfg.mjw_order,
                         empty_set_penalty=float(returns.values.shape[0]))
        mjw_dend = agglomerative_cluster(mjw, linkage=cfg.linkage) \
            if len(sets) >= 2 else None
    except Exception as exc:
        raise PipelineError("mjw", f"{asset_class}: {exc}") from exc
    _write_distance_csv(mjw, log.register(out / "mjw_distances.csv"))
    flags = {"empty_set_penalty": float(returns.values.shape[0]),
             "empty_sets": sorted(s.label for s in sets if not s.members)}
    log.register(out / "mjw_flags.json").write_text(
        json.dumps(flags, sort_keys=True) + "\n")
    if mjw_dend is not None:
        _write_dendrogram_json(mjw_dend, log.register(out / "mjw_dendrogram.json"))
        if cfg.make_plots:
            _maybe_plot(log, plots.plot_dendrogram, mjw_dend,
                        plot_dir / "mjw_dendrogram.svg",
                        f"{asset_class}: regime-set clustering")

    try:
        spec_dist = spectral_distance_matrix(surfaces)
        spec_dend = agglomerative_cluster(spec_dist, linkage=cfg.linkage) \
            if len(surfaces) >= 2 else None
    except Exception as exc:
        raise PipelineError("spectra", f"{asset_class}: {exc}") from exc
    _write_distance_csv(spec_dist, log.register(out / "spectral_distances.csv"))
    if spec_dend is not None:
        _write_dendrogram_json(spec_dend, log.register(out / "spectral_dendrogram.json"))
        if cfg.make_plots:
            _maybe_plot(log, plots.plot_dendrogram, spec_dend,
                        plot_dir / "spectral_dendrogram.svg",
                        f"{asset_class}: spectral-surface clustering")

    # --- portfolio sweeps ---
    try:
        rows = sweep(returns, membership, cfg.sweep_windows, cfg.sweep_best)
        rows_oos = sweep(returns, membership, cfg.sweep_windows, cfg.sweep_best,
                         out_of_sample=True)
    except Exception as exc:
        raise PipelineError("portfolio", f"{asset_class}: {exc}") from exc
    _write_sweep_csv(rows, log.register(out / "portfolio_sweep.csv"))
    _write_sweep_csv(rows_oos, log.register(out / "portfolio_sweep_oos.csv"))


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Run every stage; returns the artifact listing.

    Raises
    ------
    PipelineError
        From the first failing stage, tagged with the stage name.
    """
    if not cfg.prices or not cfg.sectors or not cfg.out_dir:
        raise PipelineError("config", "prices, sectors and out_dir are required")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = _ArtifactLog(out_dir)

    try:
        metas = load_sector_map(cfg.sectors)
    except Exception as exc:
        raise PipelineError("ingest", str(exc)) from exc
    classes = sorted({m.asset_class for m in metas.values()})
    if cfg.asset_classes is not None:
        missing = sorted(set(cfg.asset_classes) - set(classes))
        if missing:
            raise PipelineError(
                "ingest", f"requested classes not in sector map: {', '.join(missing)}")
        classes = sorted(cfg.asset_classes)

    notes = [d.describe() for d in reported_edge_discrepancies() if d.conflicts]
    log.register(out_dir / "mp_edge_notes.txt").write_text(
        "\n".join(notes) + "\n" if notes else "no conflicts\n")

    for asset_class in classes:
        _run_class(cfg, asset_class, log)

    manifest = log.manifest()
    manifest["seed"] = cfg.seed
    manifest["classes"] = classes
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return PipelineResult(out_dir=out_dir, artifacts=sorted(log.relative_paths),
                          manifest_path=manifest_path)
