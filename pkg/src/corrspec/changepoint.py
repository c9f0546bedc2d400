"""Reversible-jump MCMC over piecewise-stationary segment models.

A series of length ``n`` is partitioned into ``m`` contiguous segments, each
at least ``t_min`` long.  Each segment carries a smooth log-spectrum (cosine
basis, coefficients ``beta``) scored against its periodogram by the
frequency-domain likelihood in :mod:`corrspec.whittle`, plus a hierarchical
Gaussian prior on the coefficients with segment-level variance ``tau2``.

The sampler mixes three move families per sweep:

* a between-model move (birth splits a segment, death merges two) with the
  dimension-matching construction: ``tau2`` splits through an auxiliary
  uniform ``u``, coefficients are drawn from Gaussian approximations at the
  posterior mode, and the acceptance ratio carries the Jacobian
  ``2 * tau2 / (u (1 - u))``;
* a within-model move relocating a changepoint through a mixture of a
  uniform redraw over its admissible range and a +-1 random walk, redrawing
  the two adjacent coefficient vectors;
* a Gibbs update of every segment's ``tau2`` from its conjugate
  inverse-gamma conditional.

Priors: ``beta_0 ~ N(0, sigma0_sq)``, higher coefficients ``~ N(0, tau2)``,
``tau2 ~ InvGamma(shape, scale)``, segment count uniform on ``1..M``, and
changepoint placement uniform over admissible partitions (which penalizes
extra segments through the log-count of placements).
"""

from __future__ import annotations

import gzip
import json
import math
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import whittle
from .mjw import IndexDistribution

LOG_2PI = math.log(2.0 * math.pi)


class ChangepointError(ValueError):
    """Invalid sampler configuration or inconsistent chain state."""


# --- configuration and model state ---------------------------------------

@dataclass(frozen=True)
class RJMCMCConfig:
    """Sampler settings.

    ``t_min`` is the hard minimum segment length, ``max_segments`` the hard
    cap on the segment count, ``n_basis`` the number of cosine terms beyond
    the constant, and ``mix_pi`` the weight of the uniform component in the
    changepoint-relocation mixture.
    """

    iterations: int = 10000
    burnin: int = 5000
    t_min: int = 40
    max_segments: int = 10
    n_basis: int = 10
    mix_pi: float = 0.8
    seed: int = 0
    prior_tau_shape: float = 1.0
    prior_tau_scale: float = 1.0
    sigma0_sq: float = 100.0
    mode_tol: float = 1e-10
    mode_max_iter: int = 100

    def validate(self, n: int) -> None:
        if self.iterations <= 0 or not 0 <= self.burnin < self.iterations:
            raise ChangepointError(
                f"need 0 <= burnin < iterations, got {self.burnin}/{self.iterations}")
        if self.t_min < 2 * self.n_basis:
            raise ChangepointError(
                f"t_min={self.t_min} too small for {self.n_basis} basis terms "
                f"(need t_min >= {2 * self.n_basis})")
        if self.max_segments < 1:
            raise ChangepointError("max_segments must be >= 1")
        if self.max_segments * self.t_min > n:
            raise ChangepointError(
                f"max_segments * t_min = {self.max_segments * self.t_min} "
                f"exceeds series length {n}")
        if n < 2 * self.t_min:
            raise ChangepointError(
                f"series length {n} < 2 * t_min = {2 * self.t_min}")
        if not 0.0 < self.mix_pi < 1.0:
            raise ChangepointError(f"mix_pi must be in (0, 1), got {self.mix_pi}")
        if self.sigma0_sq <= 0 or self.prior_tau_shape <= 0 or self.prior_tau_scale <= 0:
            raise ChangepointError("prior scales must be positive")


@dataclass
class SegmentModel:
    """One partition with its per-segment parameters.

    ``xi`` has length ``m + 1`` with ``xi[0] = 0`` and ``xi[m] = n``;
    segment ``j`` covers rows ``xi[j] .. xi[j+1] - 1``.
    """

    xi: np.ndarray
    beta: tuple[np.ndarray, ...]
    tau2: np.ndarray

    @property
    def m(self) -> int:
        return len(self.xi) - 1

    def bounds(self, j: int) -> tuple[int, int]:
        return int(self.xi[j]), int(self.xi[j + 1])

    def lengths(self) -> np.ndarray:
        return np.diff(self.xi)


@dataclass
class ChainState:
    """A model plus its cached per-segment log-likelihoods."""

    model: SegmentModel
    seg_logliks: tuple[float, ...]


@dataclass(frozen=True)
class ChangepointPosterior:
    """MAP segment count and per-changepoint location distributions."""

    map_m: int
    distributions: tuple[IndexDistribution, ...]
    m_counts: dict[int, int]

    def __post_init__(self):
        if len(self.distributions) != self.map_m - 1:
            raise ChangepointError(
                f"{len(self.distributions)} location distributions for "
                f"map_m={self.map_m}; expected {self.map_m - 1}")


# --- priors ----------------------------------------------------------------

def _norm_logpdf(v: float, var: float) -> float:
    return -0.5 * (LOG_2PI + math.log(var) + v * v / var)


def log_beta_prior(beta: np.ndarray, tau2: float, sigma0_sq: float) -> float:
    """Gaussian log-prior: constant term against ``sigma0_sq``, rest against ``tau2``."""
    out = _norm_logpdf(float(beta[0]), sigma0_sq)
    rest = np.asarray(beta[1:], dtype=float)
    out += float(np.sum(-0.5 * (LOG_2PI + math.log(tau2) + rest * rest / tau2)))
    return out


def log_invgamma_pdf(x: float, shape: float, scale: float) -> float:
    if x <= 0:
        return -math.inf
    return (shape * math.log(scale) - math.lgamma(shape)
            - (shape + 1.0) * math.log(x) - scale / x)


def _log_comb(n: int, k: int) -> float:
    if k < 0 or k > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def log_admissible_partitions(n: int, m: int, t_min: int) -> float:
    """Log-count of changepoint placements with all segments >= t_min."""
    return _log_comb(n - m * t_min + m - 1, m - 1)


# --- per-series context ----------------------------------------------------

@dataclass(frozen=True)
class GaussianApprox:
    """Gaussian approximation at a segment's penalized-likelihood mode."""

    mean: np.ndarray
    chol_prec: np.ndarray
    log_det_prec: float

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.mean.size)
        return self.mean + solve_triangular(self.chol_prec.T, z, lower=False)

    def logpdf(self, beta: np.ndarray) -> float:
        y = self.chol_prec.T @ (np.asarray(beta, dtype=float) - self.mean)
        return 0.5 * self.log_det_prec - 0.5 * self.mean.size * LOG_2PI \
            - 0.5 * float(y @ y)


class SeriesContext:
    """One series plus caches for designs, periodograms and mode fits.

    Mode fits always start from the same deterministic ridge initialization,
    so an approximation for a given ``(lo, hi, tau2)`` is reproducible
    bit-for-bit no matter which move asks for it; forward and reverse
    proposal densities therefore cancel exactly in matched move pairs.
    """

    def __init__(self, x: np.ndarray, config: RJMCMCConfig):
        x = np.ascontiguousarray(x, dtype=float)
        if x.ndim != 1:
            raise ChangepointError(f"series must be 1-D, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ChangepointError("series contains non-finite values")
        config.validate(x.size)
        self.x = x
        self.n = x.size
        self.config = config
        self._design: dict[int, np.ndarray] = {}
        self._xtx: dict[int, np.ndarray] = {}
        self._perio: dict[tuple[int, int], np.ndarray] = {}
        self._approx: dict[tuple[int, int, float], GaussianApprox] = {}

    def design(self, length: int) -> np.ndarray:
        got = self._design.get(length)
        if got is None:
            freqs = whittle.fourier_frequencies(length)
            got = whittle.cosine_design(freqs, self.config.n_basis)
            self._design[length] = got
            self._xtx[length] = got.T @ got
        return got

    def periodogram(self, lo: int, hi: int) -> np.ndarray:
        key = (lo, hi)
        got = self._perio.get(key)
        if got is None:
            if len(self._perio) > 8192:
                self._perio.clear()
            got = whittle.periodogram(self.x[lo:hi])
            self._perio[key] = got
        return got

    def loglik(self, lo: int, hi: int, beta: np.ndarray) -> float:
        return whittle.loglik(self.periodogram(lo, hi), self.design(hi - lo), beta)

    def prior_precision(self, tau2: float) -> np.ndarray:
        prec = np.full(self.config.n_basis + 1, 1.0 / tau2)
        prec[0] = 1.0 / self.config.sigma0_sq
        return prec

    def approx(self, lo: int, hi: int, tau2: float) -> GaussianApprox:
        key = (lo, hi, float(tau2))
        got = self._approx.get(key)
        if got is None:
            if len(self._approx) > 2048:
                self._approx.clear()
            perio = self.periodogram(lo, hi)
            design = self.design(hi - lo)
            beta, neg_hess, _ = whittle.posterior_mode(
                perio, design, self.prior_precision(tau2),
                tol=self.config.mode_tol, max_iter=self.config.mode_max_iter,
                xtx=self._xtx[hi - lo])
            chol = np.linalg.cholesky(neg_hess)
            log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
            got = GaussianApprox(mean=beta, chol_prec=chol, log_det_prec=log_det)
            self._approx[key] = got
        return got

    def state_from_model(self, model: SegmentModel) -> ChainState:
        logliks = tuple(self.loglik(*model.bounds(j), model.beta[j])
                        for j in range(model.m))
        return ChainState(model=model, seg_logliks=logliks)


# --- standalone operations -------------------------------------------------

def periodogram(x: np.ndarray) -> np.ndarray:
    """Mean-removed periodogram at the positive Fourier frequencies."""
    return whittle.periodogram(x)


def segment_loglik(x: np.ndarray, beta: np.ndarray) -> float:
    """Frequency-domain segment log-likelihood at coefficients ``beta``.

    The basis order is inferred from ``len(beta) - 1``; the segment must be
    long enough that the periodogram has at least ``len(beta)`` ordinates.
    """
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    perio = whittle.periodogram(x)
    if perio.size < beta.size:
        raise ChangepointError(
            f"segment of length {x.size} has {perio.size} periodogram ordinates; "
            f"need at least {beta.size} for the basis")
    design = whittle.cosine_design(whittle.fourier_frequencies(x.size), beta.size - 1)
    return whittle.loglik(perio, design, beta)


def beta_mode_and_hessian(x: np.ndarray, tau2: float,
                          config: RJMCMCConfig = RJMCMCConfig(),
                          tol: float = 1e-8,
                          max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mode of the segment coefficients and the covariance there.

    Newton iteration on the penalized likelihood, run until the gradient norm
    drops below ``tol`` or ``max_iter`` steps; non-convergence raises.  The
    returned covariance is the inverse negative Hessian at the mode (always
    positive definite: the prior precision is strictly positive).
    """
    x = np.asarray(x, dtype=float)
    perio = whittle.periodogram(x)
    design = whittle.cosine_design(whittle.fourier_frequencies(x.size),
                                   config.n_basis)
    prec = np.full(config.n_basis + 1, 1.0 / tau2)
    prec[0] = 1.0 / config.sigma0_sq
    beta, neg_hess, _ = whittle.posterior_mode(perio, design, prec,
                                               tol=tol, max_iter=max_iter)
    return beta, np.linalg.inv(neg_hess)


# --- model surgery ---------------------------------------------------------

def split_model(model: SegmentModel, k: int, t_star: int, u: float,
                beta_left: np.ndarray, beta_right: np.ndarray) -> SegmentModel:
    """Replace segment ``k`` by two segments split at ``t_star``.

    The segment's ``tau2`` splits into ``u/(1-u) * tau2`` (left) and
    ``(1-u)/u * tau2`` (right), so the geometric mean is preserved.
    """
    tau = float(model.tau2[k])
    tau_left = u / (1.0 - u) * tau
    tau_right = (1.0 - u) / u * tau
    xi = np.concatenate([model.xi[:k + 1], [t_star], model.xi[k + 1:]])
    beta = model.beta[:k] + (np.asarray(beta_left, dtype=float),
                             np.asarray(beta_right, dtype=float)) + model.beta[k + 1:]
    tau2 = np.concatenate([model.tau2[:k], [tau_left, tau_right], model.tau2[k + 1:]])
    return SegmentModel(xi=xi, beta=beta, tau2=tau2)


def merge_model(model: SegmentModel, b: int, beta_merged: np.ndarray) -> SegmentModel:
    """Remove interior boundary ``b``, merging segments ``b-1`` and ``b``.

    The merged ``tau2`` is the geometric mean of the two parents (the exact
    inverse of :func:`split_model`).
    """
    tau_merged = math.sqrt(float(model.tau2[b - 1]) * float(model.tau2[b]))
    xi = np.concatenate([model.xi[:b], model.xi[b + 1:]])
    beta = model.beta[:b - 1] + (np.asarray(beta_merged, dtype=float),) \
        + model.beta[b + 1:]
    tau2 = np.concatenate([model.tau2[:b - 1], [tau_merged], model.tau2[b + 1:]])
    return SegmentModel(xi=xi, beta=beta, tau2=tau2)


def _splittable(model: SegmentModel, t_min: int) -> list[int]:
    lengths = model.lengths()
    return [j for j in range(model.m) if lengths[j] >= 2 * t_min]


def _log_pick_birth(model: SegmentModel, config: RJMCMCConfig) -> float:
    """Log-probability that the between-move type at this state is a birth."""
    birth_ok = model.m < config.max_segments and bool(_splittable(model, config.t_min))
    death_ok = model.m > 1
    if not birth_ok:
        return -math.inf
    return math.log(0.5) if death_ok else 0.0


def _log_pick_death(model: SegmentModel, config: RJMCMCConfig) -> float:
    birth_ok = model.m < config.max_segments and bool(_splittable(model, config.t_min))
    death_ok = model.m > 1
    if not death_ok:
        return -math.inf
    return math.log(0.5) if birth_ok else 0.0


# --- move log-ratios (deterministic given the drawn quantities) ------------

def birth_log_ratio(ctx: SeriesContext, state: ChainState, k: int, t_star: int,
                    u: float, beta_left: np.ndarray,
                    beta_right: np.ndarray) -> tuple[float, ChainState]:
    """Log acceptance ratio of a birth at segment ``k`` split at ``t_star``.

    Returns the ratio together with the proposed chain state (so an accepted
    move reuses the segment log-likelihoods computed here).
    """
    cfg = ctx.config
    model = state.model
    lo, hi = model.bounds(k)
    if not (lo + cfg.t_min <= t_star <= hi - cfg.t_min):
        raise ChangepointError(
            f"split point {t_star} violates t_min={cfg.t_min} in segment "
            f"[{lo}, {hi})")
    tau_old = float(model.tau2[k])
    proposal = split_model(model, k, t_star, u, beta_left, beta_right)
    tau_left = float(proposal.tau2[k])
    tau_right = float(proposal.tau2[k + 1])

    ll_left = ctx.loglik(lo, t_star, proposal.beta[k])
    ll_right = ctx.loglik(t_star, hi, proposal.beta[k + 1])
    d_lik = ll_left + ll_right - state.seg_logliks[k]

    d_beta = (log_beta_prior(proposal.beta[k], tau_left, cfg.sigma0_sq)
              + log_beta_prior(proposal.beta[k + 1], tau_right, cfg.sigma0_sq)
              - log_beta_prior(model.beta[k], tau_old, cfg.sigma0_sq))
    d_tau = (log_invgamma_pdf(tau_left, cfg.prior_tau_shape, cfg.prior_tau_scale)
             + log_invgamma_pdf(tau_right, cfg.prior_tau_shape, cfg.prior_tau_scale)
             - log_invgamma_pdf(tau_old, cfg.prior_tau_shape, cfg.prior_tau_scale))
    d_xi = (log_admissible_partitions(ctx.n, model.m, cfg.t_min)
            - log_admissible_partitions(ctx.n, proposal.m, cfg.t_min))

    approx_left = ctx.approx(lo, t_star, tau_left)
    approx_right = ctx.approx(t_star, hi, tau_right)
    n_candidates = (hi - lo) - 2 * cfg.t_min + 1
    log_fwd = (_log_pick_birth(model, cfg)
               - math.log(len(_splittable(model, cfg.t_min)))
               - math.log(n_candidates)
               + approx_left.logpdf(beta_left)
               + approx_right.logpdf(beta_right))

    tau_rev = math.sqrt(tau_left * tau_right)  # death's reconstruction of tau_old
    approx_merged = ctx.approx(lo, hi, tau_rev)
    log_rev = (_log_pick_death(proposal, cfg)
               - math.log(model.m)  # proposal has m+1 segments, m boundaries
               + approx_merged.logpdf(model.beta[k]))

    log_jacobian = math.log(2.0) + math.log(tau_old) - math.log(u) - math.log1p(-u)

    ratio = d_lik + d_beta + d_tau + d_xi + (log_rev - log_fwd) + log_jacobian
    new_logliks = state.seg_logliks[:k] + (ll_left, ll_right) + state.seg_logliks[k + 1:]
    return ratio, ChainState(model=proposal, seg_logliks=new_logliks)


def death_log_ratio(ctx: SeriesContext, state: ChainState, b: int,
                    beta_merged: np.ndarray) -> tuple[float, ChainState]:
    """Log acceptance ratio of removing interior boundary ``b``."""
    cfg = ctx.config
    model = state.model
    if not 1 <= b <= model.m - 1:
        raise ChangepointError(f"boundary index {b} out of range for m={model.m}")
    lo = int(model.xi[b - 1])
    t_old = int(model.xi[b])
    hi = int(model.xi[b + 1])
    tau_lhs = float(model.tau2[b - 1])
    tau_rhs = float(model.tau2[b])
    proposal = merge_model(model, b, beta_merged)
    tau_merged = float(proposal.tau2[b - 1])

    ll_merged = ctx.loglik(lo, hi, proposal.beta[b - 1])
    d_lik = ll_merged - state.seg_logliks[b - 1] - state.seg_logliks[b]

    d_beta = (log_beta_prior(proposal.beta[b - 1], tau_merged, cfg.sigma0_sq)
              - log_beta_prior(model.beta[b - 1], tau_lhs, cfg.sigma0_sq)
              - log_beta_prior(model.beta[b], tau_rhs, cfg.sigma0_sq))
    d_tau = (log_invgamma_pdf(tau_merged, cfg.prior_tau_shape, cfg.prior_tau_scale)
             - log_invgamma_pdf(tau_lhs, cfg.prior_tau_shape, cfg.prior_tau_scale)
             - log_invgamma_pdf(tau_rhs, cfg.prior_tau_shape, cfg.prior_tau_scale))
    d_xi = (log_admissible_partitions(ctx.n, model.m, cfg.t_min)
            - log_admissible_partitions(ctx.n, proposal.m, cfg.t_min))

    approx_merged = ctx.approx(lo, hi, tau_merged)
    log_fwd = (_log_pick_death(model, cfg)
               - math.log(model.m - 1)
               + approx_merged.logpdf(beta_merged))

    approx_left = ctx.approx(lo, t_old, tau_lhs)
    approx_right = ctx.approx(t_old, hi, tau_rhs)
    n_candidates = (hi - lo) - 2 * cfg.t_min + 1
    log_rev = (_log_pick_birth(proposal, cfg)
               - math.log(len(_splittable(proposal, cfg.t_min)))
               - math.log(n_candidates)
               + approx_left.logpdf(model.beta[b - 1])
               + approx_right.logpdf(model.beta[b]))

    sd_lhs = math.sqrt(tau_lhs)
    u_rev = sd_lhs / (sd_lhs + math.sqrt(tau_rhs))
    log_jacobian = -(math.log(2.0) + math.log(tau_merged)
                     - math.log(u_rev) - math.log1p(-u_rev))

    ratio = d_lik + d_beta + d_tau + d_xi + (log_rev - log_fwd) + log_jacobian
    new_logliks = state.seg_logliks[:b - 1] + (ll_merged,) + state.seg_logliks[b + 1:]
    return ratio, ChainState(model=proposal, seg_logliks=new_logliks)


def relocation_walk_pmf(target: int, current: int, lo: int, hi: int,
                        t_min: int) -> float:
    """Pmf of the +-1 relocation walk, with reflection at the t_min walls.

    ``lo`` and ``hi`` are the fixed boundaries enclosing the moving
    changepoint; steps shrinking either neighbor below ``t_min`` get no mass
    and their probability is folded into the remaining candidates.
    """
    if abs(target - current) > 1:
        return 0.0
    left_ok = (current - lo) > t_min   # can step to current - 1
    right_ok = (hi - current) > t_min  # can step to current + 1
    if left_ok and right_ok:
        return 1.0 / 3.0
    if right_ok:
        return 0.5 if target >= current else 0.0
    if left_ok:
        return 0.5 if target <= current else 0.0
    return 1.0 if target == current else 0.0


def _relocation_mix_pmf(ctx: SeriesContext, target: int, current: int,
                        lo: int, hi: int) -> float:
    cfg = ctx.config
    span = (hi - lo) - 2 * cfg.t_min + 1
    return (cfg.mix_pi / span
            + (1.0 - cfg.mix_pi)
            * relocation_walk_pmf(target, current, lo, hi, cfg.t_min))


def within_log_ratio(ctx: SeriesContext, state: ChainState, b: int, t_new: int,
                     beta_left: np.ndarray,
                     beta_right: np.ndarray) -> tuple[float, ChainState]:
    """Log acceptance ratio of relocating boundary ``b`` to ``t_new``.

    The two adjacent coefficient vectors are redrawn as part of the move, so
    the ratio carries both the relocation-mixture pmfs and the Gaussian
    proposal densities in both directions.
    """
    cfg = ctx.config
    model = state.model
    if not 1 <= b <= model.m - 1:
        raise ChangepointError(f"boundary index {b} out of range for m={model.m}")
    lo = int(model.xi[b - 1])
    t_old = int(model.xi[b])
    hi = int(model.xi[b + 1])
    if not (lo + cfg.t_min <= t_new <= hi - cfg.t_min):
        raise ChangepointError(
            f"relocation target {t_new} violates t_min={cfg.t_min} in [{lo}, {hi})")
    tau_lhs = float(model.tau2[b - 1])
    tau_rhs = float(model.tau2[b])
    beta_left = np.asarray(beta_left, dtype=float)
    beta_right = np.asarray(beta_right, dtype=float)

    ll_left = ctx.loglik(lo, t_new, beta_left)
    ll_right = ctx.loglik(t_new, hi, beta_right)
    d_lik = ll_left + ll_right - state.seg_logliks[b - 1] - state.seg_logliks[b]

    d_beta = (log_beta_prior(beta_left, tau_lhs, cfg.sigma0_sq)
              + log_beta_prior(beta_right, tau_rhs, cfg.sigma0_sq)
              - log_beta_prior(model.beta[b - 1], tau_lhs, cfg.sigma0_sq)
              - log_beta_prior(model.beta[b], tau_rhs, cfg.sigma0_sq))

    approx_new_left = ctx.approx(lo, t_new, tau_lhs)
    approx_new_right = ctx.approx(t_new, hi, tau_rhs)
    approx_old_left = ctx.approx(lo, t_old, tau_lhs)
    approx_old_right = ctx.approx(t_old, hi, tau_rhs)
    d_proposal = (approx_old_left.logpdf(model.beta[b - 1])
                  + approx_old_right.logpdf(model.beta[b])
                  - approx_new_left.logpdf(beta_left)
                  - approx_new_right.logpdf(beta_right))

    d_select = (math.log(_relocation_mix_pmf(ctx, t_old, t_new, lo, hi))
                - math.log(_relocation_mix_pmf(ctx, t_new, t_old, lo, hi)))

    ratio = d_lik + d_beta + d_proposal + d_select
    xi = model.xi.copy()
    xi[b] = t_new
    proposal = SegmentModel(
        xi=xi,
        beta=model.beta[:b - 1] + (beta_left, beta_right) + model.beta[b + 1:],
        tau2=model.tau2)
    new_logliks = (state.seg_logliks[:b - 1] + (ll_left, ll_right)
                   + state.seg_logliks[b + 1:])
    return ratio, ChainState(model=proposal, seg_logliks=new_logliks)


def refresh_log_ratio(ctx: SeriesContext, state: ChainState, j: int,
                      beta_new: np.ndarray) -> tuple[float, ChainState]:
    """Log acceptance ratio of redrawing segment ``j``'s coefficients."""
    cfg = ctx.config
    model = state.model
    lo, hi = model.bounds(j)
    tau = float(model.tau2[j])
    beta_new = np.asarray(beta_new, dtype=float)
    approx = ctx.approx(lo, hi, tau)
    ll_new = ctx.loglik(lo, hi, beta_new)
    ratio = (ll_new - state.seg_logliks[j]
             + log_beta_prior(beta_new, tau, cfg.sigma0_sq)
             - log_beta_prior(model.beta[j], tau, cfg.sigma0_sq)
             + approx.logpdf(model.beta[j]) - approx.logpdf(beta_new))
    proposal = SegmentModel(xi=model.xi,
                            beta=model.beta[:j] + (beta_new,) + model.beta[j + 1:],
                            tau2=model.tau2)
    new_logliks = state.seg_logliks[:j] + (ll_new,) + state.seg_logliks[j + 1:]
    return ratio, ChainState(model=proposal, seg_logliks=new_logliks)


# --- randomized moves -------------------------------------------------------

def birth_move(state: ChainState, ctx: SeriesContext,
               rng: np.random.Generator) -> tuple[ChainState, float] | None:
    """Propose a segment split; ``None`` when no birth is possible."""
    cfg = ctx.config
    model = state.model
    splittable = _splittable(model, cfg.t_min)
    if model.m >= cfg.max_segments or not splittable:
        return None
    k = splittable[int(rng.integers(len(splittable)))]
    lo, hi = model.bounds(k)
    t_star = int(lo + cfg.t_min + rng.integers((hi - lo) - 2 * cfg.t_min + 1))
    u = float(np.clip(rng.uniform(), 1e-12, 1.0 - 1e-12))
    tau_old = float(model.tau2[k])
    tau_left = u / (1.0 - u) * tau_old
    tau_right = (1.0 - u) / u * tau_old
    beta_left = ctx.approx(lo, t_star, tau_left).sample(rng)
    beta_right = ctx.approx(t_star, hi, tau_right).sample(rng)
    ratio, proposal = birth_log_ratio(ctx, state, k, t_star, u, beta_left, beta_right)
    return proposal, ratio


def death_move(state: ChainState, ctx: SeriesContext,
               rng: np.random.Generator) -> tuple[ChainState, float] | None:
    """Propose merging two segments; ``None`` when already at one segment."""
    model = state.model
    if model.m <= 1:
        return None
    b = 1 + int(rng.integers(model.m - 1))
    lo = int(model.xi[b - 1])
    hi = int(model.xi[b + 1])
    tau_merged = math.sqrt(float(model.tau2[b - 1]) * float(model.tau2[b]))
    beta_merged = ctx.approx(lo, hi, tau_merged).sample(rng)
    ratio, proposal = death_log_ratio(ctx, state, b, beta_merged)
    return proposal, ratio


def within_move(state: ChainState, ctx: SeriesContext,
                rng: np.random.Generator) -> tuple[ChainState, float] | None:
    """Propose relocating one changepoint; ``None`` at one segment."""
    cfg = ctx.config
    model = state.model
    if model.m <= 1:
        return None
    b = 1 + int(rng.integers(model.m - 1))
    lo = int(model.xi[b - 1])
    t_old = int(model.xi[b])
    hi = int(model.xi[b + 1])
    if rng.uniform() < cfg.mix_pi:
        t_new = int(lo + cfg.t_min + rng.integers((hi - lo) - 2 * cfg.t_min + 1))
    else:
        candidates = [t_old - 1, t_old, t_old + 1]
        probs = [relocation_walk_pmf(c, t_old, lo, hi, cfg.t_min) for c in candidates]
        t_new = int(rng.choice(candidates, p=probs))
    beta_left = ctx.approx(lo, t_new, float(model.tau2[b - 1])).sample(rng)
    beta_right = ctx.approx(t_new, hi, float(model.tau2[b])).sample(rng)
    ratio, proposal = within_log_ratio(ctx, state, b, t_new, beta_left, beta_right)
    return proposal, ratio


def refresh_move(state: ChainState, ctx: SeriesContext,
                 rng: np.random.Generator, j: int = 0) -> tuple[ChainState, float]:
    """Metropolis redraw of one segment's coefficients (the within-model
    update when the partition has no interior boundary to relocate)."""
    model = state.model
    lo, hi = model.bounds(j)
    beta_new = ctx.approx(lo, hi, float(model.tau2[j])).sample(rng)
    ratio, proposal = refresh_log_ratio(ctx, state, j, beta_new)
    return proposal, ratio


def gibbs_tau2(state: ChainState, ctx: SeriesContext,
               rng: np.random.Generator) -> ChainState:
    """Conjugate update of every segment's coefficient variance.

    The conditional is inverse-gamma with shape ``a + n_basis / 2`` and scale
    ``b + sum(beta[1:]^2) / 2``.
    """
    cfg = ctx.config
    model = state.model
    new_tau = np.empty(model.m)
    for j in range(model.m):
        rest = model.beta[j][1:]
        shape = cfg.prior_tau_shape + 0.5 * rest.size
        scale = cfg.prior_tau_scale + 0.5 * float(rest @ rest)
        new_tau[j] = scale / float(rng.gamma(shape))
    new_model = SegmentModel(xi=model.xi, beta=model.beta, tau2=new_tau)
    return ChainState(model=new_model, seg_logliks=state.seg_logliks)


# --- the chain --------------------------------------------------------------

@dataclass
class RJMCMCResult:
    """Post-burn-in samples plus whole-chain diagnostics."""

    samples: list[SegmentModel]
    trace_m: np.ndarray
    trace_logpost: np.ndarray
    accepts: dict[str, int]
    proposals: dict[str, int]
    config: RJMCMCConfig
    n: int
    backend: str
    runtime_seconds: float

    def posterior(self) -> ChangepointPosterior:
        return extract_posterior(self.samples)


def model_log_posterior(ctx: SeriesContext, state: ChainState) -> float:
    """Joint log-density of the state (up to the likelihood's constant)."""
    cfg = ctx.config
    model = state.model
    out = float(sum(state.seg_logliks))
    for j in range(model.m):
        out += log_beta_prior(model.beta[j], float(model.tau2[j]), cfg.sigma0_sq)
        out += log_invgamma_pdf(float(model.tau2[j]), cfg.prior_tau_shape,
                                cfg.prior_tau_scale)
    out -= log_admissible_partitions(ctx.n, model.m, cfg.t_min)
    out -= math.log(cfg.max_segments)  # uniform prior over the segment count
    return out


def _check_hard_constraints(state: ChainState, ctx: SeriesContext) -> None:
    model = state.model
    cfg = ctx.config
    if not 1 <= model.m <= cfg.max_segments:
        raise ChangepointError(f"segment count {model.m} left [1, {cfg.max_segments}]")
    if model.xi[0] != 0 or model.xi[-1] != ctx.n:
        raise ChangepointError("partition does not cover the series")
    lengths = model.lengths()
    if np.any(lengths < cfg.t_min):
        raise ChangepointError(
            f"segment shorter than t_min={cfg.t_min}: lengths {lengths.tolist()}")
    if len(state.seg_logliks) != model.m:
        raise ChangepointError("segment log-likelihood cache out of sync")


def initial_state(ctx: SeriesContext, rng: np.random.Generator) -> ChainState:
    """Single-segment start with coefficients drawn at ``tau2 = 1``."""
    beta = ctx.approx(0, ctx.n, 1.0).sample(rng)
    model = SegmentModel(xi=np.asarray([0, ctx.n]),
                         beta=(np.asarray(beta, dtype=float),),
                         tau2=np.asarray([1.0]))
    return ctx.state_from_model(model)


def run_rjmcmc(x: np.ndarray, config: RJMCMCConfig) -> RJMCMCResult:
    """Run the sampler on one series; fully deterministic given the seed."""
    started = time.monotonic()
    ctx = SeriesContext(x, config)
    rng = np.random.default_rng(config.seed)
    state = initial_state(ctx, rng)

    accepts = {"birth": 0, "death": 0, "within": 0, "refresh": 0}
    proposals = {"birth": 0, "death": 0, "within": 0, "refresh": 0}
    trace_m = np.empty(config.iterations, dtype=int)
    trace_logpost = np.empty(config.iterations, dtype=float)
    samples: list[SegmentModel] = []

    for sweep in range(config.iterations):
        model = state.model
        birth_ok = (model.m < config.max_segments
                    and bool(_splittable(model, config.t_min)))
        death_ok = model.m > 1
        if birth_ok and death_ok:
            do_birth = bool(rng.uniform() < 0.5)
        elif birth_ok or death_ok:
            do_birth = birth_ok
        else:
            do_birth = None
        if do_birth is not None:
            kind = "birth" if do_birth else "death"
            outcome = birth_move(state, ctx, rng) if do_birth \
                else death_move(state, ctx, rng)
            proposals[kind] += 1
            proposal, ratio = outcome
            if math.log(rng.uniform()) < ratio:
                state = proposal
                accepts[kind] += 1

        if state.model.m > 1:
            proposals["within"] += 1
            proposal, ratio = within_move(state, ctx, rng)
            if math.log(rng.uniform()) < ratio:
                state = proposal
                accepts["within"] += 1
        else:
            proposals["refresh"] += 1
            proposal, ratio = refresh_move(state, ctx, rng, 0)
            if math.log(rng.uniform()) < ratio:
                state = proposal
                accepts["refresh"] += 1

        state = gibbs_tau2(state, ctx, rng)
        _check_hard_constraints(state, ctx)
        trace_m[sweep] = state.model.m
        trace_logpost[sweep] = model_log_posterior(ctx, state)
        if sweep >= config.burnin:
            samples.append(state.model)

    return RJMCMCResult(samples=samples, trace_m=trace_m,
                        trace_logpost=trace_logpost, accepts=accepts,
                        proposals=proposals, config=config, n=ctx.n,
                        backend=whittle.BACKEND,
                        runtime_seconds=time.monotonic() - started)


def extract_posterior(samples: Sequence[SegmentModel]) -> ChangepointPosterior:
    """MAP segment count and per-changepoint location histograms.

    The MAP count is the posterior mode over ``m`` (ties break toward the
    smaller count); location distributions are normalized histograms of each
    ordered changepoint over the samples with the MAP count.
    """
    if not samples:
        raise ChangepointError("no post-burn-in samples to summarize")
    counts = Counter(s.m for s in samples)
    top = max(counts.values())
    map_m = min(m for m, c in counts.items() if c == top)
    selected = [s for s in samples if s.m == map_m]
    distributions = []
    for j in range(1, map_m):
        hist = Counter(int(s.xi[j]) for s in selected)
        total = sum(hist.values())
        support = sorted(hist)
        probs = [hist[i] / total for i in support]
        distributions.append(IndexDistribution(support=np.asarray(support),
                                               probs=np.asarray(probs)))
    return ChangepointPosterior(map_m=map_m, distributions=tuple(distributions),
                                m_counts=dict(sorted(counts.items())))


# --- chain serialization ----------------------------------------------------

def save_chain(result: RJMCMCResult, path) -> None:
    """Write a result to gzipped JSON (deterministic bytes for a fixed result)."""
    doc = {
        "n": result.n,
        "backend": result.backend,
        "config": {
            "iterations": result.config.iterations,
            "burnin": result.config.burnin,
            "t_min": result.config.t_min,
            "max_segments": result.config.max_segments,
            "n_basis": result.config.n_basis,
            "mix_pi": result.config.mix_pi,
            "seed": result.config.seed,
            "prior_tau_shape": result.config.prior_tau_shape,
            "prior_tau_scale": result.config.prior_tau_scale,
            "sigma0_sq": result.config.sigma0_sq,
        },
        "accepts": result.accepts,
        "proposals": result.proposals,
        "trace_m": result.trace_m.tolist(),
        "trace_logpost": result.trace_logpost.tolist(),
        "samples": [{"xi": s.xi.tolist(),
                     "beta": [b.tolist() for b in s.beta],
                     "tau2": s.tau2.tolist()} for s in result.samples],
    }
    payload = json.dumps(doc, sort_keys=True).encode()
    Path(path).write_bytes(gzip.compress(payload, mtime=0))


def load_chain(path) -> tuple[list[SegmentModel], dict]:
    """Read samples and metadata written by :func:`save_chain`."""
    doc = json.loads(gzip.decompress(Path(path).read_bytes()))
    samples = [SegmentModel(xi=np.asarray(s["xi"], dtype=int),
                            beta=tuple(np.asarray(b, dtype=float) for b in s["beta"]),
                            tau2=np.asarray(s["tau2"], dtype=float))
               for s in doc["samples"]]
    meta = {k: doc[k] for k in doc if k != "samples"}
    return samples, meta
