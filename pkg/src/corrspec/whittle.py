"""Periodogram log-spectrum fitting: backend dispatch and Newton mode finder.

At import time the compiled kernel (``_whittle_cy``) is preferred and the
pure-numpy twin (``_whittle_py``) is the fallback.  ``CORRSPEC_BACKEND`` can
force either one (values ``cython`` or ``python``).  Both backends implement
``loglik`` and ``grad_hess`` with identical contracts; everything built on
top of them lives here so the numerics do not fork.
"""

from __future__ import annotations

import os

import numpy as np

from . import _whittle_py

try:  # pragma: no cover - depends on whether the extension built
    from . import _whittle_cy
except ImportError:  # pragma: no cover
    _whittle_cy = None

_EULER_GAMMA = 0.5772156649015329


def _select_backend():
    forced = os.environ.get("CORRSPEC_BACKEND", "").strip().lower()
    if forced == "python":
        return _whittle_py
    if forced == "cython":
        if _whittle_cy is None:
            raise ImportError(
                "CORRSPEC_BACKEND=cython but the compiled kernel is not built")
        return _whittle_cy
    if forced:
        raise ValueError(f"unknown CORRSPEC_BACKEND value: {forced!r}")
    return _whittle_cy if _whittle_cy is not None else _whittle_py


_backend = _select_backend()
BACKEND = _backend.BACKEND_NAME


def available_backends():
    """Modules for every importable backend (used by tests and benchmarks)."""
    mods = [_whittle_py]
    if _whittle_cy is not None:
        mods.append(_whittle_cy)
    return mods


class ModeFindingError(RuntimeError):
    """Newton iteration failed to reach the gradient tolerance."""


def periodogram(x: np.ndarray) -> np.ndarray:
    """Periodogram of a segment at the positive Fourier frequencies.

    The segment mean is removed, then ordinate ``k`` is
    ``|sum_t x_t exp(-2*pi*i*k*t/n)|^2 / n`` for ``k = 1 .. floor((n-1)/2)``;
    the zero and Nyquist frequencies are excluded.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 8:
        raise ValueError(f"segment too short for a periodogram: {n} points")
    centered = x - x.mean()
    spec = np.abs(np.fft.rfft(centered)) ** 2 / n
    k_max = (n - 1) // 2
    return np.ascontiguousarray(spec[1:k_max + 1])


def fourier_frequencies(n: int) -> np.ndarray:
    """Frequencies ``k/n`` matching :func:`periodogram` ordinates."""
    k_max = (n - 1) // 2
    return np.arange(1, k_max + 1) / n


def cosine_design(freqs: np.ndarray, n_basis: int) -> np.ndarray:
    """Design matrix of the cosine basis for the log-spectrum.

    Column 0 is the constant; column ``s`` is ``sqrt(2) * cos(2*pi*s*nu)``.
    """
    freqs = np.asarray(freqs, dtype=float)
    cols = [np.ones_like(freqs)]
    for s in range(1, n_basis + 1):
        cols.append(np.sqrt(2.0) * np.cos(2.0 * np.pi * s * freqs))
    return np.ascontiguousarray(np.column_stack(cols))


def loglik(perio, design, beta, backend=None) -> float:
    mod = backend if backend is not None else _backend
    return mod.loglik(np.ascontiguousarray(perio, dtype=float),
                      np.ascontiguousarray(design, dtype=float),
                      np.ascontiguousarray(beta, dtype=float))


def grad_hess(perio, design, beta, prior_prec=None, backend=None):
    mod = backend if backend is not None else _backend
    prec = None if prior_prec is None else np.ascontiguousarray(prior_prec, dtype=float)
    return mod.grad_hess(np.ascontiguousarray(perio, dtype=float),
                         np.ascontiguousarray(design, dtype=float),
                         np.ascontiguousarray(beta, dtype=float),
                         prec)


def initial_beta(perio, design, prior_prec, xtx=None) -> np.ndarray:
    """Deterministic starting point: ridge regression on the log-periodogram.

    ``log I_k`` is an asymptotically unbiased estimate of ``g_k`` up to the
    Euler-Mascheroni constant, so solving the penalized normal equations on
    ``log I_k + gamma`` lands close enough to the mode for Newton to converge
    in a handful of steps.
    """
    perio = np.asarray(perio, dtype=float)
    design = np.asarray(design, dtype=float)
    if xtx is None:
        xtx = design.T @ design
    y = np.log(np.maximum(perio, 1e-280)) + _EULER_GAMMA
    lhs = xtx + np.diag(prior_prec)
    return np.linalg.solve(lhs, design.T @ y)


def posterior_mode(perio, design, prior_prec, beta_init=None, tol=1e-8,
                   max_iter=100, backend=None, xtx=None):
    """Damped Newton ascent of the penalized segment objective.

    Runs until the gradient norm drops below ``tol`` or ``max_iter``
    iterations elapse, whichever is first.  The objective is strictly
    concave (the negative Hessian is a positive combination plus the prior
    precision), so Newton with backtracking always makes progress.

    Returns
    -------
    (beta, neg_hess, n_iter) : mode, negative Hessian at the mode, and the
        number of Newton steps taken.

    Raises
    ------
    ModeFindingError
        If the gradient tolerance is not met within ``max_iter`` iterations.
    """
    perio = np.ascontiguousarray(perio, dtype=float)
    design = np.ascontiguousarray(design, dtype=float)
    prior_prec = np.ascontiguousarray(prior_prec, dtype=float)
    if np.all(perio == 0.0):
        raise ModeFindingError("degenerate segment: all periodogram ordinates are zero")
    if beta_init is None:
        beta = initial_beta(perio, design, prior_prec, xtx=xtx)
    else:
        beta = np.array(beta_init, dtype=float)
    mod = backend if backend is not None else _backend
    value, grad, hess = mod.grad_hess(perio, design, beta, prior_prec)
    for it in range(max_iter):
        if float(np.linalg.norm(grad)) < tol:
            return beta, hess, it
        step = np.linalg.solve(hess, grad)
        # near the mode the quadratic gain drops below float resolution while
        # the gradient still shrinks per step, so flat-to-1ulp steps pass
        slack = 1e-12 * (1.0 + abs(value))
        scale = 1.0
        while True:
            cand = beta + scale * step
            cand_val, cand_grad, cand_hess = mod.grad_hess(perio, design, cand, prior_prec)
            if cand_val >= value - slack or scale <= 2.0 ** -40:
                beta, value, grad, hess = cand, cand_val, cand_grad, cand_hess
                break
            scale *= 0.5
    if float(np.linalg.norm(grad)) < tol:
        return beta, hess, max_iter
    raise ModeFindingError(
        f"Newton did not reach gradient tolerance {tol} in {max_iter} iterations "
        f"(final gradient norm {float(np.linalg.norm(grad)):.3e})")
