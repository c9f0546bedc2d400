"""Pure-numpy backend for the periodogram log-spectrum kernels.

Mirrors the compiled backend in ``_whittle_cy``: same functions, same
signatures, same numerics up to floating-point reassociation.  The model is
the frequency-domain likelihood of a stationary segment: for periodogram
ordinates ``I_k`` and a log-spectrum ``g_k`` given by a linear basis
expansion, the log-likelihood is ``-sum(g_k + I_k * exp(-g_k))``.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def loglik(perio: np.ndarray, design: np.ndarray, beta: np.ndarray) -> float:
    """Segment log-likelihood at coefficient vector ``beta``."""
    g = design @ beta
    return -float(np.sum(g + perio * np.exp(-g)))


def grad_hess(perio, design, beta, prior_prec=None):
    """Value, gradient and negative Hessian of the segment objective.

    The objective is the log-likelihood plus, when ``prior_prec`` is given,
    an independent zero-mean Gaussian log-prior with the supplied diagonal
    precision.  The returned Hessian is negated so it is positive definite
    whenever any prior precision entry is positive.

    Parameters
    ----------
    perio : (n,) float array
        Periodogram ordinates of the segment (positive frequencies only).
    design : (n, p) float array
        Basis expansion of the log-spectrum at the same frequencies.
    beta : (p,) float array
        Coefficients.
    prior_prec : (p,) float array, optional
        Diagonal prior precision; omitted means likelihood only.

    Returns
    -------
    (value, grad, neg_hess) : tuple of float, (p,) array, (p, p) array
    """
    g = design @ beta
    w = perio * np.exp(-g)
    value = -float(np.sum(g + w))
    grad = design.T @ (w - 1.0)
    neg_hess = design.T @ (design * w[:, None])
    if prior_prec is not None:
        value -= 0.5 * float(np.dot(beta * prior_prec, beta))
        grad = grad - prior_prec * beta
        neg_hess = neg_hess + np.diag(prior_prec)
    return value, grad, neg_hess
