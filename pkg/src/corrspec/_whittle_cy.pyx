# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled backend for the periodogram log-spectrum kernels.

Same contract as ``_whittle_py``; see that module for the math.  These loops
dominate the sampler runtime, hence the hand-written accumulation instead of
BLAS calls (segments are short, so call overhead matters more than flops).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

BACKEND_NAME = "cython"


def loglik(double[::1] perio, double[:, ::1] design, double[::1] beta):
    cdef Py_ssize_t n = perio.shape[0]
    cdef Py_ssize_t p = design.shape[1]
    cdef Py_ssize_t i, j
    cdef double g, acc = 0.0
    for i in range(n):
        g = 0.0
        for j in range(p):
            g += design[i, j] * beta[j]
        acc += g + perio[i] * exp(-g)
    return -acc


def grad_hess(double[::1] perio, double[:, ::1] design, double[::1] beta,
              prior_prec=None):
    cdef Py_ssize_t n = perio.shape[0]
    cdef Py_ssize_t p = design.shape[1]
    grad_arr = np.zeros(p)
    hess_arr = np.zeros((p, p))
    cdef double[::1] grad = grad_arr
    cdef double[:, ::1] hess = hess_arr
    cdef double[::1] prec
    cdef Py_ssize_t i, j, k
    cdef double g, w, xw, acc = 0.0, val

    for i in range(n):
        g = 0.0
        for j in range(p):
            g += design[i, j] * beta[j]
        w = perio[i] * exp(-g)
        acc += g + w
        for j in range(p):
            grad[j] += design[i, j] * (w - 1.0)
            xw = design[i, j] * w
            for k in range(j, p):
                hess[j, k] += xw * design[i, k]
    val = -acc
    for j in range(p):
        for k in range(j):
            hess[j, k] = hess[k, j]

    if prior_prec is not None:
        prec = prior_prec
        for j in range(p):
            val -= 0.5 * prec[j] * beta[j] * beta[j]
            grad[j] -= prec[j] * beta[j]
            hess[j, j] += prec[j]
    return val, grad_arr, hess_arr
