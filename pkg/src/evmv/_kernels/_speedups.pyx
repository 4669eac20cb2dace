# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; algorithm-for-algorithm twin of pure.py.

Same Lanczos coefficients, recurrence cutoffs, and Bernoulli tails, so the
two backends agree to rounding noise and either can back the package.
"""

from libc.math cimport exp, log, log1p, sin

import numpy as np

from evmv.errors import TotalConflictError

cdef double HALF_LOG_TWO_PI = 0.9189385332046727
cdef double PI = 3.141592653589793
cdef double RECURRENCE_CUTOFF = 10.0
cdef double CONFLICT_EPS = 1e-12

cdef double[9] LANCZOS_C
LANCZOS_C[0] = 0.99999999999980993
LANCZOS_C[1] = 676.5203681218851
LANCZOS_C[2] = -1259.1392167224028
LANCZOS_C[3] = 771.32342877765313
LANCZOS_C[4] = -176.61502916214059
LANCZOS_C[5] = 12.507343278686905
LANCZOS_C[6] = -0.13857109526572012
LANCZOS_C[7] = 9.9843695780195716e-6
LANCZOS_C[8] = 1.5056327351493116e-7

cdef double[7] DIGAMMA_TAIL
DIGAMMA_TAIL[0] = 1.0 / 12.0
DIGAMMA_TAIL[1] = -1.0 / 120.0
DIGAMMA_TAIL[2] = 1.0 / 252.0
DIGAMMA_TAIL[3] = -1.0 / 240.0
DIGAMMA_TAIL[4] = 1.0 / 132.0
DIGAMMA_TAIL[5] = -691.0 / 32760.0
DIGAMMA_TAIL[6] = 1.0 / 12.0

cdef double[7] TRIGAMMA_TAIL
TRIGAMMA_TAIL[0] = 1.0 / 6.0
TRIGAMMA_TAIL[1] = -1.0 / 30.0
TRIGAMMA_TAIL[2] = 1.0 / 42.0
TRIGAMMA_TAIL[3] = -1.0 / 30.0
TRIGAMMA_TAIL[4] = 5.0 / 66.0
TRIGAMMA_TAIL[5] = -691.0 / 2730.0
TRIGAMMA_TAIL[6] = 7.0 / 6.0


cdef double _lgamma1(double x) noexcept nogil:
    cdef double z, series, t, out
    cdef int i
    z = 1.0 - x if x < 0.5 else x
    series = LANCZOS_C[0]
    for i in range(1, 9):
        series += LANCZOS_C[i] / (z - 1.0 + i)
    t = z + 6.5
    out = HALF_LOG_TWO_PI + (z - 0.5) * log(t) - t + log(series)
    if x < 0.5:
        out = log(PI / sin(PI * x)) - out
    return out


cdef double _digamma1(double x) noexcept nogil:
    cdef double acc = 0.0, w, tail
    cdef int i
    while x < RECURRENCE_CUTOFF:
        acc -= 1.0 / x
        x += 1.0
    w = 1.0 / (x * x)
    tail = DIGAMMA_TAIL[6]
    for i in range(5, -1, -1):
        tail = tail * w + DIGAMMA_TAIL[i]
    return acc + log(x) - 0.5 / x - tail * w


cdef double _trigamma1(double x) noexcept nogil:
    cdef double acc = 0.0, w, tail
    cdef int i
    while x < RECURRENCE_CUTOFF:
        acc += 1.0 / (x * x)
        x += 1.0
    w = 1.0 / (x * x)
    tail = TRIGAMMA_TAIL[6]
    for i in range(5, -1, -1):
        tail = tail * w + TRIGAMMA_TAIL[i]
    return acc + 1.0 / x + 0.5 * w + tail * w / x


cdef double _softplus1(double z) noexcept nogil:
    if z > 20.0:
        return z
    return log1p(exp(z))


cdef double _softplus_grad1(double z) noexcept nogil:
    cdef double ez
    if z > 20.0:
        return 1.0
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    ez = exp(z if z > -745.0 else -745.0)
    return ez / (1.0 + ez)


def lgamma(double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = _lgamma1(x[i])
    return out_arr


def digamma(double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = _digamma1(x[i])
    return out_arr


def trigamma(double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = _trigamma1(x[i])
    return out_arr


def softplus(double[::1] z):
    cdef Py_ssize_t i, n = z.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = _softplus1(z[i])
    return out_arr


def softplus_grad(double[::1] z):
    cdef Py_ssize_t i, n = z.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = _softplus_grad1(z[i])
    return out_arr


def combine_pair_batch(double[:, ::1] b1, double[::1] u1,
                       double[:, ::1] b2, double[::1] u2):
    cdef Py_ssize_t i, k, n = b1.shape[0], width = b1.shape[1]
    b_arr = np.empty((n, width), dtype=np.float64)
    u_arr = np.empty(n, dtype=np.float64)
    kappa_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] b = b_arr
    cdef double[::1] u = u_arr
    cdef double[::1] kappa = kappa_arr
    cdef double s1, s2, dot, denom, total
    for i in range(n):
        s1 = 0.0
        s2 = 0.0
        dot = 0.0
        for k in range(width):
            s1 += b1[i, k]
            s2 += b2[i, k]
            dot += b1[i, k] * b2[i, k]
        kappa[i] = s1 * s2 - dot
        denom = 1.0 - kappa[i]
        if denom <= CONFLICT_EPS:
            raise TotalConflictError(
                "combined opinions are in total conflict (1 - kappa <= %g)" % CONFLICT_EPS
            )
        total = 0.0
        for k in range(width):
            b[i, k] = (b1[i, k] * b2[i, k] + b1[i, k] * u2[i] + b2[i, k] * u1[i]) / denom
            total += b[i, k]
        u[i] = (u1[i] * u2[i]) / denom
        total += u[i]
        for k in range(width):
            b[i, k] /= total
        u[i] /= total
    return b_arr, u_arr, kappa_arr
