# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the self-balancing kernel-halving walk.

Mirrors `mfld.accel.fallback`; see there for the algorithm description.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef void _walk(const double[:, ::1] K, double log_term,
                const double[::1] uniforms, double[::1] coef,
                cnp.intp_t[::1] out) noexcept nogil:
    cdef Py_ssize_t n2 = out.shape[0]
    cdef Py_ssize_t i, p, ix, iy
    cdef double sig_sqd = 0.0
    cdef double b2, a, s, theta, prob, update
    for i in range(n2):
        ix = 2 * i
        iy = ix + 1
        b2 = K[ix, ix] + K[iy, iy] - 2.0 * K[ix, iy]
        if b2 < 0.0:
            b2 = 0.0
        a = sqrt(sig_sqd * b2 * log_term)
        if b2 > a:
            a = b2
        if sig_sqd == 0.0:
            sig_sqd = b2
        else:
            update = 1.0 + (b2 - 2.0 * a) * b2 / sig_sqd
            if update > 0.0:
                sig_sqd += b2 * update
        prob = 0.5
        if a > 0.0:
            theta = 0.0
            for p in range(ix):
                theta += coef[p] * (K[p, ix] - K[p, iy])
            if theta > a:
                theta = a
            elif theta < -a:
                theta = -a
            prob = 0.5 * (1.0 - theta / a)
        if uniforms[i] < prob:
            out[i] = iy
            coef[ix] = 1.0
            coef[iy] = -1.0
        else:
            out[i] = ix
            coef[ix] = -1.0
            coef[iy] = 1.0


def halve_walk(const double[:, ::1] K, double log_term, const double[::1] uniforms):
    cdef Py_ssize_t n2 = uniforms.shape[0]
    coef_arr = np.zeros(2 * n2, dtype=np.float64)
    out_arr = np.empty(n2, dtype=np.intp)
    cdef double[::1] coef = coef_arr
    cdef cnp.intp_t[::1] out = out_arr
    with nogil:
        _walk(K, log_term, uniforms, coef, out)
    return out_arr


def halve_walk_batch(const double[:, :, ::1] K, double log_term,
                     const double[:, ::1] uniforms):
    cdef Py_ssize_t nb = K.shape[0]
    cdef Py_ssize_t n2 = uniforms.shape[1]
    coef_arr = np.zeros(2 * n2, dtype=np.float64)
    out_arr = np.empty((nb, n2), dtype=np.intp)
    cdef double[::1] coef = coef_arr
    cdef cnp.intp_t[:, ::1] out = out_arr
    cdef Py_ssize_t b, j
    with nogil:
        for b in range(nb):
            for j in range(2 * n2):
                coef[j] = 0.0
            _walk(K[b], log_term, uniforms[b], coef, out[b])
    return out_arr
