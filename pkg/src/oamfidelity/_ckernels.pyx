# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid kernels; semantics match ``_pykernels``.

Logarithms come from NumPy's vectorised ufuncs, which beat scalar libm calls;
the masking, weighting and reductions are fused into single C passes so no
temporaries are allocated.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log2

cnp.import_array()


def binary_mutual_information(p_first, p_second, wq):
    a_arr = np.ascontiguousarray(p_first, dtype=np.float64)
    b_arr = np.ascontiguousarray(p_second, dtype=np.float64)
    cdef const double[::1] a = a_arr
    cdef const double[::1] b = b_arr
    cdef const double[::1] w = np.ascontiguousarray(wq, dtype=np.float64)
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double pa = 0.0, pb = 0.0, ha = 0.0, hb = 0.0, lpa, lpb
    if b.shape[0] != n or w.shape[0] != n:
        raise ValueError("array lengths differ")
    with np.errstate(divide="ignore", invalid="ignore"):
        la_arr = np.log2(a_arr)
        lb_arr = np.log2(b_arr)
    cdef const double[::1] la = la_arr
    cdef const double[::1] lb = lb_arr
    with nogil:
        for i in range(n):
            pa += w[i] * a[i]
            pb += w[i] * b[i]
        lpa = log2(pa) if pa > 0.0 else 0.0
        lpb = log2(pb) if pb > 0.0 else 0.0
        for i in range(n):
            if pa > 0.0 and a[i] > 0.0:
                ha += w[i] * a[i] * (la[i] - lpa)
            if pb > 0.0 and b[i] > 0.0:
                hb += w[i] * b[i] * (lb[i] - lpb)
    return ha + hb, pa, pb


def bernoulli_log_likelihood(p_first, p_second, double n_first, double n_second):
    a_arr = np.ascontiguousarray(p_first, dtype=np.float64)
    b_arr = np.ascontiguousarray(p_second, dtype=np.float64)
    cdef Py_ssize_t i, n = a_arr.shape[0]
    if b_arr.shape[0] != n:
        raise ValueError("array lengths differ")
    with np.errstate(divide="ignore", invalid="ignore"):
        la_arr = np.log(a_arr)
        lb_arr = np.log(b_arr)
    cdef const double[::1] la = la_arr
    cdef const double[::1] lb = lb_arr
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            if n_first > 0.0:
                acc += n_first * la[i]
            if n_second > 0.0:
                acc += n_second * lb[i]
            o[i] = acc
    return out
