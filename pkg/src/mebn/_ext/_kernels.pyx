# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled factor kernel: fused product of factors with optional sum-out."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


def product_sum(list arrays, const cnp.int64_t[:, ::1] strides, const cnp.int64_t[::1] card, Py_ssize_t elim):
    """Multiply factors aligned on a common axis space, summing out axis `elim`.

    ``arrays`` are flat C-contiguous float64 buffers; ``strides[k, d]`` is the
    element stride of factor ``k`` along union axis ``d`` (0 when absent).
    ``elim < 0`` keeps every axis.  Returns the flat result in C order over
    the retained axes.
    """
    cdef Py_ssize_t K = len(arrays)
    cdef Py_ssize_t D = card.shape[0]
    cdef Py_ssize_t k, d
    cdef long long total = 1, out_size = 1
    for d in range(D):
        total *= card[d]
        if d != elim:
            out_size *= card[d]

    out = np.zeros(out_size, dtype=np.float64)
    cdef double[::1] outv = out
    cdef const double** ptrs = <const double**> malloc(K * sizeof(double*))
    cdef long long* offs = <long long*> malloc(K * sizeof(long long))
    cdef long long* idx = <long long*> malloc((D + 1) * sizeof(long long))
    cdef long long* ostr = <long long*> malloc((D + 1) * sizeof(long long))
    cdef const double[::1] view
    views = []
    cdef long long acc = 1
    cdef long long t, out_off = 0
    cdef double p
    try:
        for k in range(K):
            view = arrays[k]
            views.append(view)
            ptrs[k] = &view[0]
            offs[k] = 0
        for d in range(D - 1, -1, -1):
            idx[d] = 0
            if d == elim:
                ostr[d] = 0
            else:
                ostr[d] = acc
                acc *= card[d]
        for t in range(total):
            p = 1.0
            for k in range(K):
                p *= ptrs[k][offs[k]]
            outv[out_off] += p
            d = D - 1
            while d >= 0:
                idx[d] += 1
                for k in range(K):
                    offs[k] += strides[k, d]
                out_off += ostr[d]
                if idx[d] < card[d]:
                    break
                for k in range(K):
                    offs[k] -= strides[k, d] * card[d]
                out_off -= ostr[d] * card[d]
                idx[d] = 0
                d -= 1
    finally:
        free(ptrs)
        free(offs)
        free(idx)
        free(ostr)
    return out
