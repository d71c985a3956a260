# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled CSR matvec, the hot kernel of the explicit time loop.

Row-sequential accumulation in index order, matching the scipy fallback
bit for bit so trajectories are identical across backends.
"""

import numpy as np


def csr_matvec(long[::1] indptr, long[::1] indices, double[::1] data,
               double[::1] x, out=None):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    if out is None:
        out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        y[i] = acc
    return out
