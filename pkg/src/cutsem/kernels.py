"""Backend selection for the hot CSR matvec.

The compiled extension (cutsem._core, Cython) is preferred; a scipy-based
fallback is used when it is missing or when CUTSEM_PURE_PYTHON is set.
Both accumulate rows sequentially in index order, so results agree bitwise.
"""

import os

import numpy as np
import scipy.sparse as sp


def _fallback_csr_matvec(indptr, indices, data, x, out=None):
    n = len(indptr) - 1
    m = sp.csr_matrix((data, indices, indptr), shape=(n, len(x)))
    y = m @ x
    if out is not None:
        out[:] = y
        return out
    return y


if os.environ.get("CUTSEM_PURE_PYTHON"):
    csr_matvec = _fallback_csr_matvec
    BACKEND = "fallback"
else:
    try:
        from ._core import csr_matvec as _compiled_csr_matvec

        def csr_matvec(indptr, indices, data, x, out=None):
            return _compiled_csr_matvec(indptr, indices, data, np.ascontiguousarray(x), out)

        BACKEND = "compiled"
    except ImportError:
        csr_matvec = _fallback_csr_matvec
        BACKEND = "fallback"
