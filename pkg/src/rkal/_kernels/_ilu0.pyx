# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled ILU(0) kernels on CSR arrays (sorted column indices)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def ilu0_factor(const Py_ssize_t[::1] indptr, const Py_ssize_t[::1] indices, const double[::1] data):
    """In-pattern incomplete LU.

    Returns ``(lu, diag, bad_row)``: ``lu`` holds L (unit, strictly lower part)
    and U on the pattern of the input, ``diag[i]`` points at the diagonal of
    row ``i``, and ``bad_row`` is -1 or the first row with a zero or missing pivot.
    """
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] lu_arr = np.array(data, dtype=np.float64, copy=True)
    cdef double[::1] lu = lu_arr
    cdef cnp.ndarray[Py_ssize_t, ndim=1] diag_arr = np.full(n, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] diag = diag_arr
    cdef Py_ssize_t[::1] pos = np.full(n, -1, dtype=np.intp)
    cdef Py_ssize_t i, k, kk, jj, p, start, stop
    cdef double lik, piv

    for i in range(n):
        for kk in range(indptr[i], indptr[i + 1]):
            if indices[kk] == i:
                diag[i] = kk
                break
        if diag[i] < 0:
            return lu_arr, diag_arr, i

    for i in range(n):
        start = indptr[i]
        stop = indptr[i + 1]
        for kk in range(start, stop):
            pos[indices[kk]] = kk
        for kk in range(start, diag[i]):
            k = indices[kk]
            piv = lu[diag[k]]
            lik = lu[kk] / piv
            lu[kk] = lik
            for jj in range(diag[k] + 1, indptr[k + 1]):
                p = pos[indices[jj]]
                if p >= 0:
                    lu[p] -= lik * lu[jj]
        for kk in range(start, stop):
            pos[indices[kk]] = -1
        if lu[diag[i]] == 0.0:
            return lu_arr, diag_arr, i
    return lu_arr, diag_arr, -1


def ilu0_solve(const Py_ssize_t[::1] indptr, const Py_ssize_t[::1] indices,
               const double[::1] lu, const Py_ssize_t[::1] diag, const double[::1] b):
    """Solve ``L U x = b`` with the factors from :func:`ilu0_factor`."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] x_arr = np.array(b, dtype=np.float64, copy=True)
    cdef double[::1] x = x_arr
    cdef Py_ssize_t i, kk
    cdef double acc
    for i in range(n):
        acc = x[i]
        for kk in range(indptr[i], diag[i]):
            acc -= lu[kk] * x[indices[kk]]
        x[i] = acc
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for kk in range(diag[i] + 1, indptr[i + 1]):
            acc -= lu[kk] * x[indices[kk]]
        x[i] = acc / lu[diag[i]]
    return x_arr
