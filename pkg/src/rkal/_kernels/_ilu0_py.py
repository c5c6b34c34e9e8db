"""Pure-Python ILU(0) kernels; same contract as the compiled ``_ilu0`` module."""

import numpy as np


def ilu0_factor(indptr, indices, data):
    n = len(indptr) - 1
    lu = np.array(data, dtype=np.float64, copy=True)
    diag = np.full(n, -1, dtype=np.intp)
    indptr = indptr.tolist()
    indices = indices.tolist()
    for i in range(n):
        for kk in range(indptr[i], indptr[i + 1]):
            if indices[kk] == i:
                diag[i] = kk
                break
        if diag[i] < 0:
            return lu, diag, i

    vals = lu.tolist()
    dg = diag.tolist()
    for i in range(n):
        start, stop = indptr[i], indptr[i + 1]
        pos = {indices[kk]: kk for kk in range(start, stop)}
        for kk in range(start, dg[i]):
            k = indices[kk]
            lik = vals[kk] / vals[dg[k]]
            vals[kk] = lik
            for jj in range(dg[k] + 1, indptr[k + 1]):
                p = pos.get(indices[jj])
                if p is not None:
                    vals[p] -= lik * vals[jj]
        if vals[dg[i]] == 0.0:
            return np.array(vals), diag, i
    return np.array(vals), diag, -1


def ilu0_solve(indptr, indices, lu, diag, b):
    n = len(indptr) - 1
    ip = indptr.tolist()
    ix = indices.tolist()
    v = lu.tolist()
    dg = diag.tolist()
    x = list(map(float, b))
    for i in range(n):
        acc = x[i]
        for kk in range(ip[i], dg[i]):
            acc -= v[kk] * x[ix[kk]]
        x[i] = acc
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for kk in range(dg[i] + 1, ip[i + 1]):
            acc -= v[kk] * x[ix[kk]]
        x[i] = acc / v[dg[i]]
    return np.array(x)
