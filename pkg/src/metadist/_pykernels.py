"""Pure numpy implementation of the distance kernels.

Same signatures and encoding as the compiled ``_kernels`` module; used when
the extension is unavailable or ``METADIST_PURE_PYTHON=1``.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 1 << 18


def _coords(A, B, cols, kinds, weights, thetas, cat, cat_off, cat_size, hybrid):
    # A, B broadcastable (..., ncols)
    a = A[..., cols]
    b = B[..., cols]
    ea = np.isnan(a)
    eb = np.isnan(b)
    with np.errstate(invalid="ignore"):
        d = np.abs(a - b) * weights
    ind = kinds == 1
    if ind.any():
        d[..., ind] = np.where(a[..., ind] != b[..., ind], weights[ind], 0.0)
    for k in np.flatnonzero(kinds == 2):
        ak, bk = a[..., k], b[..., k]
        ok = ~(np.isnan(ak) | np.isnan(bk))
        idx = np.zeros(np.broadcast(ak, bk).shape, dtype=np.int64)
        ai = np.where(np.isnan(ak), 0, ak).astype(np.int64)
        bi = np.where(np.isnan(bk), 0, bk).astype(np.int64)
        idx[...] = cat_off[k] + ai * cat_size[k] + bi
        d[..., k] = np.where(ok, weights[k] * cat[idx], 0.0)
    one = ea ^ eb
    both = ea & eb
    if hybrid:
        d = np.where(ea | eb, 0.0, d)
    else:
        d = np.where(both, 0.0, d)
        d = np.where(one, np.broadcast_to(thetas, d.shape), d)
    return d


def _reduce(d, pmode, p):
    if pmode == 0:
        return d.sum(axis=-1)
    if pmode == 1:
        return np.sqrt((d * d).sum(axis=-1))
    if pmode == 3:
        return d.max(axis=-1, initial=0.0)
    with np.errstate(over="ignore"):
        acc = (d**p).sum(axis=-1)
        return np.where(np.isinf(acc), np.inf, acc ** (1.0 / p))


def pairwise(X, Y, cols, kinds, weights, thetas, cat, cat_off, cat_size, pmode, p, hybrid):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    m, n = X.shape[0], Y.shape[0]
    out = np.empty((m, n), dtype=np.float64)
    width = max(1, len(cols))
    step = max(1, _CHUNK // max(1, n * width))
    for s in range(0, m, step):
        block = X[s : s + step, None, :]
        d = _coords(block, Y[None, :, :], cols, kinds, weights, thetas, cat, cat_off, cat_size, hybrid)
        out[s : s + step] = _reduce(d, pmode, p)
    return out


def rowwise(X, Y, cols, kinds, weights, thetas, cat, cat_off, cat_size, pmode, p, hybrid):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    d = _coords(X, Y, cols, kinds, weights, thetas, cat, cat_off, cat_size, hybrid)
    return _reduce(d, pmode, p)
