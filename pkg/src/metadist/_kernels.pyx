# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled distance kernels over encoded extended points.

Encoding: one float64 column per variable, NaN for EXC, category index for
categorical variables. ``kinds``: 0 numeric, 1 categorical indicator,
2 categorical matrix (row-major block at ``cat_off`` of side ``cat_size``).
``pmode``: 0 -> p=1, 1 -> p=2, 2 -> general p, 3 -> p=inf.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, fmax, pow, sqrt, isnan, INFINITY

cnp.import_array()


cdef inline double _coord(double a, double b, int kind, double w, double theta,
                          int hybrid, const double* cat, long off, long size) noexcept nogil:
    cdef bint ea = isnan(a)
    cdef bint eb = isnan(b)
    if ea or eb:
        if hybrid or (ea and eb):
            return 0.0
        return theta
    if kind == 0:
        return w * fabs(a - b)
    if kind == 1:
        return w if a != b else 0.0
    return w * cat[off + (<long> a) * size + (<long> b)]


cdef struct Params:
    Py_ssize_t n
    const long* cols
    const int* kinds
    const double* weights
    const double* thetas
    const double* cat
    const long* cat_off
    const long* cat_size
    int pmode
    double p
    int hybrid


cdef inline double _pair(const double* x, const double* y, const Params* P) noexcept nogil:
    cdef Py_ssize_t k, c
    cdef double acc = 0.0
    cdef double d
    cdef int pmode = P.pmode
    for k in range(P.n):
        c = P.cols[k]
        d = _coord(x[c], y[c], P.kinds[k], P.weights[k], P.thetas[k], P.hybrid, P.cat, P.cat_off[k], P.cat_size[k])
        if pmode == 0:
            acc += d
        elif pmode == 1:
            acc += d * d
        elif pmode == 2:
            acc += pow(d, P.p)
        elif d > acc:
            acc = d
    if pmode == 1:
        return sqrt(acc)
    if pmode == 2:
        if acc == INFINITY:
            return INFINITY
        return pow(acc, 1.0 / P.p)
    return acc


cdef Params _params(const long[::1] cols, const int[::1] kinds, const double[::1] weights,
                    const double[::1] thetas, const double[::1] cat, const long[::1] cat_off,
                    const long[::1] cat_size, int pmode, double p, int hybrid):
    cdef Params P
    P.n = cols.shape[0]
    P.cols = &cols[0] if P.n else NULL
    P.kinds = &kinds[0] if P.n else NULL
    P.weights = &weights[0] if P.n else NULL
    P.thetas = &thetas[0] if P.n else NULL
    P.cat = &cat[0]
    P.cat_off = &cat_off[0] if P.n else NULL
    P.cat_size = &cat_size[0] if P.n else NULL
    P.pmode, P.p, P.hybrid = pmode, p, hybrid
    return P


cdef void _row(const double* x, const double* Yt, Py_ssize_t n, const Params* P,
               double* acc, double* tmp) noexcept nogil:
    """Distances from one point to all ``n`` columns of the transposed block ``Yt``."""
    cdef Py_ssize_t j, k
    cdef double a, b, w, th, d, ex_both
    cdef const double* col
    cdef const double* row
    cdef int kind, pmode = P.pmode
    cdef long size
    for j in range(n):
        acc[j] = 0.0
    for k in range(P.n):
        col = Yt + k * n
        a = x[P.cols[k]]
        kind, w, th = P.kinds[k], P.weights[k], P.thetas[k]
        if isnan(a):
            if P.hybrid:
                continue
            # both excluded -> 0, otherwise theta
            for j in range(n):
                tmp[j] = 0.0 if isnan(col[j]) else th
        else:
            ex_both = 0.0 if P.hybrid else th
            if kind == 0:
                for j in range(n):
                    b = col[j]
                    tmp[j] = ex_both if isnan(b) else w * fabs(a - b)
            elif kind == 1:
                for j in range(n):
                    b = col[j]
                    tmp[j] = ex_both if isnan(b) else (w if a != b else 0.0)
            else:
                size = P.cat_size[k]
                row = P.cat + P.cat_off[k] + (<long> a) * size
                for j in range(n):
                    b = col[j]
                    tmp[j] = ex_both if isnan(b) else w * row[<long> b]
        if pmode == 0:
            for j in range(n):
                acc[j] += tmp[j]
        elif pmode == 1:
            for j in range(n):
                acc[j] += tmp[j] * tmp[j]
        elif pmode == 2:
            for j in range(n):
                d = tmp[j]
                if d != 0.0:
                    acc[j] += pow(d, P.p)
        else:
            for j in range(n):
                acc[j] = fmax(acc[j], tmp[j])
    if pmode == 1:
        for j in range(n):
            acc[j] = sqrt(acc[j])
    elif pmode == 2:
        for j in range(n):
            if acc[j] != INFINITY and acc[j] != 0.0:
                acc[j] = pow(acc[j], 1.0 / P.p)


def pairwise(const double[:, ::1] X, const double[:, ::1] Y, const long[::1] cols, const int[::1] kinds,
             const double[::1] weights, const double[::1] thetas, const double[::1] cat,
             const long[::1] cat_off, const long[::1] cat_size, int pmode, double p, int hybrid):
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t n = Y.shape[0]
    out = np.empty((m, n), dtype=np.float64)
    if m == 0 or n == 0:
        return out
    cdef Params P = _params(cols, kinds, weights, thetas, cat, cat_off, cat_size, pmode, p, hybrid)
    # used columns of Y, one contiguous row per variable
    Yt_arr = np.ascontiguousarray(np.asarray(Y)[:, np.asarray(cols)].T) if P.n else np.zeros((1, n))
    tmp_arr = np.empty(n, dtype=np.float64)
    cdef const double[:, ::1] Yt = Yt_arr
    cdef double[:, ::1] D = out
    cdef double[::1] tmp = tmp_arr
    cdef const double* xp = &X[0, 0]
    cdef Py_ssize_t sx = X.shape[1]
    cdef Py_ssize_t i
    with nogil:
        for i in range(m):
            _row(xp + i * sx, &Yt[0, 0], n, &P, &D[i, 0], &tmp[0])
    return out


def rowwise(const double[:, ::1] X, const double[:, ::1] Y, const long[::1] cols, const int[::1] kinds,
            const double[::1] weights, const double[::1] thetas, const double[::1] cat,
            const long[::1] cat_off, const long[::1] cat_size, int pmode, double p, int hybrid):
    cdef Py_ssize_t m = X.shape[0]
    out = np.empty(m, dtype=np.float64)
    if m == 0:
        return out
    cdef double[::1] D = out
    cdef Params P = _params(cols, kinds, weights, thetas, cat, cat_off, cat_size, pmode, p, hybrid)
    cdef const double* xp = &X[0, 0]
    cdef const double* yp = &Y[0, 0]
    cdef Py_ssize_t sx = X.shape[1]
    cdef Py_ssize_t sy = Y.shape[1]
    cdef Py_ssize_t i
    with nogil:
        for i in range(m):
            D[i] = _pair(xp + i * sx, yp + i * sy, &P)
    return out
