# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the elasticity hot loops; same signatures as _pykernels."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline void _grads(const double[:, :] V, const long[:, :] T, Py_ssize_t t,
                        double* g, double* area) noexcept nogil:
    cdef long a = T[t, 0], b = T[t, 1], c = T[t, 2]
    cdef double x0 = V[a, 0], y0 = V[a, 1]
    cdef double x1 = V[b, 0], y1 = V[b, 1]
    cdef double x2 = V[c, 0], y2 = V[c, 1]
    cdef double det = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    area[0] = 0.5 * det
    g[0] = (y1 - y2) / det
    g[1] = (x2 - x1) / det
    g[2] = (y2 - y0) / det
    g[3] = (x0 - x2) / det
    g[4] = (y0 - y1) / det
    g[5] = (x1 - x0) / det


def p1_gradients(verts, tris):
    cdef const double[:, :] V = np.ascontiguousarray(verts, dtype=np.float64)
    cdef const long[:, :] T = np.ascontiguousarray(tris, dtype=np.int64)
    cdef Py_ssize_t nt = T.shape[0], t, k
    area = np.empty(nt)
    grads = np.empty((nt, 3, 2))
    cdef double[:] A = area
    cdef double[:, :, :] G = grads
    cdef double g[6]
    cdef double ar
    with nogil:
        for t in range(nt):
            _grads(V, T, t, g, &ar)
            A[t] = ar
            for k in range(3):
                G[t, k, 0] = g[2 * k]
                G[t, k, 1] = g[2 * k + 1]
    return area, grads


def assemble_elasticity(verts, tris, double lam, double mu):
    cdef const double[:, :] V = np.ascontiguousarray(verts, dtype=np.float64)
    cdef const long[:, :] T = np.ascontiguousarray(tris, dtype=np.int64)
    cdef Py_ssize_t nt = T.shape[0], t, i, j, a, b, pos
    rows = np.empty(36 * nt, dtype=np.int64)
    cols = np.empty(36 * nt, dtype=np.int64)
    vals = np.empty(36 * nt)
    cdef long[:] R = rows
    cdef long[:] C = cols
    cdef double[:] X = vals
    cdef double g[6]
    cdef double Bm[3][6]
    cdef double DB[3][6]
    cdef long dof[6]
    cdef double ar, s
    cdef double d11 = lam + 2 * mu, d12 = lam, d33 = mu
    with nogil:
        for t in range(nt):
            _grads(V, T, t, g, &ar)
            for a in range(3):
                dof[2 * a] = 2 * T[t, a]
                dof[2 * a + 1] = 2 * T[t, a] + 1
                Bm[0][2 * a] = g[2 * a]
                Bm[0][2 * a + 1] = 0.0
                Bm[1][2 * a] = 0.0
                Bm[1][2 * a + 1] = g[2 * a + 1]
                Bm[2][2 * a] = g[2 * a + 1]
                Bm[2][2 * a + 1] = g[2 * a]
            for j in range(6):
                DB[0][j] = d11 * Bm[0][j] + d12 * Bm[1][j]
                DB[1][j] = d12 * Bm[0][j] + d11 * Bm[1][j]
                DB[2][j] = d33 * Bm[2][j]
            pos = 36 * t
            for i in range(6):
                for j in range(6):
                    s = Bm[0][i] * DB[0][j] + Bm[1][i] * DB[1][j] + Bm[2][i] * DB[2][j]
                    R[pos] = dof[i]
                    C[pos] = dof[j]
                    X[pos] = s * ar
                    pos += 1
    return rows, cols, vals


cdef inline void _matvec(const long[:] ip, const long[:] ix, const double[:] dv,
                         double[:] x, double[:] out) noexcept nogil:
    cdef Py_ssize_t n = ip.shape[0] - 1, i, k
    cdef double s
    for i in range(n):
        s = 0.0
        for k in range(ip[i], ip[i + 1]):
            s += dv[k] * x[ix[k]]
        out[i] = s


def csr_matvec(indptr, indices, data, x):
    cdef const long[:] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long[:] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[:] dv = np.ascontiguousarray(data, dtype=np.float64)
    xx = np.ascontiguousarray(x, dtype=np.float64).copy()
    out = np.empty(len(ip) - 1)
    _matvec(ip, ix, dv, xx, out)
    return out


def pcg(indptr, indices, data, b, x0, double rtol, long maxiter):
    cdef const long[:] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long[:] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[:] dv = np.ascontiguousarray(data, dtype=np.float64)
    cdef Py_ssize_t n = ip.shape[0] - 1, i, k
    xa = np.array(x0, dtype=np.float64, copy=True)
    cdef double[:] x = xa
    cdef const double[:] bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:] inv = np.zeros(n)
    cdef double[:] r = np.empty(n)
    cdef double[:] z = np.empty(n)
    cdef double[:] p = np.empty(n)
    cdef double[:] Ap = np.empty(n)
    cdef double bnorm = 0.0, res, rz, rz_new, pAp = 1.0, a, beta
    cdef long it
    for i in range(n):
        for k in range(ip[i], ip[i + 1]):
            if ix[k] == i:
                inv[i] = dv[k]
        if inv[i] <= 0.0:
            return xa, -1, np.inf
        inv[i] = 1.0 / inv[i]
    with nogil:
        _matvec(ip, ix, dv, x, Ap)
        res = 0.0
        for i in range(n):
            r[i] = bb[i] - Ap[i]
            res += r[i] * r[i]
            bnorm += bb[i] * bb[i]
        bnorm = sqrt(bnorm)
        if bnorm == 0.0:
            bnorm = 1.0
        res = sqrt(res)
    if res <= rtol * bnorm:
        return xa, 0, res / bnorm
    rz = 0.0
    for i in range(n):
        z[i] = inv[i] * r[i]
        p[i] = z[i]
        rz += r[i] * z[i]
    it = 0
    with nogil:
        while it < maxiter:
            it += 1
            _matvec(ip, ix, dv, p, Ap)
            pAp = 0.0
            for i in range(n):
                pAp += p[i] * Ap[i]
            if pAp <= 0.0:
                break
            a = rz / pAp
            res = 0.0
            rz_new = 0.0
            for i in range(n):
                x[i] += a * p[i]
                r[i] -= a * Ap[i]
                res += r[i] * r[i]
                z[i] = inv[i] * r[i]
                rz_new += r[i] * z[i]
            res = sqrt(res)
            if res <= rtol * bnorm:
                break
            beta = rz_new / rz
            rz = rz_new
            for i in range(n):
                p[i] = z[i] + beta * p[i]
    if pAp <= 0.0:
        return xa, -it, np.inf
    if res > rtol * bnorm:
        return xa, maxiter + 1, res / bnorm
    return xa, it, res / bnorm


def element_forces(verts, tris, u, double lam, double mu):
    cdef const double[:, :] V = np.ascontiguousarray(verts, dtype=np.float64)
    cdef const long[:, :] T = np.ascontiguousarray(tris, dtype=np.int64)
    cdef const double[:, :] U = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t nt = T.shape[0], t, b
    Wa = np.empty(nt)
    Fa = np.empty((nt, 3, 2))
    cdef double[:] Wv = Wa
    cdef double[:, :, :] F = Fa
    cdef double g[6]
    cdef double ar, g11, g12, g21, g22, e12, tr, s11, s12, s22, W, m11, m12, m21, m22
    with nogil:
        for t in range(nt):
            _grads(V, T, t, g, &ar)
            g11 = 0.0; g12 = 0.0; g21 = 0.0; g22 = 0.0
            for b in range(3):
                g11 += U[T[t, b], 0] * g[2 * b]
                g12 += U[T[t, b], 0] * g[2 * b + 1]
                g21 += U[T[t, b], 1] * g[2 * b]
                g22 += U[T[t, b], 1] * g[2 * b + 1]
            e12 = 0.5 * (g12 + g21)
            tr = g11 + g22
            s11 = 2 * mu * g11 + lam * tr
            s22 = 2 * mu * g22 + lam * tr
            s12 = 2 * mu * e12
            W = 0.5 * (s11 * g11 + s22 * g22 + 2 * s12 * e12)
            Wv[t] = W
            # M = W I - grad(u)^T sigma
            m11 = W - (g11 * s11 + g21 * s12)
            m12 = -(g11 * s12 + g21 * s22)
            m21 = -(g12 * s11 + g22 * s12)
            m22 = W - (g12 * s12 + g22 * s22)
            for b in range(3):
                F[t, b, 0] = ar * (m11 * g[2 * b] + m12 * g[2 * b + 1])
                F[t, b, 1] = ar * (m21 * g[2 * b] + m22 * g[2 * b + 1])
    return Wa, Fa
