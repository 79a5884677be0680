"""Reference numpy implementations of the hot loops (used when the extension is unavailable)."""

import numpy as np


def p1_gradients(verts, tris):
    """Per-triangle signed area and barycentric gradients, shape (T,), (T,3,2)."""
    p0 = verts[tris[:, 0]]
    p1 = verts[tris[:, 1]]
    p2 = verts[tris[:, 2]]
    e1 = p1 - p0
    e2 = p2 - p0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * det
    # grad lambda_i = rot(opposite edge) / det
    g = np.empty((len(tris), 3, 2))
    g[:, 0, 0] = p1[:, 1] - p2[:, 1]
    g[:, 0, 1] = p2[:, 0] - p1[:, 0]
    g[:, 1, 0] = p2[:, 1] - p0[:, 1]
    g[:, 1, 1] = p0[:, 0] - p2[:, 0]
    g[:, 2, 0] = p0[:, 1] - p1[:, 1]
    g[:, 2, 1] = p1[:, 0] - p0[:, 0]
    g /= det[:, None, None]
    return area, g


def _strain_matrices(g):
    # B maps the 6 local dofs (u1,u2 per vertex) to Voigt strain (e11, e22, 2 e12)
    T = g.shape[0]
    B = np.zeros((T, 3, 6))
    B[:, 0, 0::2] = g[:, :, 0]
    B[:, 1, 1::2] = g[:, :, 1]
    B[:, 2, 0::2] = g[:, :, 1]
    B[:, 2, 1::2] = g[:, :, 0]
    return B


def assemble_elasticity(verts, tris, lam, mu):
    """COO triplets (rows, cols, vals) of the P1 stiffness matrix; dof 2*v+c."""
    area, g = p1_gradients(verts, tris)
    B = _strain_matrices(g)
    D = np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])
    Ke = np.einsum("tki,kl,tlj->tij", B, D, B) * area[:, None, None]
    dofs = np.empty((len(tris), 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * tris
    dofs[:, 1::2] = 2 * tris + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    return rows, cols, Ke.ravel()


def csr_matvec(indptr, indices, data, x):
    n = len(indptr) - 1
    prod = data * x[indices]
    out = np.add.reduceat(prod, indptr[:-1]) if len(prod) else np.zeros(n)
    # reduceat misreports empty rows
    empty = indptr[1:] == indptr[:-1]
    if empty.any():
        out[empty] = 0.0
    return out


def pcg(indptr, indices, data, b, x0, rtol, maxiter):
    """Jacobi-preconditioned conjugate gradients; returns (x, iterations, relres)."""
    n = len(b)
    diag = np.zeros(n)
    for_rows = np.repeat(np.arange(n), np.diff(indptr))
    on = indices == for_rows
    diag[for_rows[on]] = data[on]
    if np.any(diag <= 0):
        return x0.copy(), -1, np.inf
    inv = 1.0 / diag
    x = x0.copy()
    r = b - csr_matvec(indptr, indices, data, x)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        bnorm = 1.0
    res = np.linalg.norm(r)
    if res <= rtol * bnorm:
        return x, 0, res / bnorm
    z = inv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = csr_matvec(indptr, indices, data, p)
        pAp = p @ Ap
        if pAp <= 0:
            return x, -it, np.inf
        a = rz / pAp
        x += a * p
        r -= a * Ap
        res = np.linalg.norm(r)
        if res <= rtol * bnorm:
            return x, it, res / bnorm
        z = inv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter + 1, res / bnorm


def element_forces(verts, tris, u, lam, mu):
    """Per-element energy density W and vertex shape forces A*(W I - grad(u)^T sigma) grad(lambda_b).

    Returns (W (T,), forces (T,3,2)).
    """
    area, g = p1_gradients(verts, tris)
    ut = u[tris]  # (T,3,2)
    grad = np.einsum("tbi,tbj->tij", ut, g)  # du_i/dx_j
    eps = 0.5 * (grad + np.transpose(grad, (0, 2, 1)))
    tr = eps[:, 0, 0] + eps[:, 1, 1]
    sig = 2 * mu * eps
    sig[:, 0, 0] += lam * tr
    sig[:, 1, 1] += lam * tr
    W = 0.5 * np.einsum("tij,tij->t", sig, eps)
    M = -np.einsum("tki,tkj->tij", grad, sig)  # -(grad u)^T sigma
    M[:, 0, 0] += W
    M[:, 1, 1] += W
    forces = np.einsum("tij,tbj->tbi", M, g) * area[:, None, None]
    return W, forces
