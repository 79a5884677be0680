"""Change of variables near a contact point: radial-type flattening onto a triangle and the
vertical shift that flattens the graph, with the coefficients of the transformed Lamé operator.

These maps are a verification tool; the production solve uses the physical mesh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import WindowTooLarge
from ..profile import Profile, diff_nodal
from .lame import DisplacementField, stress


def flattened_stress(hp, xi, lam: float, mu: float) -> np.ndarray:
    """Coefficient action A(h') xi for v(x, y) = u(x, y + h(x)), xi = grad v (xi_ij = d_j v_i).

    Written out componentwise; reduces to C xi at h' = 0.
    """
    hp = np.asarray(hp, dtype=float)
    xi = np.asarray(xi, dtype=float)
    x11, x12, x21, x22 = xi[..., 0, 0], xi[..., 0, 1], xi[..., 1, 0], xi[..., 1, 1]
    d1 = x11 - x12 * hp  # d_x u_1
    div = d1 + x22
    shear = x12 + x21 - x22 * hp
    out = np.empty(np.broadcast(hp, x11).shape + (2, 2))
    out[..., 0, 0] = 2 * mu * d1 + lam * div
    out[..., 0, 1] = -(2 * mu * d1 + lam * div) * hp + mu * shear
    out[..., 1, 0] = mu * shear
    out[..., 1, 1] = -mu * shear * hp + 2 * mu * x22 + lam * div
    return out


def flattened_stress_by_composition(hp, xi, lam: float, mu: float) -> np.ndarray:
    """Same operator built as (sigma e1, sigma e2 - h' sigma e1) with sigma = C(grad u)."""
    hp = np.asarray(hp, dtype=float)
    xi = np.asarray(xi, dtype=float)
    G = xi.copy()
    G[..., :, 0] = xi[..., :, 0] - hp[..., None] * xi[..., :, 1]
    S = stress(G, lam, mu)
    out = S.copy()
    out[..., :, 1] = S[..., :, 1] - hp[..., None] * S[..., :, 0]
    return out


def coefficient_tensor(hp, lam: float, mu: float) -> np.ndarray:
    """A_ijkl with (A xi)_ij = A_ijkl xi_kl, evaluated at each slope in ``hp``."""
    hp = np.atleast_1d(np.asarray(hp, dtype=float))
    T = np.empty(hp.shape + (2, 2, 2, 2))
    for k in range(2):
        for l in range(2):
            e = np.zeros((2, 2))
            e[k, l] = 1.0
            T[..., :, :, k, l] = flattened_stress(hp, np.broadcast_to(e, hp.shape + (2, 2)), lam, mu)
    return T


@dataclass(frozen=True)
class FlatteningMap:
    corner: str
    x: np.ndarray  # abscissae of the window nodes, distance from the corner
    sigma: np.ndarray
    slope: float  # m = h'(corner), measured into the film
    r: float
    A: np.ndarray  # coefficient tensors at the window nodes

    def Phi(self, x, y):
        return x, y / np.interp(x, self.x, self.sigma)

    def Psi(self, x, y):
        return x, y * np.interp(x, self.x, self.sigma)


def flattening_transform(p: Profile, f: DisplacementField, r: float, which_corner: str = "left", lam=1.0, mu=1.0):
    """sigma(x) = m x / h(x) on the window (0, r] measured from the corner, sigma(0) = 1.

    Returns ``(map, points, v)`` where ``points`` lie in the triangle
    0 < y < m x and ``v`` is the displacement pulled back to them. On a
    fibered mesh the pull-back of vertex (fiber j, layer eta) lands at
    (x_j, eta m x_j), so v is sampled without interpolation.
    """
    if which_corner not in ("left", "right"):
        raise ValueError("which_corner must be 'left' or 'right'")
    mesh = f.mesh
    hp = diff_nodal(p.h, p.dx, 1)
    if which_corner == "left":
        dist = p.x - p.alpha
        slope = hp[0]
        node_order = np.arange(p.n)
        sign = 1.0
    else:
        dist = p.beta - p.x
        slope = -hp[-1]
        node_order = np.arange(p.n)[::-1]
        sign = -1.0
    dist = dist[node_order]
    h = p.h[node_order]
    win = np.flatnonzero(dist <= r * (1 + 1e-12))
    if len(win) < 2 or win[-1] >= p.n - 1:
        raise WindowTooLarge(f"window r={r} does not fit inside the support")
    if np.any(h[win[1:]] <= 0):
        raise WindowTooLarge("h vanishes inside the window")
    sigma = np.ones(len(win))
    sigma[1:] = slope * dist[win[1:]] / h[win[1:]]
    if np.max(np.abs(sigma - 1.0)) > 0.5:
        raise WindowTooLarge(f"|sigma - 1| = {np.max(np.abs(sigma - 1.0)):.3f} exceeds 1/2 on r={r}")
    A = coefficient_tensor(sign * hp[node_order][win], lam, mu)
    fmap = FlatteningMap(which_corner, dist[win], sigma, float(slope), float(r), A)
    nodes = node_order[win]
    sel = np.isin(mesh.fiber, nodes)
    local = np.searchsorted(nodes if which_corner == "left" else nodes[::-1], mesh.fiber[sel])
    if which_corner == "right":
        local = len(nodes) - 1 - local
    xs = dist[win][local]
    pts = np.column_stack((xs, mesh.eta[sel] * slope * xs))
    v = f.u[sel].copy()
    if which_corner == "right":
        v[:, 0] *= -1.0  # mirrored frame
    return fmap, pts, v
