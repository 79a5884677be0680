"""Surface energy with curvature regularization, its discrete gradient, and intrinsic geometry.

The gradient below is the exact gradient of the discrete energy, so an
optimizer driving it to zero solves the discrete optimality system.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateSlope
from .params import PhysicalParams
from .profile import Profile, diff_nodal

SLOPE_FLOOR = 1e-8


@dataclass
class ProfileGradient:
    """Gradient of a profile functional.

    ``h`` has one entry per node (endpoint entries are reported but the
    endpoints are pinned to zero); ``alpha`` and ``beta`` are derivatives at
    fixed nodal values, i.e. the grid stretches with the contact points.
    """

    h: np.ndarray
    alpha: float
    beta: float

    def __add__(self, other):
        return ProfileGradient(self.h + other.h, self.alpha + other.alpha, self.beta + other.beta)

    def scaled(self, c):
        return ProfileGradient(c * self.h, c * self.alpha, c * self.beta)

    def flat(self) -> np.ndarray:
        """``[d/dalpha, d/dbeta, d/dh_1, ..., d/dh_{n-2}]``."""
        return np.concatenate(([self.alpha, self.beta], self.h[1:-1]))


@lru_cache(maxsize=32)
def _stencils(n: int):
    """Forward difference (cells), and central first/second differences at interior nodes."""
    G = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n)).tocsr()
    E = sp.diags([-np.ones(n - 2), np.ones(n - 2)], [0, 2], shape=(n - 2, n)).tocsr()
    C = sp.diags([np.ones(n - 2), -2 * np.ones(n - 2), np.ones(n - 2)], [0, 1, 2], shape=(n - 2, n)).tocsr()
    return G, E, C


def _bending_pieces(h, d, nu):
    _, E, C = _stencils(len(h))
    p = (E @ h) / (2 * d)
    a = (C @ h) / (d * d)
    J = np.sqrt(1.0 + p * p)
    f = 0.5 * nu * a * a / J**5
    f_p = -2.5 * nu * a * a * p / J**7
    f_a = nu * a / J**5
    return p, a, J, f, f_p, f_a


def surface_energy(p: Profile, params: PhysicalParams) -> float:
    """gamma*length - gamma0*(beta-alpha) + nu0/2 * int h''^2 / J^5.

    Length is the exact arclength of the piecewise-linear graph; the bending
    integral is the trapezoid rule on central differences at the interior
    nodes, with the end nodes contributing zero (natural condition h'' = 0
    there). This keeps the discrete optimality conditions consistent up to the
    contact points.
    """
    d = p.dx
    length = float(np.hypot(d, np.diff(p.h)).sum())
    _, _, _, f, _, _ = _bending_pieces(p.h, d, params.nu0)
    return params.gamma * length - params.gamma0 * p.width + d * float(f.sum())


def length_energy(p: Profile, params: PhysicalParams) -> float:
    """The gamma/gamma0 part alone (bounded below by (gamma-gamma0)(beta-alpha))."""
    return float(params.gamma * np.hypot(p.dx, np.diff(p.h)).sum() - params.gamma0 * p.width)


def _check_slopes(hp):
    if abs(hp[0]) < SLOPE_FLOOR or abs(hp[-1]) < SLOPE_FLOOR:
        raise DegenerateSlope(f"contact slopes {hp[0]:.3e}, {hp[-1]:.3e} too small")


def surface_gradient(p: Profile, params: PhysicalParams, check_slopes: bool = True) -> ProfileGradient:
    """Exact gradient of :func:`surface_energy`; alpha/beta entries move the grid at fixed nodal values."""
    n, d, h = p.n, p.dx, p.h
    if check_slopes:
        _check_slopes(diff_nodal(h, d, 1))
    G, E, C = _stencils(n)
    delta = np.diff(h)
    ell = np.hypot(d, delta)
    pp, a, J, f, f_p, f_a = _bending_pieces(h, d, params.nu0)
    grad_h = params.gamma * (G.T @ (delta / ell)) + 0.5 * (E.T @ f_p) + (C.T @ f_a) / d
    dS_dd = params.gamma * float(np.sum(d / ell)) - params.gamma0 * (n - 1)
    dS_dd += float(np.sum(f - pp * f_p - 2.0 * a * f_a))
    return ProfileGradient(np.asarray(grad_h), -dS_dd / (n - 1), dS_dd / (n - 1))


@dataclass(frozen=True)
class SurfaceGeometry:
    x: np.ndarray
    s: np.ndarray
    J: np.ndarray
    kappa: np.ndarray
    theta_alpha: float
    theta_beta: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,s,J,kappa\n")
        for row in zip(self.x, self.s, self.J, self.kappa):
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()


def geometry(p: Profile) -> SurfaceGeometry:
    """Arclength (exact chord sums), metric factor, signed curvature h''/J^3 and contact angles."""
    d = p.dx
    hp = diff_nodal(p.h, d, 1)
    hpp = diff_nodal(p.h, d, 2)
    J = np.sqrt(1.0 + hp**2)
    chords = np.hypot(d, np.diff(p.h))
    s = np.concatenate(([0.0], np.cumsum(chords)))
    kappa = hpp / J**3
    return SurfaceGeometry(
        x=p.x,
        s=s,
        J=J,
        kappa=kappa,
        theta_alpha=float(np.arcsin(hp[0] / J[0])),
        theta_beta=float(np.arcsin(hp[-1] / J[-1])),
    )


def surface_hessian(p: Profile, params: PhysicalParams, eps: float = 1e-7) -> np.ndarray:
    """Dense Hessian of the discrete surface energy in ``[alpha, beta, h_1..h_{n-2}]``.

    The nodal block is exact; the alpha/beta rows and columns come from
    central differences of the exact gradient. Used as an optimizer model.
    """
    n, d, h = p.n, p.dx, p.h
    nu = params.nu0
    G, E, C = _stencils(n)
    ell = np.hypot(d, np.diff(h))
    pp, a, J, _, _, _ = _bending_pieces(h, d, nu)
    f_pp = -2.5 * nu * a * a * (J**-7 - 7 * pp * pp * J**-9)
    f_pa = -5.0 * nu * a * pp * J**-7
    f_aa = nu * J**-5
    Hhh = (
        params.gamma * (G.T @ sp.diags(d * d / ell**3) @ G)
        + E.T @ sp.diags(f_pp) @ E / (4 * d)
        + (E.T @ sp.diags(f_pa) @ C + C.T @ sp.diags(f_pa) @ E) / (2 * d * d)
        + C.T @ sp.diags(f_aa) @ C / d**3
    )
    H = np.zeros((n, n))
    H[2:, 2:] = Hhh.toarray()[1:-1, 1:-1]
    for k, (da, db) in enumerate(((1.0, 0.0), (0.0, 1.0))):
        cols = []
        for sgn in (1.0, -1.0):
            q = Profile(p.alpha + sgn * eps * da, p.beta + sgn * eps * db, p.h)
            cols.append(surface_gradient(q, params, check_slopes=False).flat())
        col = (cols[0] - cols[1]) / (2 * eps)
        H[:, k] = col
        H[k, :] = col
    H[:2, :2] = 0.5 * (H[:2, :2] + H[:2, :2].T)
    return H
