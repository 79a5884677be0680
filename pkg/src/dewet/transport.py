"""Dissipation term linking consecutive states through their cumulative masses.

Both cumulative masses are piecewise quadratic with breakpoints on the union
of the two grids and the metric weight is constant on each union cell, so the
3-point Gauss rule per cell integrates the cost exactly. The gradient is the
exact derivative of that quantity with the grid stretching with (alpha, beta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import PhysicalParams
from .profile import GAUSS_W, GAUSS_X, CumulativeMass, Profile, mass_below, union_grid
from .surface import ProfileGradient


@dataclass(frozen=True)
class TransportInputs:
    current: Profile
    previous: Profile
    tau: float
    grid: np.ndarray  # union grid
    cell_weight: np.ndarray  # sqrt(1 + (h0')^2) per union cell, 1 outside the previous support
    xg: np.ndarray  # quadrature points
    wg: np.ndarray  # quadrature weights (cell length included)
    weight_g: np.ndarray  # metric weight at the quadrature points

    @property
    def Hcur(self) -> CumulativeMass:
        return CumulativeMass(self.grid, mass_below(self.current, self.grid))

    @property
    def Hprev(self) -> CumulativeMass:
        return CumulativeMass(self.grid, mass_below(self.previous, self.grid))

    @property
    def weight(self) -> np.ndarray:
        """Nodal weight on the union grid, taking the limit from inside the previous support."""
        w = np.ones(len(self.grid))
        q = self.previous
        inside = (self.grid >= q.alpha) & (self.grid <= q.beta)
        c = np.clip(np.floor((self.grid[inside] - q.alpha) / q.dx).astype(int), 0, q.n - 2)
        w[inside] = np.sqrt(1.0 + (np.diff(q.h)[c] / q.dx) ** 2)
        return w


def previous_weight(prev: Profile, x: np.ndarray) -> np.ndarray:
    """sqrt(1 + (h0')^2) of the piecewise-linear previous profile at points strictly inside cells."""
    w = np.ones(len(x))
    inside = (x > prev.alpha) & (x < prev.beta)
    c = np.clip(np.floor((x[inside] - prev.alpha) / prev.dx).astype(int), 0, prev.n - 2)
    w[inside] = np.sqrt(1.0 + (np.diff(prev.h)[c] / prev.dx) ** 2)
    return w


def transport_inputs(current: Profile, previous: Profile, tau: float, extra=None) -> TransportInputs:
    """Union grid, per-cell metric weight and Gauss points. ``extra`` adds grid points (exactness is unaffected)."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    pieces = [current.x, previous.x]
    if extra is not None:
        pieces.append(np.asarray(extra, dtype=float))
    grid = union_grid(*pieces)
    left, length = grid[:-1], np.diff(grid)
    mids = left + 0.5 * length
    cw = previous_weight(previous, mids)
    xg = (left[:, None] + GAUSS_X[None, :] * length[:, None]).ravel()
    wg = (length[:, None] * GAUSS_W[None, :]).ravel()
    return TransportInputs(current, previous, float(tau), grid, cw, xg, wg, np.repeat(cw, 3))


def transport_cost(t: TransportInputs, params: PhysicalParams) -> float:
    """(1/2tau) int (H - H0)^2 w dx + (sigma0/2tau) ((alpha-alpha0)^2 + (beta-beta0)^2)."""
    dH = mass_below(t.current, t.xg) - mass_below(t.previous, t.xg)
    bulk = float(np.dot(t.wg * t.weight_g, dH * dH))
    da = t.current.alpha - t.previous.alpha
    db = t.current.beta - t.previous.beta
    return 0.5 / t.tau * (bulk + params.sigma0 * (da * da + db * db))


def mass_increment_norm2(current: Profile, previous: Profile) -> float:
    """Unweighted int (H - H0)^2 dx, exact."""
    t = transport_inputs(current, previous, 1.0)
    dH = mass_below(current, t.xg) - mass_below(previous, t.xg)
    return float(np.dot(t.wg, dH * dH))


def _locate(p: Profile, x):
    """Cell index j (n-1 beyond beta, -1 before alpha), local offset t, stretch coordinate s in [0,1]."""
    s = (x - p.alpha) / p.dx
    j = np.floor(s).astype(int)
    t = (s - j) * p.dx
    before = s < 0
    beyond = s >= p.n - 1
    j = np.clip(j, 0, p.n - 2)
    t = np.where(beyond, p.dx, t)
    return j, t, before, beyond, np.clip(s / (p.n - 1), 0.0, 1.0)


def _endpoint_sensitivities(p: Profile, x):
    """dH(x)/dalpha and dH(x)/dbeta at fixed nodal values."""
    j, t, before, beyond, sig = _locate(p, x)
    hv = p.h[j] + (p.h[j + 1] - p.h[j]) * t / p.dx
    hv = np.where(beyond | before, 0.0, hv)
    H = mass_below(p, x)
    W = p.width
    dA = -hv * (1.0 - sig) - H / W
    dB = -hv * sig + H / W
    dA = np.where(before, 0.0, dA)
    dB = np.where(before, 0.0, dB)
    return dA, dB


def transport_gradient(t: TransportInputs, params: PhysicalParams) -> ProfileGradient:
    """Exact gradient; the nodal part is the reverse cumulative sum (adjoint of the cumulative mass)."""
    p = t.current
    n, d = p.n, p.dx
    dH = mass_below(p, t.xg) - mass_below(t.previous, t.xg)
    q = t.wg * t.weight_g * dH / t.tau
    j, tl, before, beyond, _ = _locate(p, t.xg)
    keep = ~before
    q, j, tl, beyond = q[keep], j[keep], tl[keep], beyond[keep]
    j_eff = np.where(beyond, n - 1, j)
    tl = np.where(beyond, 0.0, tl)
    per = np.bincount(j_eff, weights=q, minlength=n)
    after = np.concatenate((np.cumsum(per[::-1])[::-1][1:], [0.0]))  # sum over cells j > i
    g = d * after
    g[0] *= 0.5
    g[1:] += 0.5 * d * per[1:]
    g += np.bincount(j_eff, weights=q * (tl - tl * tl / (2 * d)), minlength=n)
    g[1:] += np.bincount(j_eff, weights=q * tl * tl / (2 * d), minlength=n)[:-1]
    dA, dB = _endpoint_sensitivities(p, t.xg)
    qa = t.wg * t.weight_g * dH / t.tau
    ga = float(np.dot(qa, dA)) + params.sigma0 * (p.alpha - t.previous.alpha) / t.tau
    gb = float(np.dot(qa, dB)) + params.sigma0 * (p.beta - t.previous.beta) / t.tau
    return ProfileGradient(g, ga, gb)


def mass_jacobian(t: TransportInputs) -> np.ndarray:
    """Dense dH(x_g)/dz for z = [alpha, beta, h_1..h_{n-2}] at every quadrature point."""
    p = t.current
    n, d = p.n, p.dx
    j, tl, before, beyond, _ = _locate(p, t.xg)
    j_eff = np.where(beyond, n - 1, j)
    tl = np.where(beyond, 0.0, tl)
    i = np.arange(1, n - 1)[None, :]
    je = j_eff[:, None]
    tt = tl[:, None]
    M = np.where(i < je, d, 0.0)
    M = M + np.where(i == je, 0.5 * d + tt - tt * tt / (2 * d), 0.0)
    M = M + np.where(i == je + 1, tt * tt / (2 * d), 0.0)
    M[before] = 0.0
    dA, dB = _endpoint_sensitivities(p, t.xg)
    return np.column_stack((dA, dB, M))


def gauss_newton_hessian(t: TransportInputs, params: PhysicalParams) -> np.ndarray:
    """(1/tau) J^T diag(w) J plus the contact-drag curvature; exact up to the dropped second derivatives of H."""
    Jm = mass_jacobian(t)
    Hm = (Jm * (t.wg * t.weight_g)[:, None]).T @ Jm / t.tau
    Hm[0, 0] += params.sigma0 / t.tau
    Hm[1, 1] += params.sigma0 / t.tau
    return Hm


def weighted_mass_excess(current: Profile, previous: Profile) -> np.ndarray:
    """Hbar(x) = int_{-inf}^x (H - H0) sqrt(1 + (h0')^2) at the current nodes."""
    t = transport_inputs(current, previous, 1.0)
    dH = mass_below(current, t.xg) - mass_below(previous, t.xg)
    cells = (t.wg * t.weight_g * dH).reshape(-1, 3).sum(axis=1)
    cum = np.concatenate(([0.0], np.cumsum(cells)))
    idx = np.searchsorted(t.grid, current.x)
    idx = np.clip(idx, 0, len(t.grid) - 1)
    # nodes merged into a nearby union point map to that point
    near = np.abs(t.grid[idx] - current.x) > np.abs(t.grid[np.maximum(idx - 1, 0)] - current.x)
    idx = np.where(near, np.maximum(idx - 1, 0), idx)
    return cum[idx]
