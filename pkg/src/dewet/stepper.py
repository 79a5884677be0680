"""Incremental minimization of surface + elastic + transport energy and the time-stepping loop.

Unknowns are z = (alpha, beta, h_1, ..., h_{n-2}) on a uniform grid that
stretches with the contact points, so no re-gridding is needed between
iterations. Each iteration takes a Newton-type step for the area-constrained
problem, projects the trial point back onto the admissible set and accepts it
with an Armijo test. Every accepted iterate is admissible, and the previous
state (zero transport cost) is always available as a fallback, which gives the
descent guarantee against the previous energy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .elasticity.lame import DisplacementField, elastic_energy, elastic_gradient, solve_profile
from .errors import (
    AdmissibilityError,
    DegenerateElement,
    DescentFailure,
    SchemeAborted,
    SingularSystem,
    SolverDiverged,
)
from .params import PhysicalParams
from .profile import LIP_SLACK, Profile, area, validate_admissible
from .surface import surface_energy, surface_gradient, surface_hessian
from .transport import gauss_newton_hessian, mass_increment_norm2, transport_cost, transport_gradient, transport_inputs

log = logging.getLogger(__name__)

DESCENT_RTOL = 1e-12
STAGNATION_WINDOW = 20  # iterations without halving the projected gradient before giving up on a step


@dataclass(frozen=True)
class StepOptions:
    ny: int = 8
    gtol: float = 1e-8  # relative to the projected-gradient norm at the previous state
    gtol_abs: float = 0.0
    max_iter: int = 5000
    armijo: float = 1e-4
    max_backtracks: int = 40
    cg_rtol: float = 1e-12
    hessian: str = "model"  # "model" (surface + transport Gauss-Newton) or "identity"

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "StepOptions":
        return cls(**d)


@dataclass
class StepState:
    profile: Profile
    field: DisplacementField
    energies: dict
    multiplier_m: float = 0.0

    @property
    def free_energy(self) -> float:
        """Surface plus elastic energy (no transport)."""
        return self.energies["surface"] + self.energies["elastic"]


@dataclass
class StepResult:
    state: StepState
    stats: dict


@dataclass
class Trajectory:
    k: int
    T: float
    params: PhysicalParams
    opts: StepOptions
    steps: list
    M0: float
    stats: list = field(default_factory=list)

    @property
    def tau(self) -> float:
        return 1.0 / self.k

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.steps)) / self.k


def _pack(p: Profile) -> np.ndarray:
    return np.concatenate(([p.alpha, p.beta], p.h[1:-1]))


def _unpack(z: np.ndarray) -> Profile:
    return Profile(float(z[0]), float(z[1]), np.concatenate(([0.0], z[2:], [0.0])))


def area_gradient(p: Profile) -> np.ndarray:
    """d(area)/dz; the trapezoid area is (beta - alpha)/(n-1) * sum(h)."""
    s = float(p.h.sum()) / (p.n - 1)
    return np.concatenate(([-s, s], np.full(p.n - 2, p.dx)))


def area_hessian(n: int) -> np.ndarray:
    H = np.zeros((n, n))
    H[0, 2:] = H[2:, 0] = -1.0 / (n - 1)
    H[1, 2:] = H[2:, 1] = 1.0 / (n - 1)
    return H


def evaluate(candidate: Profile, prev: StepState | None, tau: float, params: PhysicalParams, ny: int, x0=None, rtol=1e-12):
    """Energies, flat gradient and field for one candidate."""
    field_ = solve_profile(candidate, params, ny, x0=x0, rtol=rtol)
    S = surface_energy(candidate, params)
    E = elastic_energy(field_, params)
    g = surface_gradient(candidate, params, check_slopes=False) + elastic_gradient(field_, candidate, params)
    if prev is not None:
        t = transport_inputs(candidate, prev.profile, tau)
        Tt = transport_cost(t, params)
        g = g + transport_gradient(t, params)
    else:
        t, Tt = None, 0.0
    energies = {"surface": S, "elastic": E, "transport": Tt, "total": S + E + Tt}
    return energies, g.flat(), field_, t


def total_energy(candidate: Profile, prev: StepState | None, tau: float, params: PhysicalParams, ny: int = 8):
    """S + E + T for ``candidate``; returns ``(total, breakdown)``. ``prev=None`` drops the transport term."""
    energies, _, _, _ = evaluate(candidate, prev, tau, params, ny)
    return energies["total"], energies


def initial_state(p: Profile, params: PhysicalParams, ny: int = 8) -> StepState:
    energies, _, field_, _ = evaluate(p, None, 1.0, params, ny)
    return StepState(p, field_, energies, 0.0)


def lipschitz_minorant(h: np.ndarray, d: float, L: float) -> np.ndarray:
    """Largest L-Lipschitz function below h on the grid (two sweeps)."""
    out = h.copy()
    step = L * d
    for i in range(1, len(out)):
        out[i] = min(out[i], out[i - 1] + step)
    for i in range(len(out) - 2, -1, -1):
        out[i] = min(out[i], out[i + 1] + step)
    return out


def project(z: np.ndarray, params: PhysicalParams) -> Profile | None:
    """Map a trial point to an admissible profile, or None if that needs more than a small correction."""
    if not z[1] > z[0]:
        return None
    h = np.concatenate(([0.0], z[2:], [0.0]))
    if np.any(h[1:-1] <= 0.0):
        return None
    d = (z[1] - z[0]) / (len(h) - 1)
    L = params.L0 * (1.0 - 1e-12)
    for _ in range(20):
        if np.max(np.abs(np.diff(h))) > L * d:
            h = lipschitz_minorant(h, d, L)
        a = d * (h.sum())  # endpoints are zero, trapezoid = d * sum
        if a <= 0:
            return None
        h = h * (params.A0 / a)
        if np.max(np.abs(np.diff(h))) <= params.L0 * d:
            p = Profile(float(z[0]), float(z[1]), h)
            if abs(area(p) - params.A0) <= 1e-12 * params.A0:
                return p
            return p.with_heights(h * (params.A0 / area(p)))
    return None


def slope_constraint_rows(p: Profile, L: float, rtol: float = 1e-8) -> np.ndarray:
    """Gradients (in z) of the Lipschitz constraints s_j (h_{j+1} - h_j) - L (beta - alpha)/(n-1) <= 0 at the cap."""
    n = p.n
    dh = np.diff(p.h)
    act = np.flatnonzero(np.abs(dh) >= L * p.dx * (1 - rtol))
    rows = np.zeros((len(act), n))
    for r, j in enumerate(act):
        sgn = 1.0 if dh[j] > 0 else -1.0
        rows[r, 0] = L / (n - 1)
        rows[r, 1] = -L / (n - 1)
        if j + 1 <= n - 2:
            rows[r, j + 2] += sgn  # h_{j+1} sits at z[j+2]
        if j >= 1:
            rows[r, j + 1] -= sgn
    return rows


def _pg(g: np.ndarray, a: np.ndarray, d: float, C: np.ndarray | None = None):
    """Multiplier, projected gradient and its norm in the metric diag(1, 1, d, ..., d).

    ``C`` holds gradients of active inequality constraints; those whose
    multiplier has the wrong sign (the descent direction leaves the cap) are
    dropped one at a time. Returns ``(m, pg, norm, kept_rows)``.
    """
    Minv = np.ones_like(g)
    Minv[2:] = 1.0 / d
    C = np.zeros((0, len(g))) if C is None else C
    while True:
        N = np.vstack((a[None, :], C))
        G = (N * Minv) @ N.T
        mu = np.linalg.lstsq(G, (N * Minv) @ g, rcond=None)[0]
        # g = m a - lambda grad c with lambda >= 0, i.e. mu_c <= 0
        if len(C) and mu[1:].max() > 0:
            C = np.delete(C, int(np.argmax(mu[1:])), axis=0)
            continue
        break
    pg = g - N.T @ mu
    norm = math.sqrt(float(np.dot(pg * Minv, pg)))
    return float(mu[0]), pg, norm, C


def _model_hessian(p: Profile, t, params: PhysicalParams, m: float, kind: str) -> np.ndarray:
    n = p.n
    if kind == "identity":
        B = np.eye(n)
        B[2:, 2:] *= p.dx
        return B
    B = surface_hessian(p, params)
    if t is not None:
        B += gauss_newton_hessian(t, params)
    B -= m * area_hessian(n)
    # convexify: clamp eigenvalues from below
    w, V = np.linalg.eigh(0.5 * (B + B.T))
    floor = 1e-8 * max(1.0, float(np.max(np.abs(w))))
    w = np.maximum(np.abs(w), floor)
    return (V * w) @ V.T


def _roundoff_floor(p: Profile, t, params: PhysicalParams) -> float:
    """Projected-gradient norm below which round-off dominates.

    eps |B| |z| bounds the gradient change caused by one-ulp perturbations of
    the unknowns.
    """
    B = surface_hessian(p, params)
    if t is not None:
        B = B + gauss_newton_hessian(t, params)
    noise = np.finfo(float).eps * (np.abs(B) @ np.abs(_pack(p)))
    Minv = np.ones(p.n)
    Minv[2:] = 1.0 / p.dx
    return math.sqrt(float(np.dot(Minv * noise, noise)))


def _kkt_step(B: np.ndarray, g: np.ndarray, N: np.ndarray) -> np.ndarray:
    """Minimizer of the quadratic model subject to N step = 0."""
    try:
        c = sla.cho_factor(B)
        Bg = sla.cho_solve(c, g)
        BN = sla.cho_solve(c, N.T)
    except np.linalg.LinAlgError:
        Bg = np.linalg.solve(B, g)
        BN = np.linalg.solve(B, N.T)
    nu = np.linalg.lstsq(N @ BN, N @ Bg, rcond=None)[0]
    return -(Bg - BN @ nu)


def minimize_increment(prev: StepState, tau: float, params: PhysicalParams, opts: StepOptions = StepOptions()) -> StepResult:
    """One step of the scheme starting from (and compared against) ``prev``."""
    p = prev.profile
    ref = prev.free_energy
    z = _pack(p)
    x0 = prev.field.u
    energies, g, fld, t = evaluate(p, prev, tau, params, opts.ny, x0=x0, rtol=opts.cg_rtol)
    cur = p
    F = energies["total"]
    a = area_gradient(cur)
    m, pg, pgn, C = _pg(g, a, cur.dx, slope_constraint_rows(cur, params.L0))
    pgn0 = pgn
    floor = _roundoff_floor(cur, t, params)
    target = max(opts.gtol * pgn0, opts.gtol_abs, floor)
    stats = {"iterations": 0, "evaluations": 1, "pg0": pgn0, "floor": floor, "stalls": 0, "stagnated": False, "converged": pgn <= target, "reverted": False}
    it = 0
    best, best_it = pgn, 0
    while not stats["converged"] and it < opts.max_iter:
        if it - best_it >= STAGNATION_WINDOW:
            stats["stagnated"] = True
            break
        it += 1
        B = _model_hessian(cur, t, params, m, opts.hessian)
        step = _kkt_step(B, g, np.vstack((a[None, :], C)))
        slope = float(np.dot(g, step))
        if not slope < 0:
            Minv = np.ones_like(g)
            Minv[2:] = 1.0 / cur.dx
            step = -Minv * pg
            slope = float(np.dot(g, step))
        s = 1.0
        accepted = False
        for _ in range(opts.max_backtracks):
            q = project(z + s * step, params)
            if q is not None:
                try:
                    e2, g2, f2, t2 = evaluate(q, prev, tau, params, opts.ny, x0=fld.u, rtol=opts.cg_rtol)
                except (DegenerateElement, SolverDiverged, SingularSystem):
                    e2 = None
                stats["evaluations"] += 1
                if e2 is not None:
                    F2 = e2["total"]
                    a2 = area_gradient(q)
                    m2, pg2, pgn2, C2 = _pg(g2, a2, q.dx, slope_constraint_rows(q, params.L0))
                    armijo = F2 <= F + opts.armijo * s * slope
                    # below the round-off floor of F the energy test is meaningless;
                    # accept if the energy did not measurably rise and stationarity improved
                    flat = F2 <= F + 4e-16 * max(1.0, abs(F)) and pgn2 < pgn
                    if armijo or flat:
                        accepted = True
                        break
            s *= 0.5
        if not accepted:
            stats["stalls"] += 1
            break
        z, cur, F, g, fld, t, energies = _pack(q), q, F2, g2, f2, t2, e2
        a, m, pg, pgn, C = a2, m2, pg2, pgn2, C2
        stats["converged"] = pgn <= target
        if pgn < 0.5 * best:
            best, best_it = pgn, it
    stats.update(iterations=it, pg=pgn, target=target)
    state = StepState(cur, fld, energies, m)
    slack = DESCENT_RTOL * max(1.0, abs(energies["total"]))
    if energies["total"] > ref + slack:
        # cannot beat the incumbent: keep the previous state (zero transport cost)
        stats["reverted"] = True
        e0 = dict(prev.energies, transport=0.0, total=prev.free_energy)
        state = StepState(p, prev.field, e0, prev.multiplier_m)
        if e0["total"] > ref + slack:
            raise DescentFailure("previous state does not reproduce its own energy")
    return StepResult(state, stats)


def estimate_multiplier(state: StepState, prev: StepState, tau: float, params: PhysicalParams, exclude=None):
    """Least-squares multiplier of the nodal Euler-Lagrange equation; returns ``(m, residual_l2)``."""
    from .diagnostics import el_left_side, el_mask

    lhs = el_left_side(state, prev, tau, params)
    mask = el_mask(state.profile, prev.profile) if exclude is None else exclude
    vals = lhs[mask]
    m = float(vals.mean())
    res = vals - m
    return m, float(math.sqrt(state.profile.dx * np.dot(res, res)))


def check_initial(init: Profile, params: PhysicalParams):
    params.validate()
    report = validate_admissible(init, params, lip_slack=LIP_SLACK * params.L0)
    if not report.passed:
        raise AdmissibilityError("initial profile not admissible: " + report.summary())
    hp = init.slopes()
    if not (hp[0] > 0 > hp[-1]):
        raise AdmissibilityError("initial contact slopes must satisfy h'(alpha) > 0 > h'(beta)")


def run_minimizing_movements(
    init: Profile,
    k: int,
    T: float,
    params: PhysicalParams,
    opts: StepOptions = StepOptions(),
    callback=None,
) -> Trajectory:
    """ceil(k T) steps with tau = 1/k from ``init``; aborts with the partial trajectory on failure."""
    if k < 1:
        raise ValueError("k must be >= 1")
    check_initial(init, params)
    s0 = initial_state(init, params, opts.ny)
    traj = Trajectory(k, float(T), params, opts, [s0], s0.free_energy, [])
    nsteps = int(math.ceil(k * T - 1e-9)) if T > 0 else 0
    tau = 1.0 / k
    for i in range(1, nsteps + 1):
        prev = traj.steps[-1]
        try:
            res = minimize_increment(prev, tau, params, opts)
        except DescentFailure as exc:
            raise SchemeAborted(f"step {i}: {exc}", partial=traj, snapshot=prev) from exc
        rep = validate_admissible(res.state.profile, params)
        if not rep.passed:
            raise SchemeAborted(f"step {i}: admissibility lost ({rep.summary()})", partial=traj, snapshot=res.state)
        traj.steps.append(res.state)
        traj.stats.append(res.stats)
        log.info(
            "step %d t=%.4f total=%.12g S+E=%.12g iters=%d pg=%.2e/%.2e",
            i, i * tau, res.state.energies["total"], res.state.free_energy,
            res.stats["iterations"], res.stats["pg"], res.stats["target"],
        )
        if callback is not None:
            callback(i, res)
    return traj


@dataclass(frozen=True)
class Interpolants:
    traj: Trajectory

    def _pos(self, t):
        n = len(self.traj.steps) - 1
        s = min(max(float(t), 0.0), n * self.traj.tau) * self.traj.k
        i = min(int(math.floor(s)), max(n - 1, 0))
        return i, s - i

    def _index_hat(self, t):
        # piecewise constant: value of step i on ((i-1) tau, i tau]
        n = len(self.traj.steps) - 1
        s = min(max(float(t), 0.0), n * self.traj.tau) * self.traj.k
        return min(int(math.ceil(s - 1e-12)), n)

    def alpha(self, t):
        i, w = self._pos(t)
        st = self.traj.steps
        return st[i].profile.alpha if w == 0 else (1 - w) * st[i].profile.alpha + w * st[i + 1].profile.alpha

    def beta(self, t):
        i, w = self._pos(t)
        st = self.traj.steps
        return st[i].profile.beta if w == 0 else (1 - w) * st[i].profile.beta + w * st[i + 1].profile.beta

    def h(self, t, x):
        i, w = self._pos(t)
        st = self.traj.steps
        a = st[i].profile.evaluate(x)
        return a if w == 0 else (1 - w) * a + w * st[i + 1].profile.evaluate(x)

    def alpha_hat(self, t):
        return self.traj.steps[self._index_hat(t)].profile.alpha

    def beta_hat(self, t):
        return self.traj.steps[self._index_hat(t)].profile.beta

    def h_hat(self, t, x):
        return self.traj.steps[self._index_hat(t)].profile.evaluate(x)

    def mass_rate_integral(self) -> float:
        """int_0^T ||dH/dt||_{L2}^2 dt of the linear interpolant = sum ||H_i - H_{i-1}||^2 / tau."""
        st = self.traj.steps
        return sum(mass_increment_norm2(st[i].profile, st[i - 1].profile) for i in range(1, len(st))) * self.traj.k


def interpolants(traj: Trajectory) -> Interpolants:
    if not traj.steps:
        raise ValueError("empty trajectory")
    return Interpolants(traj)


def with_options(opts: StepOptions, **changes) -> StepOptions:
    return replace(opts, **changes)
