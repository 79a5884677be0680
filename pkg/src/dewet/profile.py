"""Island profiles: nodal heights on a uniform grid over [alpha, beta]."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import EmptyOverlap, GridTooCoarse
from .params import PhysicalParams

AREA_RTOL = 1e-10
LIP_SLACK = 1e-3  # required initial slack, as a fraction of L0

# 3-point Gauss-Legendre rule on [0, 1]
GAUSS_X = np.array([0.5 - 0.5 * math.sqrt(0.6), 0.5, 0.5 + 0.5 * math.sqrt(0.6)])
GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0


def fd_weights(offsets, order: int) -> np.ndarray:
    """Finite-difference weights on integer ``offsets`` for the ``order``-th derivative (unit spacing)."""
    offsets = np.asarray(offsets, dtype=float)
    m = len(offsets)
    V = np.vander(offsets, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


# (interior offsets, left-end stencils) per derivative order; right ends mirror the left ones
_STENCILS = {
    1: ((-1, 0, 1), [(0, 1, 2)]),
    2: ((-1, 0, 1), [(0, 1, 2, 3)]),
    3: ((-2, -1, 0, 1, 2), [(0, 1, 2, 3, 4), (-1, 0, 1, 2, 3)]),
}
_WEIGHTS = {
    order: (
        fd_weights(interior, order),
        [(np.array(off), fd_weights(off, order)) for off in ends],
    )
    for order, (interior, ends) in _STENCILS.items()
}


def diff_nodal(f: np.ndarray, dx: float, order: int) -> np.ndarray:
    """Nodal derivative of grid samples ``f``: central inside, second-order one-sided at the ends."""
    f = np.asarray(f, dtype=float)
    n = f.shape[-1]
    if order not in _WEIGHTS:
        raise ValueError(f"unsupported derivative order {order}")
    if n < 2 * order + 1:
        raise GridTooCoarse(f"need at least {2 * order + 1} nodes for order {order}, got {n}")
    interior, ends = _WEIGHTS[order]
    half = len(interior) // 2
    out = np.empty_like(f)
    acc = np.zeros(n - 2 * half)
    for w, k in zip(interior, range(-half, half + 1)):
        acc = acc + w * f[half + k : n - half + k]
    out[half : n - half] = acc
    for j, (off, w) in enumerate(ends):
        out[j] = np.dot(w, f[j + off])
        out[n - 1 - j] = (-1) ** order * np.dot(w, f[n - 1 - j - off])
    return out / dx**order


def trapezoid_weights(n: int) -> np.ndarray:
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


@dataclass(frozen=True)
class Profile:
    """Contact points plus nodal heights ``h[j]`` at ``alpha + j*(beta-alpha)/(n-1)``."""

    alpha: float
    beta: float
    h: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def n(self) -> int:
        return len(self.h)

    @property
    def dx(self) -> float:
        return (self.beta - self.alpha) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.alpha, self.beta, self.n)

    @property
    def width(self) -> float:
        return self.beta - self.alpha

    def slopes(self) -> np.ndarray:
        """Cell slopes of the piecewise-linear interpolant."""
        return np.diff(self.h) / self.dx

    def with_heights(self, h) -> "Profile":
        return Profile(self.alpha, self.beta, h)

    def shifted(self, c: float) -> "Profile":
        return Profile(self.alpha + c, self.beta + c, self.h)

    def mirrored(self) -> "Profile":
        return Profile(-self.beta, -self.alpha, self.h[::-1])

    def evaluate(self, x) -> np.ndarray:
        """Zero-extended piecewise-linear interpolant."""
        x = np.asarray(x, dtype=float)
        return np.interp(x, self.x, self.h, left=0.0, right=0.0)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "h": [float(v) for v in self.h]}

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        return cls(d["alpha"], d["beta"], np.asarray(d["h"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Profile":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,h\n")
        for xv, hv in zip(self.x, self.h):
            buf.write(f"{xv:.17g},{hv:.17g}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    slack: float
    message: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        return "\n".join(
            f"{'PASS' if c.passed else 'FAIL'} {c.name:<12} slack={c.slack:.3e} {c.message}"
            for c in self.checks
        )


def validate_admissible(p: Profile, params: PhysicalParams, lip_slack: float = 0.0) -> ValidationReport:
    """Check every admissibility condition and report slack; never raises.

    ``lip_slack`` is the fraction of L0 the discrete slopes must stay below.
    """
    checks = []
    checks.append(Check("order", p.beta > p.alpha, p.beta - p.alpha, "" if p.beta > p.alpha else "alpha >= beta"))
    checks.append(Check("nodes", p.n >= 5, p.n - 5.0, "" if p.n >= 5 else "fewer than 5 nodes"))
    if p.n < 2 or not p.beta > p.alpha:
        return ValidationReport(tuple(checks))
    end = max(abs(p.h[0]), abs(p.h[-1]))
    checks.append(Check("endpoints", end == 0.0, -end, "" if end == 0.0 else "endpoint not zero"))
    hmin = float(p.h.min())
    checks.append(Check("nonnegative", hmin >= 0.0, hmin, "" if hmin >= 0 else "negative height"))
    cap = params.L0 * (1.0 - lip_slack)
    lip = float(np.max(np.abs(p.slopes())))
    ok = lip <= cap * (1 + 1e-12)
    checks.append(Check("lipschitz", ok, cap - lip, "" if ok else f"slope {lip:.6g} exceeds {cap:.6g}"))
    a = area(p)
    rel = abs(a - params.A0) / params.A0
    ok = rel <= AREA_RTOL
    checks.append(Check("area", ok, AREA_RTOL - rel, "" if ok else f"area {a:.12g} != {params.A0:.12g}"))
    wmin = params.min_width
    ok = p.width >= wmin * (1 - 1e-12)
    checks.append(Check("width", ok, p.width - wmin, "" if ok else "support narrower than sqrt(2 A0/L0)"))
    return ValidationReport(tuple(checks))


def area(p: Profile) -> float:
    """Trapezoid integral of h over [alpha, beta]."""
    if p.n < 2:
        raise GridTooCoarse("area needs at least 2 nodes")
    return float(p.dx * np.dot(trapezoid_weights(p.n), p.h))


def mass_below(p: Profile, x) -> np.ndarray:
    """Exact ``H(x) = integral of the zero-extended linear interpolant up to x``."""
    x = np.asarray(x, dtype=float)
    d = p.dx
    h = p.h
    C = np.concatenate(([0.0], np.cumsum(0.5 * d * (h[:-1] + h[1:]))))
    s = (x - p.alpha) / d
    j = np.clip(np.floor(s).astype(int), 0, p.n - 2)
    t = np.clip(s - j, 0.0, 1.0) * d
    H = C[j] + h[j] * t + (h[j + 1] - h[j]) * t * t / (2 * d)
    H = np.where(s <= 0, 0.0, H)
    return np.where(s >= p.n - 1, C[-1], H)


@dataclass(frozen=True)
class CumulativeMass:
    grid: np.ndarray
    H: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.grid, self.H, left=0.0, right=self.H[-1])


def union_grid(*pieces) -> np.ndarray:
    g = np.unique(np.concatenate([np.asarray(p, dtype=float) for p in pieces]))
    keep = np.concatenate(([True], np.diff(g) > 1e-14 * max(1.0, np.abs(g).max())))
    return g[keep]


def cumulative_mass(p: Profile, other_support) -> CumulativeMass:
    """Cumulative mass of ``p`` on the union of its grid and ``other_support``.

    ``other_support`` is a Profile (its nodes are merged in) or an ``(a, b)``
    interval, which is covered with nodes at the spacing of ``p``.
    """
    if isinstance(other_support, Profile):
        extra = other_support.x
    else:
        a, b = map(float, other_support)
        m = max(2, int(math.ceil((b - a) / p.dx)) + 1)
        extra = np.linspace(a, b, m)
    grid = union_grid(p.x, extra)
    return CumulativeMass(grid, mass_below(p, grid))


def discrete_derivatives(p: Profile, order: int) -> np.ndarray:
    """Nodal h', h'' or h''' (see :func:`diff_nodal`)."""
    return diff_nodal(p.h, p.dx, order)


def metric_factor(p: Profile) -> np.ndarray:
    """Nodal J = sqrt(1 + h'^2)."""
    return np.sqrt(1.0 + discrete_derivatives(p, 1) ** 2)


def resample(p: Profile, new_alpha: float, new_beta: float, n: int, A0: float | None = None):
    """Monotone-cubic resampling of the zero-extension onto a new uniform grid.

    Returns ``(profile, factor)``; ``factor`` is the vertical rescaling that
    restores the area (``A0`` defaults to the area of ``p``).
    """
    if not new_alpha < new_beta:
        raise ValueError("new_alpha must be < new_beta")
    if new_beta <= p.alpha or new_alpha >= p.beta:
        raise EmptyOverlap(f"[{new_alpha}, {new_beta}] misses support [{p.alpha}, {p.beta}]")
    target = area(p) if A0 is None else A0
    x = np.linspace(new_alpha, new_beta, n)
    same = n == p.n and abs(new_alpha - p.alpha) <= 1e-15 * max(1, abs(p.alpha)) and abs(
        new_beta - p.beta
    ) <= 1e-15 * max(1, abs(p.beta))
    if same:
        h = p.h.copy()
    else:
        interp = PchipInterpolator(p.x, p.h, extrapolate=False)
        h = np.nan_to_num(interp(x), nan=0.0)
        h = np.maximum(h, 0.0)
    h[0] = h[-1] = 0.0
    q = Profile(new_alpha, new_beta, h)
    a = area(q)
    if a <= 0:
        raise EmptyOverlap("resampled profile has no mass")
    factor = target / a
    if factor != 1.0:
        q = q.with_heights(h * factor)
    return q, factor


# --- named initial shapes -------------------------------------------------


def normalize_area(p: Profile, A0: float) -> Profile:
    return p.with_heights(p.h * (A0 / area(p)))


def triangle(n: int, A0: float, slope: float, center: float = 0.0) -> Profile:
    """Symmetric triangle with the given flank slope and area; n odd puts a node at the apex."""
    half = math.sqrt(A0 / slope)
    x = np.linspace(center - half, center + half, n)
    h = slope * (half - np.abs(x - center))
    h[0] = h[-1] = 0.0
    return normalize_area(Profile(center - half, center + half, h), A0)


def cosine_bump(n: int, A0: float, width: float, center: float = 0.0) -> Profile:
    """Half-period cosine arch a*cos(pi (x-c)/w); contact slopes pi a / w, zero curvature at the ends."""
    alpha, beta = center - width / 2, center + width / 2
    x = np.linspace(alpha, beta, n)
    h = np.cos(np.pi * (x - center) / width)
    h[0] = h[-1] = 0.0
    h = np.maximum(h, 0.0)
    return normalize_area(Profile(alpha, beta, h), A0)


def cosine_bump_exact(A0: float, width: float, center: float = 0.0):
    """Analytic (amplitude, contact slope) of :func:`cosine_bump` in the continuum."""
    a = np.pi * A0 / (2 * width)
    return a, np.pi * a / width
