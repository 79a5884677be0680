"""Regularity exponent of the Lamé solution at a contact-point corner."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

from ..errors import InvalidModuli

XI_CAP = 1.0 - 1e-9


@dataclass(frozen=True)
class CornerExponent:
    omega: float
    K: float
    K1: float
    xi0: float
    p0: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def lame_constants(lam: float, mu: float) -> tuple[float, float]:
    """K = (lam+mu)/(lam+3mu) and K1 = (lam+2mu)^2/((lam+mu)(lam+3mu))."""
    if not (mu > 0 and lam + mu > 0):
        raise InvalidModuli(f"need mu > 0 and lambda + mu > 0 (got lambda={lam}, mu={mu})")
    K = (lam + mu) / (lam + 3 * mu)
    K1 = (lam + 2 * mu) ** 2 / ((lam + mu) * (lam + 3 * mu))
    return K, K1


def root_function(xi, omega: float, K: float, K1: float):
    """g(xi) = sin^2(omega xi) - K1 + K xi^2 sin^2(omega); negative exactly where no real root lies below."""
    return math.sin(omega * xi) ** 2 - K1 + K * xi * xi * math.sin(omega) ** 2


def corner_exponent(lam: float, mu: float, slope: float, L0: float | None = None) -> CornerExponent:
    """xi0 = sup{xi in (1/2, 1): g < 0 on [0, xi]}, capped at 1 - 1e-9; p0 = 2 / (2 - xi0).

    g is increasing on [0, 1] for omega < pi/2 and g(1/2) < 0, so the first
    sign change (if any) is found by bisection; the lower bracket is returned.
    """
    K, K1 = lame_constants(lam, mu)
    if not slope > 0 or (L0 is not None and slope > L0):
        raise InvalidModuli(f"contact slope must lie in (0, L0], got {slope}")
    omega = math.atan(slope)
    g = lambda xi: root_function(xi, omega, K, K1)  # noqa: E731
    if g(XI_CAP) < 0:
        xi0 = XI_CAP
    else:
        lo, hi = 0.5, XI_CAP
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) < 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15:
                break
        xi0 = lo
    return CornerExponent(omega, K, K1, xi0, 2.0 / (2.0 - xi0))
