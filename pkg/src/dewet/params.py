"""Physical constants of the dewetting model."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import AdmissibilityError


@dataclass(frozen=True)
class PhysicalParams:
    """Model constants.

    ``lam`` is the first Lamé modulus (``lambda`` in config files).
    ``rho0`` is the surface mobility and is fixed to one.
    """

    gamma: float = 1.0
    gamma0: float = 0.5
    sigma0: float = 1.0
    nu0: float = 0.05
    A0: float = 1.0
    e0: float = 0.2
    lam: float = 1.0
    mu: float = 1.0
    L0: float = 2.0
    rho0: float = 1.0

    def violations(self) -> list[str]:
        out = []
        if not self.gamma > 0:
            out.append("gamma must be positive")
        if not self.gamma > self.gamma0:
            out.append("dewetting regime requires γ>γ₀ (gamma > gamma0)")
        if not self.sigma0 > 0:
            out.append("sigma0 must be positive")
        if not self.nu0 > 0:
            out.append("nu0 must be positive")
        if not self.A0 > 0:
            out.append("A0 must be positive")
        if not self.mu > 0:
            out.append("mu must be positive")
        if not self.lam + self.mu > 0:
            out.append("lambda + mu must be positive")
        if not self.L0 >= 1:
            out.append("L0 must be at least 1")
        if self.rho0 != 1.0:
            out.append("rho0 is normalized to 1")
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                out.append(f"{name} must be finite")
        return out

    def validate(self) -> "PhysicalParams":
        problems = self.violations()
        if problems:
            raise AdmissibilityError("; ".join(problems))
        return self

    @property
    def min_width(self) -> float:
        """Lower bound on beta - alpha for any admissible profile."""
        return math.sqrt(2.0 * self.A0 / self.L0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PhysicalParams":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**{k: float(v) for k, v in d.items()})

    def replace(self, **changes) -> "PhysicalParams":
        d = asdict(self)
        d.update(changes)
        return PhysicalParams(**d)
