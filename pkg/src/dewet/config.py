"""Run configuration: parsing, validation and serialization.

Schema (JSON object or TOML document)::

    k = 50                # time steps per unit time, tau = 1/k
    T = 0.2               # horizon
    n = 201               # profile nodes
    ny = 8                # mesh layers per node column
    out_dir = "runs/std"
    snapshots = [0.0, 0.1, 0.2]   # profile plot-data times (optional)

    [params]              # any subset; see PhysicalParams (``lambda`` for lam)
    e0 = 0.2

    [initial]
    shape = "cosine-bump" # or "triangle" (needs slope) or "file" (needs path)
    width = 2.0
    center = 0.0

    [opts]                # any subset of StepOptions except ny
    gtol = 1e-8

Every key except ``initial.shape`` has a default; the parsed config carries
all of them, so :func:`serialize` echoes the effective settings.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields

from .errors import AdmissibilityError, SchemaError
from .params import PhysicalParams
from .profile import Profile, cosine_bump, triangle
from .stepper import StepOptions, check_initial, with_options

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

SHAPES = ("cosine-bump", "triangle", "file")
_SHAPE_KEYS = {
    "cosine-bump": {"width": 2.0, "center": 0.0},
    "triangle": {"slope": 1.0, "center": 0.0},
    "file": {"path": None},
}
_TOP_KEYS = {"params", "initial", "k", "T", "n", "ny", "opts", "out_dir", "snapshots"}


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams = PhysicalParams()
    initial: dict = field(default_factory=lambda: {"shape": "cosine-bump", "width": 2.0, "center": 0.0})
    k: int = 50
    T: float = 0.2
    n: int = 201
    ny: int = 8
    opts: StepOptions = StepOptions()
    out_dir: str = "run"
    snapshots: tuple = ()

    @property
    def step_options(self) -> StepOptions:
        return with_options(self.opts, ny=self.ny)

    @property
    def steps(self) -> int:
        return int(math.ceil(self.k * self.T - 1e-9)) if self.T > 0 else 0

    def to_dict(self) -> dict:
        opts = self.opts.to_dict()
        opts.pop("ny")
        return {
            "params": self.params.to_dict(),
            "initial": dict(self.initial),
            "k": self.k,
            "T": self.T,
            "n": self.n,
            "ny": self.ny,
            "opts": opts,
            "out_dir": self.out_dir,
            "snapshots": list(self.snapshots),
        }

    def initial_profile(self) -> Profile:
        shape = self.initial["shape"]
        A0 = self.params.A0
        if shape == "cosine-bump":
            return cosine_bump(self.n, A0, self.initial["width"], self.initial["center"])
        if shape == "triangle":
            return triangle(self.n, A0, self.initial["slope"], self.initial["center"])
        with open(self.initial["path"]) as fh:
            return Profile.from_json(fh.read())

    def with_overrides(self, **kw) -> "RunConfig":
        """Return a validated copy with top-level fields replaced (None values are ignored)."""
        d = self.to_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        return from_dict(d)


def serialize(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


def _number(value, path, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise SchemaError(path, f"expected an integer, got {value!r}")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise SchemaError(path, f"expected a finite number, got {value!r}")
    return value


def _table(d, path) -> dict:
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise SchemaError(path, "expected a table")
    return d


def _unknown(d: dict, allowed, path: str):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise SchemaError(f"{path}.{extra[0]}" if path else extra[0], "unknown key")


def _params(d) -> PhysicalParams:
    d = _table(d, "params")
    names = [f.name for f in fields(PhysicalParams)]
    allowed = [("lambda" if nm == "lam" else nm) for nm in names]
    _unknown(d, allowed, "params")
    vals = {k: _number(v, f"params.{k}") for k, v in d.items()}
    return PhysicalParams.from_dict({**PhysicalParams().to_dict(), **vals})


def _initial(d, base_dir) -> dict:
    d = _table(d, "initial")
    shape = d.get("shape", "cosine-bump")
    if shape not in SHAPES:
        raise SchemaError("initial.shape", f"expected one of {', '.join(SHAPES)}, got {shape!r}")
    defaults = _SHAPE_KEYS[shape]
    _unknown(d, ["shape", *defaults], "initial")
    out = {"shape": shape}
    for key, default in defaults.items():
        if key == "path":
            path = d.get("path")
            if not isinstance(path, str):
                raise SchemaError("initial.path", "file shape needs a string path")
            if base_dir and not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            if not os.path.isfile(path):
                raise SchemaError("initial.path", f"no such file: {path}")
            out["path"] = path
        else:
            out[key] = _number(d.get(key, default), f"initial.{key}")
    return out


def _opts(d) -> StepOptions:
    d = _table(d, "opts")
    names = [f.name for f in fields(StepOptions) if f.name != "ny"]
    _unknown(d, names, "opts")
    base = asdict(StepOptions())
    for k, v in d.items():
        if k == "hessian":
            if v not in ("model", "identity"):
                raise SchemaError("opts.hessian", "expected 'model' or 'identity'")
            base[k] = v
        elif k in ("max_iter", "max_backtracks"):
            base[k] = _number(v, f"opts.{k}", int)
        else:
            base[k] = _number(v, f"opts.{k}")
    if not base["gtol"] > 0 and not base["gtol_abs"] > 0:
        raise SchemaError("opts.gtol", "gtol or gtol_abs must be positive")
    if base["max_iter"] < 1:
        raise SchemaError("opts.max_iter", "must be >= 1")
    return StepOptions(**base)


def from_dict(d: dict, base_dir: str | None = None, validate: bool = True) -> RunConfig:
    if not isinstance(d, dict):
        raise SchemaError("<root>", "expected a table at top level")
    _unknown(d, _TOP_KEYS, "")
    k = _number(d.get("k", 50), "k", int)
    if k < 1:
        raise SchemaError("k", "must be >= 1")
    T = _number(d.get("T", 0.2), "T")
    if T < 0:
        raise SchemaError("T", "must be >= 0")
    n = _number(d.get("n", 201), "n", int)
    if n < 5:
        raise SchemaError("n", "must be >= 5")
    ny = _number(d.get("ny", 8), "ny", int)
    if ny < 1:
        raise SchemaError("ny", "must be >= 1")
    out_dir = d.get("out_dir", "run")
    if not isinstance(out_dir, str):
        raise SchemaError("out_dir", "expected a string")
    snaps = d.get("snapshots", [])
    if not isinstance(snaps, (list, tuple)):
        raise SchemaError("snapshots", "expected a list of times")
    snaps = tuple(_number(s, f"snapshots[{i}]") for i, s in enumerate(snaps))
    cfg = RunConfig(
        params=_params(d.get("params")),
        initial=_initial(d.get("initial"), base_dir),
        k=k,
        T=T,
        n=n,
        ny=ny,
        opts=_opts(d.get("opts")),
        out_dir=out_dir,
        snapshots=snaps,
    )
    if validate:
        validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> RunConfig:
    """Model constants and the initial profile must be admissible."""
    cfg.params.validate()
    p = cfg.initial_profile()
    if cfg.initial["shape"] == "file" and p.n != cfg.n:
        raise AdmissibilityError(f"profile file has {p.n} nodes but n = {cfg.n}")
    check_initial(p, cfg.params)
    return cfg


def parse_config(text: str, base_dir: str | None = None) -> RunConfig:
    """Parse a JSON or TOML document (JSON if the first non-blank character is '{')."""
    if text.lstrip().startswith("{"):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"<json line {exc.lineno}>", exc.msg) from None
    else:
        try:
            d = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise SchemaError("<toml>", str(exc)) from None
    return from_dict(d, base_dir)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), os.path.dirname(os.path.abspath(path)))
