"""Trajectory directories: writing runs to disk, reading them back, and comparing runs.

Layout of a run directory::

    manifest.json            config echo, schedule, optimizer stats (written last)
    energies.csv             one row per step, 17 significant digits
    diagnostics.json
    profiles/step_0000.json  one Profile per step
    plot/contacts.csv        t, alpha, beta
    plot/energy.csv          t, surface, elastic, transport, S+E
    plot/profile_t<t>.csv    x, h snapshots at the requested times
"""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile

import numpy as np

from .config import RunConfig, from_dict
from .diagnostics import diagnose, l2_distance
from .elasticity.lame import solve_profile
from .errors import IncompatibleHorizons
from .kernels import BACKEND_NAME
from .profile import GAUSS_W, GAUSS_X, Profile, union_grid
from .stepper import StepState, Trajectory, interpolants, run_minimizing_movements

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
ENERGY_COLUMNS = ("i", "t", "surface", "elastic", "transport", "total", "free_energy", "multiplier_m", "alpha", "beta")
FORMAT_VERSION = 1


def _fmt(v) -> str:
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def write_atomic(path: str, text: str):
    """Write to a temporary file in the same directory, then rename over ``path``."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def energies_csv(traj: Trajectory) -> str:
    lines = [",".join(ENERGY_COLUMNS)]
    for i, s in enumerate(traj.steps):
        e = s.energies
        row = [i, i * traj.tau, e["surface"], e["elastic"], e["transport"], e["total"], s.free_energy,
               float(s.multiplier_m), s.profile.alpha, s.profile.beta]
        lines.append(",".join(_fmt(float(v)) if k else str(v) for k, v in enumerate(row)))
    return "\n".join(lines) + "\n"


def _series_csv(header, rows) -> str:
    return header + "\n" + "".join(",".join(f"{v:.17g}" for v in r) + "\n" for r in rows)


def plot_data(traj: Trajectory, snapshots=()) -> dict:
    """Plot-ready CSV texts keyed by relative path."""
    t = traj.times
    out = {
        "plot/contacts.csv": _series_csv("t,alpha,beta", [(ti, s.profile.alpha, s.profile.beta) for ti, s in zip(t, traj.steps)]),
        "plot/energy.csv": _series_csv(
            "t,surface,elastic,transport,free_energy",
            [(ti, s.energies["surface"], s.energies["elastic"], s.energies["transport"], s.free_energy)
             for ti, s in zip(t, traj.steps)],
        ),
    }
    ip = interpolants(traj)
    for ts in snapshots:
        k = ip._index_hat(ts)
        out[f"plot/profile_t{ts:g}.csv"] = traj.steps[k].profile.to_csv()
    return out


def write_trajectory(traj: Trajectory, cfg: RunConfig, out_dir: str, diagnostics=True) -> str:
    os.makedirs(os.path.join(out_dir, "profiles"), exist_ok=True)
    # an older manifest would describe stale data while the files below are rewritten
    if os.path.exists(os.path.join(out_dir, MANIFEST)):
        os.unlink(os.path.join(out_dir, MANIFEST))
    for i, s in enumerate(traj.steps):
        write_atomic(os.path.join(out_dir, "profiles", f"step_{i:04d}.json"), s.profile.to_json())
    write_atomic(os.path.join(out_dir, "energies.csv"), energies_csv(traj))
    for rel, text in plot_data(traj, cfg.snapshots).items():
        write_atomic(os.path.join(out_dir, rel), text)
    if diagnostics:
        write_atomic(os.path.join(out_dir, "diagnostics.json"), diagnose(traj).to_json())
    manifest = {
        "format": FORMAT_VERSION,
        "config": cfg.to_dict(),
        "k": traj.k,
        "T": traj.T,
        "tau": traj.tau,
        "steps": len(traj.steps) - 1,
        "M0": traj.M0,
        "backend": BACKEND_NAME,
        "stats": traj.stats,
    }
    write_atomic(os.path.join(out_dir, MANIFEST), json.dumps(manifest, indent=2, sort_keys=True))
    return out_dir


def run_experiment(cfg: RunConfig, out_dir: str | None = None, callback=None) -> Trajectory:
    """Run the scheme for ``cfg`` and write the trajectory directory."""
    out_dir = out_dir or cfg.out_dir
    init = cfg.initial_profile()
    traj = run_minimizing_movements(init, cfg.k, cfg.T, cfg.params, cfg.step_options, callback=callback)
    write_trajectory(traj, cfg, out_dir)
    log.info("wrote %d steps to %s", len(traj.steps) - 1, out_dir)
    return traj


def read_manifest(run_dir: str) -> dict:
    path = os.path.join(run_dir, MANIFEST)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{run_dir} has no {MANIFEST} (incomplete or not a run directory)")
    with open(path) as fh:
        return json.load(fh)


def read_profiles(run_dir: str, manifest: dict | None = None) -> list:
    manifest = manifest or read_manifest(run_dir)
    out = []
    for i in range(manifest["steps"] + 1):
        with open(os.path.join(run_dir, "profiles", f"step_{i:04d}.json")) as fh:
            out.append(Profile.from_json(fh.read()))
    return out


def read_energies(run_dir: str) -> np.ndarray:
    return np.loadtxt(os.path.join(run_dir, "energies.csv"), delimiter=",", skiprows=1, ndmin=2)


def load_trajectory(run_dir: str) -> Trajectory:
    """Rebuild a Trajectory (elastic fields are re-solved from the stored profiles)."""
    man = read_manifest(run_dir)
    cfg = from_dict(man["config"], validate=False)
    E = read_energies(run_dir)
    col = {c: j for j, c in enumerate(ENERGY_COLUMNS)}
    steps = []
    for i, p in enumerate(read_profiles(run_dir, man)):
        row = E[i]
        energies = {k: float(row[col[k]]) for k in ("surface", "elastic", "transport", "total")}
        f = solve_profile(p, cfg.params, cfg.ny)
        steps.append(StepState(p, f, energies, float(row[col["multiplier_m"]])))
    return Trajectory(man["k"], man["T"], cfg.params, cfg.step_options, steps, man["M0"], man["stats"])


def _l2_to_mix(p: Profile, q0: Profile, q1: Profile, w: float) -> float:
    """Exact L2 distance from p to (1-w) q0 + w q1 (all piecewise linear)."""
    grid = union_grid(p.x, q0.x, q1.x)
    left, length = grid[:-1], np.diff(grid)
    xg = (left[:, None] + GAUSS_X[None, :] * length[:, None]).ravel()
    wg = (length[:, None] * GAUSS_W[None, :]).ravel()
    diff = p.evaluate(xg) - (1 - w) * q0.evaluate(xg) - w * q1.evaluate(xg)
    return float(math.sqrt(np.dot(wg, diff * diff)))


def _pair(run_a: str, run_b: str) -> dict:
    ma, mb = read_manifest(run_a), read_manifest(run_b)
    if not math.isclose(ma["T"], mb["T"], rel_tol=0, abs_tol=1e-12):
        raise IncompatibleHorizons(f"horizons differ: {ma['T']} vs {mb['T']}")
    pa, pb = read_profiles(run_a, ma), read_profiles(run_b, mb)
    Ea, Eb = read_energies(run_a), read_energies(run_b)
    ka, kb = ma["k"], mb["k"]
    # compare on the coarser schedule; the finer run is interpolated linearly in time
    coarse, fine = ((pa, Ea, ka), (pb, Eb, kb)) if ka <= kb else ((pb, Eb, kb), (pa, Ea, ka))
    pc, Ec, kc = coarse
    pf, Ef, kf = fine
    ncoarse = len(pc) - 1
    rows = []
    for i in range(ncoarse + 1):
        t = i / kc
        s = min(t * kf, len(pf) - 1)
        j = min(int(math.floor(s + 1e-9)), len(pf) - 1)
        w = s - j if j < len(pf) - 1 else 0.0
        if w < 1e-9:
            e = Ef[j]
            dist = l2_distance(pc[i], pf[j])
        else:
            e = (1 - w) * Ef[j] + w * Ef[j + 1]
            dist = _l2_to_mix(pc[i], pf[j], pf[j + 1], w)
        rows.append({
            "t": t,
            "alpha": abs(Ec[i, 8] - e[8]),
            "beta": abs(Ec[i, 9] - e[9]),
            "free_energy": abs(Ec[i, 6] - e[6]),
            "l2": dist,
        })
    keys = ("alpha", "beta", "free_energy", "l2")
    return {
        "a": run_a,
        "b": run_b,
        "k": [ka, kb],
        "n": [ma["config"]["n"], mb["config"]["n"]],
        "times": [r["t"] for r in rows],
        "series": {k: [r[k] for r in rows] for k in keys},
        "max": {k: max(r[k] for r in rows) for k in keys},
        "final": {k: rows[-1][k] for k in keys},
    }


def compare_trajectories(*run_dirs: str) -> dict:
    """Aligned-time differences between consecutive runs.

    With three or more runs ordered by refinement, ``slopes`` holds observed
    convergence orders log(e_i/e_{i+1}) / log(r_{i+1}/r_i) of the final-time
    differences, where r is the refined parameter (k if it changes, else n).
    """
    if len(run_dirs) < 2:
        raise ValueError("need at least two run directories")
    pairs = [_pair(a, b) for a, b in zip(run_dirs[:-1], run_dirs[1:])]
    slopes = {}
    if len(pairs) >= 2:
        for key in ("alpha", "beta", "free_energy", "l2"):
            vals = []
            for p0, p1 in zip(pairs[:-1], pairs[1:]):
                r0, r1 = (p0["k"][1], p1["k"][1]) if p0["k"][1] != p1["k"][1] else (p0["n"][1], p1["n"][1])
                e0, e1 = p0["final"][key], p1["final"][key]
                vals.append(math.log(e0 / e1) / math.log(r1 / r0) if e0 > 0 and e1 > 0 and r1 != r0 else float("nan"))
            slopes[key] = vals
    return {"pairs": pairs, "slopes": slopes}

