"""Command-line entry point: ``dewet {validate,run,diagnose,compare,corner-exponent}``.

Failures print a JSON object ``{"error": ..., "message": ..., ...}`` on
stderr and exit with a nonzero status. ``DEWET_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import load_config, serialize
from .errors import DewetError, SchemaError, SchemeAborted

log = logging.getLogger("dewet")

EXIT_USAGE = 2
EXIT_FAILURE = 1


def _setup_logging(quiet: bool):
    level = os.environ.get("DEWET_LOG", "WARNING" if quiet else "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(name)s: %(message)s")


def _emit(obj, quiet=False):
    if not quiet:
        print(json.dumps(obj, indent=2, sort_keys=True))


def _config(args):
    if not args.config:
        raise SchemaError("--config", "a config file is required")
    cfg = load_config(args.config)
    return cfg.with_overrides(k=args.k, T=args.horizon, n=args.nodes, ny=args.layers, out_dir=args.out)


def cmd_validate(args):
    cfg = _config(args)
    _emit({"valid": True, "steps": cfg.steps, "config": json.loads(serialize(cfg))}, args.quiet)
    return 0


def cmd_run(args):
    from .io import run_experiment

    cfg = _config(args)
    traj = run_experiment(cfg)
    _emit({"out_dir": cfg.out_dir, "steps": len(traj.steps) - 1, "final_free_energy": traj.steps[-1].free_energy}, args.quiet)
    return 0


def cmd_diagnose(args):
    from .diagnostics import diagnose
    from .io import load_trajectory, write_atomic

    run_dir = args.dir or args.out
    if not run_dir:
        raise SchemaError("dir", "a run directory is required")
    rep = diagnose(load_trajectory(run_dir))
    write_atomic(os.path.join(run_dir, "diagnostics.json"), rep.to_json())
    write_atomic(os.path.join(run_dir, "diagnostics.csv"), rep.summary_csv())
    bounds = {k: v.passed for k, v in rep.bounds.items()}
    _emit({"dir": run_dir, "bounds": bounds}, args.quiet)
    return 0 if all(bounds.values()) else EXIT_FAILURE


def cmd_compare(args):
    from .io import compare_trajectories

    report = compare_trajectories(*args.dirs)
    if args.out:
        from .io import write_atomic

        write_atomic(args.out, json.dumps(report, indent=2))
    _emit({"max": [p["max"] for p in report["pairs"]], "slopes": report["slopes"]}, args.quiet)
    return 0


def cmd_corner(args):
    from .elasticity.corner import corner_exponent

    c = corner_exponent(args.lam, args.mu, args.slope)
    _emit(json.loads(c.to_json()), args.quiet)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dewet", description="Minimizing-movement simulation of dewetting thin-film islands.")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, run_flags=True):
        p.add_argument("--quiet", action="store_true", help="suppress stdout and info logging")
        if run_flags:
            p.add_argument("--config", help="JSON or TOML run configuration")
            p.add_argument("--out", help="output directory (overrides out_dir)")
            p.add_argument("--k", type=int, help="steps per unit time")
            p.add_argument("--horizon", type=float, help="final time T")
            p.add_argument("--nodes", type=int, help="profile grid nodes n")
            p.add_argument("--layers", type=int, help="mesh layers ny")

    p = sub.add_parser("validate", help="parse and validate a config, echoing defaults")
    common(p)
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("run", help="run the scheme and write a trajectory directory")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("diagnose", help="recompute diagnostics for a run directory")
    p.add_argument("dir", nargs="?")
    p.add_argument("--out", help="run directory (alternative to the positional argument)")
    common(p, run_flags=False)
    p.set_defaults(func=cmd_diagnose)
    p = sub.add_parser("compare", help="aligned-time differences between run directories")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--out", help="write the full report as JSON")
    common(p, run_flags=False)
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("corner-exponent", help="corner regularity exponent for given moduli and contact slope")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--slope", type=float, required=True, help="contact slope h'(alpha) > 0")
    common(p, run_flags=False)
    p.set_defaults(func=cmd_corner)
    return ap


def _error(exc, status):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, SchemaError):
        payload["path"] = exc.path
    if isinstance(exc, SchemeAborted) and exc.partial is not None:
        payload["completed_steps"] = len(exc.partial.steps) - 1
    print(json.dumps(payload), file=sys.stderr)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.quiet)
    try:
        return args.func(args)
    except SchemaError as exc:
        return _error(exc, EXIT_USAGE)
    except (DewetError, OSError, ValueError) as exc:
        return _error(exc, EXIT_FAILURE)


if __name__ == "__main__":
    sys.exit(main())
