"""Command-line driver.

Precedence: command-line flags > OCTOMINI_* environment variables >
config file entries > defaults.  Exit codes: 0 success, 2 configuration
error, 3 numerical abort, 4 I/O error.
"""

import argparse
import sys

from .config import RunConfig, apply_env, read_config_file
from .errors import CheckpointError, ConfigError, NumericsError, OctominiError


def build_parser():
    p = argparse.ArgumentParser(
        prog="octomini",
        description="Octree-AMR hydrodynamics with FMM gravity on a task runtime",
    )
    p.add_argument("--config", metavar="FILE", help="key = value configuration file")
    p.add_argument("--problem", choices=["sedov", "star"])
    p.add_argument("--hydro", choices=["old", "new"])
    p.add_argument("--subgrid", type=int, help="cells per sub-grid side (8, 16, 32)")
    p.add_argument("--level", type=int, help="refinement depth")
    p.add_argument("--theta", type=float, help="gravity opening criterion")
    p.add_argument("--steps", type=int, help="number of timesteps")
    p.add_argument("--end-time", dest="end_time", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--lanes", type=int)
    p.add_argument("--cfl", type=float)
    p.add_argument("--boundary", choices=["periodic", "reflecting", "outflow"])
    p.add_argument(
        "--profile",
        help="comma list of artifacts to emit: tree,graph,trace,counters",
    )
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--checkpoint", metavar="PATH")
    p.add_argument("--resume", metavar="PATH")
    p.add_argument("--seed", type=int)
    p.add_argument("--latency-us", dest="latency_us", type=float)
    p.add_argument("--star-q", dest="star_q", type=float)
    p.add_argument("--contact", action="store_true", default=None)
    return p


def parse_config(argv, environ=None):
    """RunConfig from argv (+ env + optional file)."""
    args = build_parser().parse_args(argv)
    cfg = RunConfig()
    if args.config:
        read_config_file(args.config, cfg)
    apply_env(cfg, environ)
    for name in (
        "problem", "hydro", "subgrid", "level", "theta", "steps", "end_time",
        "workers", "lanes", "cfl", "boundary", "out", "checkpoint", "resume",
        "seed", "latency_us", "star_q", "contact",
    ):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    if args.profile is not None:
        cfg.profile = tuple(x for x in args.profile.split(",") if x)
    return cfg.validate()


def main(argv=None):
    try:
        cfg = parse_config(argv if argv is not None else sys.argv[1:])
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    from . import driver

    try:
        report = driver.run(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    except (CheckpointError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except OctominiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    s = report.summary
    print(
        f"steps={s.get('steps', 0)} time={s.get('time', 0.0):.6g} "
        f"cells/s={s.get('cells_per_second', 0.0):.4g} "
        f"mass_drift={s.get('mass_drift', 0.0):.3e} "
        f"etot_drift={s.get('etot_drift', 0.0):.3e}"
        + (f" rho_L1={s['rho_l1']:.4e}" if s.get("rho_l1") == s.get("rho_l1") else "")
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
