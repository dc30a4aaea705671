"""Command line entry point: ``macrospline <command> [options]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="macrospline",
                                description="Cubic macro-element spline experiments (CSV output).")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in harness.COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0])
        sp.add_argument("--mesh", default="unit_square_16",
                        help="builtin name (unit_square_16, unit_square_grid_K) or mesh .json")
        sp.add_argument("--space", default="all", help="s1, s2, s3, comma list or all")
        sp.add_argument("--levels", type=int, default=4, help="number of meshes in the refinement sequence")
        sp.add_argument("--omega", type=float, default=1.0, help="vertex triangle scale factor")
        sp.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="boundary (ipbm, default 1) or smoothing (pfit, default sweep) penalty")
        sp.add_argument("--mu", type=float, default=1.0, help="C1 penalty for ipbm")
        sp.add_argument("--nu", type=float, default=0.25, help="noise amplitude for pfit")
        sp.add_argument("--boundary-points", type=int, default=800)
        sp.add_argument("--grid", type=int, default=401, help="error grid side")
        sp.add_argument("--samples", type=int, default=201, help="sample grid side for lsq/pfit")
        sp.add_argument("--level", type=int, default=1, help="mesh level for pfit")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--no-cond", action="store_true", help="skip condition numbers")
        sp.add_argument("--out", default="-", help="CSV path, - for stdout")
        if name in ("fem", "isofem", "ipbm"):
            sp.add_argument("--problem", choices=sorted(harness.PROBLEMS), default="sin",
                            help="manufactured solution (constant: F = 0, G = 1)")
        if name == "ipbm":
            sp.add_argument("--curved", action="store_true", help="use the mapped curved domain")
        if name == "omega-scan":
            sp.add_argument("--method", choices=("l2", "fem", "ipbm"), default="l2")
            sp.add_argument("--omegas", type=float, nargs="+", default=None)
        if name == "mesh-info":
            sp.add_argument("--frames", default=None, help="write base-mesh vertex triangles CSV here")
    return p


def config_from_args(args) -> harness.ExperimentConfig:
    kw = dict(mesh=args.mesh, spaces=args.space, levels=args.levels, omega=args.omega,
              lam=args.lam, mu=args.mu, nu=args.nu, boundary_points=args.boundary_points,
              grid=args.grid, samples=args.samples, level=args.level, seed=args.seed,
              cond=not args.no_cond, curved=getattr(args, "curved", False),
              method=getattr(args, "method", "l2"), problem=getattr(args, "problem", "sin"))
    if getattr(args, "omegas", None):
        kw["omegas"] = tuple(args.omegas)
    return harness.ExperimentConfig(**kw)


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        rows = harness.COMMANDS[args.command](cfg)
    except harness.ConfigError as exc:
        parser.error(str(exc))
    meta = {"command": args.command, "mesh": cfg.mesh, "seed": cfg.seed, "omega": cfg.omega}
    if args.command in ("fem", "isofem", "ipbm"):
        meta["problem"] = cfg.problem
    if args.command in ("pfit", "ipbm"):
        meta.update({"lambda": cfg.lam, "mu": cfg.mu, "nu": cfg.nu})
    text = harness.to_csv(rows, meta)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    frames = getattr(args, "frames", None)
    if frames:
        from .basis import build_basis
        Path(frames).write_text(build_basis(harness.get_mesh(cfg.mesh), "s1", cfg.omega).frames_csv())
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
