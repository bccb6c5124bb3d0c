"""Command line front end.

Subcommands:
  run       solve one benchmark scenario with adaptive or uniform refinement
  validate  quick self-check: build each scenario mesh and audit it

Options can also be collected in a config file of ``key = value`` lines
passed with --config; command line flags win over file entries. Output CSV
files are written with repr-exact floats, so identical runs produce byte
identical files.
"""
from __future__ import annotations

import argparse
import sys

from . import bench
from .materials import METALS
from .mesh import audit, build_domain_mesh


def _read_config(path):
    out = {}
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SystemExit(f"bad config line: {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _build_parser():
    p = argparse.ArgumentParser(
        prog="plasmafem",
        description="Adaptive FEM for plasmonic scattering with the "
                    "nonlocal hydrodynamic Drude model")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a benchmark scenario")
    r.add_argument("--scenario", default="bowtie",
                   choices=sorted(bench.SCENARIOS))
    r.add_argument("--metal", default="gold", choices=sorted(METALS))
    r.add_argument("--omega", type=float, default=None,
                   help="angular frequency relative to the plasma frequency")
    r.add_argument("--degree", type=int, default=None,
                   help="polynomial degree (0..3)")
    r.add_argument("--theta", type=float, default=0.05)
    r.add_argument("--rho", type=float, default=0.5)
    r.add_argument("--iters", type=int, default=None)
    r.add_argument("--h0", type=float, default=None,
                   help="initial mesh size in nm")
    r.add_argument("--mode", default="adaptive",
                   choices=["adaptive", "uniform"])
    r.add_argument("--no-reference", action="store_true",
                   help="skip the degree p+2 reference solves")
    r.add_argument("--out", default=None, help="output directory")
    r.add_argument("--config", default=None,
                   help="key = value file providing defaults for the flags")
    r.add_argument("--quiet", action="store_true")

    v = sub.add_parser("validate", help="build and audit all scenario meshes")
    v.add_argument("--h0", type=float, default=1.0)
    return p


_CASTS = {"omega": float, "theta": float, "rho": float, "h0": float,
          "degree": int, "iters": int}


def _apply_config(args, parser):
    if not getattr(args, "config", None):
        return args
    file_opts = _read_config(args.config)
    defaults = parser.parse_args(["run"])
    for key, value in file_opts.items():
        if not hasattr(args, key):
            raise SystemExit(f"unknown config key: {key}")
        # a flag given on the command line wins over the file
        if getattr(args, key) == getattr(defaults, key):
            cast = _CASTS.get(key, str)
            if isinstance(getattr(defaults, key), bool):
                value = value.lower() in ("1", "true", "yes")
                setattr(args, key, value)
            else:
                setattr(args, key, cast(value))
    return args


def _cmd_run(args):
    printer = None
    if not args.quiet:
        def printer(it, mesh, ind, extra):
            xi = extra.get("xi")
            tail = f" xi={xi:.6e} eff={ind.total / xi:.3f}" if xi else ""
            print(f"iter {it:3d}  elements {mesh.n_triangles:7d}  "
                  f"eta {ind.total:.6e}{tail}", flush=True)
    result = bench.run_experiment(
        args.scenario, material=args.metal, omega=args.omega,
        degree=args.degree, h0=args.h0, iterations=args.iters,
        mode=args.mode, theta=args.theta, rho=args.rho,
        reference=not args.no_reference, out_dir=args.out,
        progress=printer)
    if not args.quiet:
        if len(result.records) > 1:
            skip = max(len(result.records) // 2, 1)
            print(f"estimator rate vs dofs: "
                  f"{bench.fit_rate(result.dofs, result.eta, skip=skip):.3f}")
        if args.out:
            print(f"histories written to {args.out}")
    return 0


def _cmd_validate(args):
    for name in sorted(bench.SCENARIOS):
        spec = bench.SCENARIOS[name]
        mesh = build_domain_mesh(spec.polygon, spec.L, spec.ell, args.h0)
        audit(mesh, expect_area=(2 * (spec.L + spec.ell)) ** 2)
        print(f"{name:8s} ok: {mesh.n_triangles} elements, "
              f"{mesh.n_vertices} vertices")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        args = _apply_config(args, parser)
        return _cmd_run(args)
    if args.command == "validate":
        return _cmd_validate(args)
    return 1


if __name__ == "__main__":
    sys.exit(main())
