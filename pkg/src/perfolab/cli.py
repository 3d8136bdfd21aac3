"""Command-line interface.

Subcommands: capacity, holes, solve, sweep, selftest.  Exit codes:
0 success, 1 validation error, 2 numerical failure, 3 I/O error.
The PERFOLAB_THREADS environment variable sets how many sweep levels may
run concurrently (default 1; results are independent of the setting).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .capacity import Disk, cap_concentric_closed_form, cap_variational
from .config import load_config
from .errors import ConfigError, ConvergenceFailure, GeometryError, ResolutionError
from .measures import Checkerboard, Constant, Radial
from .mesh import Mesh
from .operators import EllipticOperator
from .pde import solve_dirichlet_perforated
from .perforation import build_holes, holes_report
from .selftest import run_selftest
from .sweep import emit_report, run_sweep

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def _parse_operator_spec(spec: str) -> EllipticOperator:
    spec = spec.strip()
    if spec == "laplace":
        return EllipticOperator.laplace()
    if spec.startswith("matrix:"):
        a11, a12, a22 = (float(v) for v in spec[len("matrix:") :].split(","))
        return EllipticOperator.constant_matrix(a11, a12, a22)
    if spec.startswith("scalar:"):
        parts = spec[len("scalar:") :].split(",")
        kind = parts[0]
        args = parts[1:]
        if kind == "constant":
            return EllipticOperator.scalar_field(Constant(float(args[0])))
        if kind == "checkerboard":
            return EllipticOperator.scalar_field(
                Checkerboard(float(args[0]), float(args[1]), int(args[2]))
            )
        if kind == "radial":
            return EllipticOperator.scalar_field(
                Radial(float(args[0]), (float(args[1]), float(args[2])), float(args[3]))
            )
    raise ValueError(
        f"cannot parse operator {spec!r}; use laplace, matrix:a11,a12,a22, or "
        "scalar:constant,c | scalar:checkerboard,a,b,k | scalar:radial,c,cx,cy,p"
    )


def _cmd_capacity(args) -> int:
    op = _parse_operator_spec(args.op)
    if args.closed_form:
        scale = op.constant_scale_or_none()
        if scale is None:
            print("closed form needs a coefficient proportional to the identity", file=sys.stderr)
            return EXIT_VALIDATION
        value = scale * cap_concentric_closed_form(args.inner, args.outer, args.n)
    else:
        if args.n != 2:
            print("the variational solver is 2-D; use --closed-form for n=3", file=sys.stderr)
            return EXIT_VALIDATION
        resolution = args.spacing if args.spacing else args.outer / 128.0
        value = cap_variational(
            Disk((0.0, 0.0), args.inner), Disk((0.0, 0.0), args.outer), op, resolution
        )
    print(f"{value:.12g}")
    return EXIT_OK


def _cmd_holes(args) -> int:
    cfg = load_config(args.config)
    family = build_holes(cfg.domain, cfg.measure, cfg.operator, args.h, cfg.inversion_tol)
    rep = holes_report(family, cfg.spacing_for(args.h) if args.h in cfg.h_list else cfg.spacing[0])
    if args.out:
        Path(args.out).write_text(family.to_json())
        print(f"wrote {args.out}")
    print(
        f"h={family.h}: {rep.positive_count}/{rep.count} holes, radius "
        f"[{rep.min_radius:.6g}, {rep.max_radius:.6g}], matched capacity {rep.total_capacity:.6g}, "
        f"{'resolvable' if rep.resolvable else 'UNRESOLVABLE'} at spacing {rep.mesh_spacing:.6g}"
    )
    return EXIT_OK


def _cmd_solve(args) -> int:
    cfg = load_config(args.config)
    family = build_holes(cfg.domain, cfg.measure, cfg.operator, args.h, cfg.inversion_tol)
    spacing = cfg.spacing_for(args.h) if args.h in cfg.h_list else cfg.spacing[0]
    mesh = Mesh.from_spacing(cfg.domain, spacing)
    f = cfg.load.make(cfg.domain)
    field, stats = solve_dirichlet_perforated(
        mesh, family, cfg.operator, f, pin_nearest=cfg.pin_nearest, rtol=cfg.solver_rtol
    )
    print(
        f"solved h={args.h} at spacing {spacing:g}: {stats.iterations} iterations, "
        f"residual {stats.relative_residual:.2e}, {stats.wall_time:.2f}s"
    )
    if args.out:
        if args.binary:
            field.save_binary(args.out)
        else:
            field.save_csv(args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    log = (lambda msg: print(f"  {msg}", file=sys.stderr)) if args.verbose else None
    report = run_sweep(cfg, log=log)
    emit_report(report, args.format, args.out)
    print(f"wrote {args.out}")
    if not args.no_figures:
        from .plots import save_report_figures

        for path in save_report_figures(report, args.out):
            print(f"wrote {path}")
    failed = [row.h for row in report.rows if row.status != "ok"]
    if failed:
        print(f"levels failed: {failed}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_selftest(args) -> int:
    return EXIT_OK if run_selftest() else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perfolab",
        description="capacity-matched perforation lab (see README for the config grammar)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="condenser capacity of concentric disks")
    p.add_argument("--inner", type=float, required=True, help="inner radius")
    p.add_argument("--outer", type=float, required=True, help="outer radius")
    p.add_argument("--op", default="laplace", help="operator spec (default laplace)")
    p.add_argument("--spacing", type=float, default=None, help="mesh spacing (default outer/128)")
    p.add_argument("--n", type=int, default=2, choices=(2, 3), help="dimension")
    p.add_argument("--closed-form", action="store_true", help="use the analytic formula")
    p.set_defaults(func=_cmd_capacity)

    p = sub.add_parser("holes", help="build the hole family for one level")
    p.add_argument("--config", required=True)
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--out", default=None, help="write the family as JSON")
    p.set_defaults(func=_cmd_holes)

    p = sub.add_parser("solve", help="perforated solve at one level")
    p.add_argument("--config", required=True)
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--out", default=None, help="write the field (CSV grid)")
    p.add_argument("--binary", action="store_true", help="write the binary grid format")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sweep", help="run the scenario sweep and write the report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-figures", action="store_true", help="skip the matplotlib figures")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("selftest", help="run the built-in verification battery")
    p.set_defaults(func=_cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GeometryError, ResolutionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
