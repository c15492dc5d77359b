"""Command line front end: mesh generation, single solves, studies.

Exit codes: 0 success, 2 bad arguments or configuration, 3 I/O failure,
4 solver non-convergence (a partial study report is still written).
"""

import argparse
import os
import sys
from dataclasses import fields

from .analysis import (
    PartialReport,
    StudyConfig,
    eoc_csv,
    plot_data,
    report_csv,
    report_table,
    run_study,
)
from .assembly import assemble_a, assemble_m, build_fespace
from .eigsolve import solve_generalized
from .errors import (
    BadParameter,
    InnerSolveFailure,
    NotConverged,
    ParseError,
    UnsupportedFeature,
    VentcelError,
)
from .geometry import make_domain
from .meshing import curve_mesh, generate_star_mesh, read_msh, write_msh

_REQUIRED_STUDY_KEYS = ("domain", "order", "degree")


def _effective_threads(flag_value):
    env = os.environ.get("VENTCEL_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise BadParameter(f"VENTCEL_THREADS must be an integer, got '{env}'")
    if flag_value is not None:
        return max(1, flag_value)
    return os.cpu_count() or 1


def parse_config(path):
    """Parse a flat 'key = value' study configuration file."""
    defaults = StudyConfig()
    types = {f.name: f.type for f in fields(StudyConfig)}
    seen = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise BadParameter(f"{path}:{lineno}: expected 'key = value'")
                key, value = (part.strip() for part in line.split("=", 1))
                if not hasattr(defaults, key):
                    raise BadParameter(f"{path}:{lineno}: unknown key '{key}'")
                seen[key] = (value, lineno)
    except OSError as exc:
        raise FileNotFoundError(str(exc)) from exc

    missing = [k for k in _REQUIRED_STUDY_KEYS if k not in seen]
    if missing:
        raise BadParameter(
            f"{path}: missing required keys: {', '.join(missing)}"
        )

    kwargs = {}
    for key, (value, lineno) in seen.items():
        current = getattr(defaults, key)
        try:
            if key == "reference_lambda":
                kwargs[key] = None if value.lower() in ("none", "auto") else float(value)
            elif isinstance(current, bool):
                kwargs[key] = value.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                kwargs[key] = int(value)
            elif isinstance(current, float):
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        except ValueError:
            raise BadParameter(f"{path}:{lineno}: bad value for '{key}': '{value}'")
    del types
    return StudyConfig(**kwargs)


def config_text(cfg):
    """Serialize the effective configuration back to 'key = value' lines."""
    lines = []
    for f in fields(StudyConfig):
        value = getattr(cfg, f.name)
        lines.append(f"{f.name} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"


def _add_domain_args(parser):
    parser.add_argument("--domain", default="disk", choices=("disk", "flower"))
    parser.add_argument("--alpha", type=float, default=0.3)
    parser.add_argument("--beta", type=float, default=0.4)


def cmd_mesh(args):
    dom = make_domain(args.domain, args.alpha, args.beta)
    mesh = generate_star_mesh(dom, args.nb)
    curve_mesh(mesh, dom, args.order)
    out = args.out or f"{args.domain}{args.nb}.msh"
    try:
        write_msh(mesh, out)
    except OSError as exc:
        print(f"error: cannot write {out}: {exc}", file=sys.stderr)
        return 3
    print(
        f"wrote {out}: h={mesh.h:.6g}, {mesh.num_triangles} elements, "
        f"{len(mesh.boundary_edges)} boundary edges (order {args.order})"
    )
    return 0


def cmd_solve(args):
    dom = make_domain(args.domain, args.alpha, args.beta)
    if args.mesh:
        if not os.path.exists(args.mesh):
            print(f"error: mesh file not found: {args.mesh}", file=sys.stderr)
            return 3
        mesh = read_msh(args.mesh, dom)
    else:
        mesh = generate_star_mesh(dom, args.nb)
    cmesh = curve_mesh(mesh, dom, args.order)
    space = build_fespace(cmesh, args.degree)
    A = assemble_a(space)
    m_vol = assemble_m(space, "volume")
    pencil = m_vol if args.placement == "volume" else assemble_m(space, "boundary")

    if args.dump_matrices:
        from scipy.io import mmwrite

        try:
            os.makedirs(args.dump_matrices, exist_ok=True)
            mmwrite(os.path.join(args.dump_matrices, "A.mtx"), A)
            mmwrite(os.path.join(args.dump_matrices, "M.mtx"), pencil)
        except OSError as exc:
            print(f"error: cannot dump matrices: {exc}", file=sys.stderr)
            return 3

    result = solve_generalized(
        A,
        pencil,
        args.neig,
        shift=args.shift,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
        m_norm=m_vol,
        inner=args.inner,
    )
    print(
        f"{args.domain} nb={len(mesh.boundary_edges)} r={args.order} "
        f"k={args.degree} placement={args.placement} ndof={space.num_dofs}"
    )
    for j, (lam, res) in enumerate(zip(result.values, result.residuals), 1):
        print(f"  lambda_{j:<2d} = {lam:.12f}   residual = {res:.3e}")
    return 0


def cmd_study(args):
    cfg = parse_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    if os.environ.get("VENTCEL_THREADS") or args.threads is not None:
        cfg.threads = _effective_threads(args.threads)
    cfg.validate()
    out_dir = cfg.out_dir or "study_out"

    partial = None
    try:
        report = run_study(cfg)
    except PartialReport as exc:
        report = exc.report
        partial = exc

    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.csv"), "w") as fh:
            fh.write(report_csv(report))
        with open(os.path.join(out_dir, "eoc.csv"), "w") as fh:
            fh.write(eoc_csv(report))
        with open(os.path.join(out_dir, "table.txt"), "w") as fh:
            fh.write(report_table(report))
        with open(os.path.join(out_dir, "plot.dat"), "w") as fh:
            fh.write(plot_data(report))
        with open(os.path.join(out_dir, "study.cfg"), "w") as fh:
            fh.write(config_text(cfg))
    except OSError as exc:
        print(f"error: cannot write report to {out_dir}: {exc}", file=sys.stderr)
        return 3

    print(report_table(report), end="")
    if partial is not None:
        print(f"error: {partial}", file=sys.stderr)
        return 4
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ventcel",
        description="Curved-mesh finite elements for the Ventcel eigenvalue problem",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_mesh = sub.add_parser("mesh", help="generate a mesh and write it as MSH 4.1")
    _add_domain_args(p_mesh)
    p_mesh.add_argument("--nb", type=int, required=True, help="boundary edge count")
    p_mesh.add_argument("--order", type=int, default=1, choices=(1, 2, 3))
    p_mesh.add_argument("--out", default=None)
    p_mesh.set_defaults(func=cmd_mesh)

    p_solve = sub.add_parser("solve", help="solve one level and print eigenvalues")
    _add_domain_args(p_solve)
    p_solve.add_argument("--nb", type=int, default=20)
    p_solve.add_argument("--order", type=int, default=1, choices=(1, 2, 3))
    p_solve.add_argument("--degree", type=int, default=1, choices=(1, 2, 3, 4))
    p_solve.add_argument("--placement", default="boundary", choices=("volume", "boundary"))
    p_solve.add_argument("--neig", type=int, default=12)
    p_solve.add_argument("--shift", type=float, default=-1.0)
    p_solve.add_argument("--tol", type=float, default=1e-12)
    p_solve.add_argument("--max-iter", type=int, default=500)
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--inner", default="direct", choices=("direct", "pcg"))
    p_solve.add_argument("--mesh", default=None, help="read mesh from MSH file")
    p_solve.add_argument("--dump-matrices", default=None, metavar="DIR")
    p_solve.add_argument("--threads", type=int, default=None)
    p_solve.set_defaults(func=cmd_solve)

    p_study = sub.add_parser("study", help="run a multi-level convergence study")
    p_study.add_argument("config", help="path to a 'key = value' study config")
    p_study.add_argument("--out", default=None, help="output directory override")
    p_study.add_argument("--threads", type=int, default=None)
    p_study.set_defaults(func=cmd_study)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BadParameter, UnsupportedFeature, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NotConverged, InnerSolveFailure) as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return 4
    except VentcelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
