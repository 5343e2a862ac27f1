"""Command-line front end: mesh generation, solves, and convergence studies.

Four subcommands: ``mesh`` writes a mesh file, ``eigen`` solves one
eigenproblem, ``study`` runs a multi-level eigenvalue convergence study, and
``source`` runs the source problem against a manufactured solution.  Studies
and solves can emit CSV; the output is deterministic so reruns with the same
configuration produce bit-identical files.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .analysis import (ConvergenceStudy, StudyRow, eigen_study,
                       exact_spectrum, h1_source_error, match_and_errors,
                       reference_domain, source_study)
from .assembly import assemble, assemble_rhs, dump_blocks
from .mesh import (build_disk, build_hexagonal, build_lshape,
                   build_triangular_square, build_uniform_interval,
                   build_uniform_square, load_mesh, refine_uniform, save_mesh)
from .solver import compute_spectrum, solve_source

CSV_HEADER = "level,h,k,eta,mode,lambda_h,lambda_exact,rel_err,order"

# Families whose --n argument is a subdivision count; studies double it per
# level starting from the base value below.  For hex and disk --n is the
# generator level itself and studies step it directly.
_BASE_N = {"interval": 10, "square": 4, "tri-square": 4, "lshape": 4}

_BUILDERS = {
    "interval": build_uniform_interval,
    "square": build_uniform_square,
    "tri-square": build_triangular_square,
    "lshape": build_lshape,
    "hex": build_hexagonal,
    "disk": build_disk,
}


def _apply_thread_cap() -> None:
    raw = os.environ.get("HHO_THREADS")
    if raw is None:
        return
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"HHO_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise ValueError(f"HHO_THREADS must be a positive integer, got {raw!r}")
    import threadpoolctl
    threadpoolctl.threadpool_limits(limits=n)


def _parse_eta(text: str, degree: int) -> tuple[float, bool]:
    """Resolve the --eta flag; returns (value, was_auto)."""
    if text == "auto":
        return float(2 * degree + 3), True
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"--eta must be a positive number or 'auto', got {text!r}")
    if not value > 0.0:
        raise ValueError(f"--eta must be positive, got {value}")
    return value, False


def _parse_levels(text: str) -> list[int]:
    first, sep, last = text.partition("..")
    try:
        if not sep:
            lo = hi = int(first)
        else:
            lo, hi = int(first), int(last)
    except ValueError:
        raise ValueError(f"--levels expects L0..L1, got {text!r}")
    if hi < lo or lo < 0:
        raise ValueError(f"--levels expects a nondecreasing range, got {text!r}")
    return list(range(lo, hi + 1))


def _single_mesh(args):
    if args.family == "file":
        if not args.mesh_file:
            raise ValueError("--family file requires --mesh-file")
        return load_mesh(args.mesh_file)
    if args.n is None:
        raise ValueError(f"--family {args.family} requires --n")
    if args.family in ("hex", "disk") and args.n < 0:
        raise ValueError("--n is a generator level for hex and disk; must be >= 0")
    return _BUILDERS[args.family](args.n)


def _mesh_sequence(args, levels: list[int]):
    """(level, mesh) pairs for a study, coarse to fine."""
    family = args.family
    if family == "file":
        if not args.mesh_file:
            raise ValueError("--family file requires --mesh-file")
        mesh = load_mesh(args.mesh_file)
        out = []
        current = 0
        for level in levels:
            while current < level:
                mesh = refine_uniform(mesh)
                current += 1
            out.append((level, mesh))
        return out
    if family in ("hex", "disk"):
        return [(level, _BUILDERS[family](level)) for level in levels]
    base = _BASE_N[family]
    return [(level, _BUILDERS[family](base * 2 ** level)) for level in levels]


# ---------------------------------------------------------------------------
# Output.

def _fmt_csv(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _fmt_console(value) -> str:
    if value is None:
        return "—"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value)


def _write_csv(path, meta: list[tuple[str, str]], rows: list[StudyRow]) -> None:
    lines = [f"# {key}: {value}" for key, value in meta]
    lines.append(CSV_HEADER)
    for r in rows:
        lines.append(",".join(_fmt_csv(v) for v in
                              (r.level, r.h, r.degree, r.eta, r.mode,
                               r.lambda_h, r.lambda_exact, r.rel_err, r.order)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _print_rows(rows: list[StudyRow]) -> None:
    cols = ["level", "h", "mode", "lambda_h", "lambda_exact", "rel_err", "order"]
    table = [[_fmt_console(v) for v in
              (r.level, r.h, r.mode, r.lambda_h, r.lambda_exact, r.rel_err,
               r.order)] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in table))
              for i, c in enumerate(cols)]
    print("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
    for row in table:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)))


def _eta_meta(eta: float, was_auto: bool) -> str:
    if was_auto:
        return f"{eta!r} (auto = 2k+3)"
    return repr(eta)


# ---------------------------------------------------------------------------
# Subcommands.

def cmd_mesh(args) -> int:
    mesh = _single_mesh(args)
    print(f"{args.family}: {mesh.n_cells} cells, {len(mesh.faces)} faces, "
          f"h = {mesh.max_diameter:.6g}")
    if args.out:
        save_mesh(mesh, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_eigen(args) -> int:
    eta, was_auto = _parse_eta(args.eta, args.degree)
    mesh = _single_mesh(args)
    if args.dump_matrices:
        dump_blocks(assemble(mesh, args.degree, eta), args.dump_matrices)
    spec = compute_spectrum(mesh, args.degree, eta, args.modes,
                            dense_limit=args.dense_limit)
    domain = reference_domain(args.family)
    exact = exact_spectrum(domain, args.modes) if domain else []
    errs = match_and_errors(spec, exact) if exact else [None] * args.modes
    rows = [StudyRow(level=0, h=mesh.max_diameter, degree=args.degree, eta=eta,
                     mode=j + 1, lambda_h=float(spec.eigenvalues[j]),
                     lambda_exact=exact[j].value if j < len(exact) else None,
                     rel_err=errs[j], order=None)
            for j in range(args.modes)]
    _print_rows(rows)
    if args.out:
        meta = [("command", "eigen"), ("family", args.family),
                ("degree", str(args.degree)),
                ("eta", _eta_meta(eta, was_auto)),
                ("modes", str(args.modes))]
        _write_csv(args.out, meta, rows)
    return 0


def cmd_study(args) -> int:
    eta, was_auto = _parse_eta(args.eta, args.degree)
    levels = _parse_levels(args.levels)
    if len(levels) < 2:
        raise ValueError("a study needs at least two levels")
    meshes = _mesh_sequence(args, levels)
    study = eigen_study(args.family, meshes, args.degree, eta, args.modes,
                        dense_limit=args.dense_limit)
    _print_rows(study.rows)
    if args.out:
        meta = [("command", "study"), ("family", args.family),
                ("degree", str(args.degree)),
                ("eta", _eta_meta(eta, was_auto)),
                ("modes", str(args.modes)), ("levels", args.levels)]
        _write_csv(args.out, meta, study.rows)
    return 0


def cmd_source(args) -> int:
    eta, was_auto = _parse_eta(args.eta, args.degree)
    levels = _parse_levels(args.levels)
    meshes = _mesh_sequence(args, levels)
    if args.load == "zero":
        study = _zero_load_study(args.family, meshes, args.degree, eta,
                                 args.quad_order)
    else:
        study = source_study(args.family, meshes, args.degree, eta,
                             quad_order=args.quad_order)
    _print_rows(study.rows)
    if args.out:
        meta = [("command", "source"), ("family", args.family),
                ("degree", str(args.degree)),
                ("eta", _eta_meta(eta, was_auto)),
                ("load", args.load), ("levels", args.levels)]
        _write_csv(args.out, meta, study.rows)
    return 0


class _ZeroField:
    def __call__(self, points):
        return np.zeros(points.shape[0])

    def grad(self, points):
        return np.zeros_like(points)


def _zero_load_study(family, meshes, degree, eta, quad_order) -> ConvergenceStudy:
    """Sanity path: zero load must give the zero solution exactly."""
    zero = _ZeroField()
    rows = []
    for level, mesh in meshes:
        blocks = assemble(mesh, degree, eta)
        rhs = assemble_rhs(mesh, degree, zero, quad_order=quad_order)
        sol = solve_source(blocks, rhs)
        err = h1_source_error(sol, zero, quad_order=quad_order)
        rows.append(StudyRow(level=level, h=mesh.max_diameter, degree=degree,
                             eta=eta, mode=None, lambda_h=None,
                             lambda_exact=None, rel_err=err, order=None))
    return ConvergenceStudy(family=family, degree=degree, eta=eta, rows=rows)


# ---------------------------------------------------------------------------
# Parser.

def _add_shared(sub, with_modes: bool) -> None:
    sub.add_argument("--family", required=True,
                     choices=["interval", "square", "tri-square", "lshape",
                              "hex", "disk", "file"])
    sub.add_argument("--mesh-file", help="mesh JSON path for --family file")
    sub.add_argument("--degree", type=int, default=0, metavar="K",
                     help="polynomial degree k, 0 to 3 (default 0)")
    sub.add_argument("--eta", default="1",
                     help="stabilization parameter, a number or 'auto' (= 2k+3)")
    sub.add_argument("--out", help="CSV output path")
    if with_modes:
        sub.add_argument("--modes", type=int, default=1, metavar="M",
                         help="number of eigenpairs (default 1)")
        sub.add_argument("--dense-limit", type=int, default=2400,
                         help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hhoeig",
        description="Hybrid high-order discretization of the Laplace "
                    "eigenproblem on polytopal meshes")
    commands = parser.add_subparsers(dest="command", required=True)

    mesh = commands.add_parser("mesh", help="generate a mesh, optionally to JSON")
    mesh.add_argument("--family", required=True,
                      choices=["interval", "square", "tri-square", "lshape",
                               "hex", "disk", "file"])
    mesh.add_argument("--mesh-file", help="mesh JSON path for --family file")
    mesh.add_argument("--n", type=int, default=None,
                      help="subdivision count (generator level for hex/disk)")
    mesh.add_argument("--out", help="mesh JSON output path")
    mesh.set_defaults(func=cmd_mesh)

    eigen = commands.add_parser("eigen", help="solve one eigenproblem")
    _add_shared(eigen, with_modes=True)
    eigen.add_argument("--n", type=int, default=None,
                       help="subdivision count (generator level for hex/disk)")
    eigen.add_argument("--dump-matrices", metavar="DIR",
                       help="write assembled blocks as coordinate text files")
    eigen.set_defaults(func=cmd_eigen)

    study = commands.add_parser("study", help="multi-level eigenvalue study")
    _add_shared(study, with_modes=True)
    study.add_argument("--levels", required=True, metavar="L0..L1",
                       help="inclusive level range, e.g. 0..2")
    study.set_defaults(func=cmd_study)

    source = commands.add_parser("source",
                                 help="source-problem study, manufactured solution")
    _add_shared(source, with_modes=False)
    source.add_argument("--levels", required=True, metavar="L0..L1",
                        help="inclusive level range, e.g. 0..2")
    source.add_argument("--quad-order", type=int, default=None, metavar="Q",
                        help="quadrature order for the load and error integrals")
    source.add_argument("--load", choices=["manufactured", "zero"],
                        default="manufactured")
    source.set_defaults(func=cmd_source)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_thread_cap()
        return args.func(args)
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
