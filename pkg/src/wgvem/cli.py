"""Command line front end: ``wgvem {mesh,solve,patch-test,equivalence,convergence}``."""

from __future__ import annotations

import argparse
import csv
import logging
import re
import sys
from pathlib import Path


from .assembly import SolverError, apply_dirichlet, assemble, back_substitute, condense_all_interior, condense_u2, solve
from .forms import METHODS, STABILIZATIONS
from .harness import CASES, convergence_study, equivalence_report, error_norms, get_case, patch_test
from .mesh import MESH_KINDS, MeshError, generate_structured, read_mesh, write_mesh

log = logging.getLogger("wgvem")

_GENERATED = re.compile(r"^(?P<kind>[a-z-]+):(?P<n>\d+)$")


def load_mesh(source: str, seed: int = 0):
    """Read a mesh file, or generate one from ``kind:n`` (e.g. ``hexagon-dominant:8``)."""
    path = Path(source)
    if not path.exists():
        m = _GENERATED.match(source)
        if m and m["kind"] in MESH_KINDS:
            return generate_structured(m["kind"], int(m["n"]), seed=seed)
    return read_mesh(path)


def _levels(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers, got {text!r}") from None


def _write_solution(path, fld) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dof_id", "kind", "entity", "value"])
        for i, (d, v) in enumerate(zip(fld.dofmap.descriptors, fld.values)):
            w.writerow([i, d.kind, d.entity, f"{v:.17g}"])


def cmd_mesh(args) -> int:
    mesh = generate_structured(args.kind, args.n, seed=args.seed, magnitude=args.magnitude)
    write_mesh(mesh, args.out)
    print(f"wrote {args.out}: {mesh.n_vertices} vertices, {mesh.n_cells} cells, {mesh.n_edges} edges")
    return 0


def cmd_solve(args) -> int:
    mesh = load_mesh(args.mesh, args.seed)
    case = get_case(args.case, k=args.k, seed=args.seed)
    system = apply_dirichlet(assemble(mesh, args.k, args.method, args.stab, case.f), case.g)
    if args.condense == "u2":
        reduced, record = condense_u2(system)
    elif args.condense == "interior":
        reduced, record = condense_all_interior(system)
    else:
        reduced, record = system, None
    fld = solve(reduced, tol=args.tol)
    if record is not None:
        fld = back_substitute(record, fld)
    e0, e1 = error_norms(fld, case)
    print(f"method={system.method} stab={system.stab} k={args.k} ndof={system.n_dofs} "
          f"free={len(reduced.free)} solver={fld.solver} iterations={fld.iterations} residual={fld.residual:.3e}")
    print(f"err_l2={e0:.6e} err_h1={e1:.6e}")
    if args.out:
        _write_solution(args.out, fld)
    return 0 if fld.residual <= max(args.tol, 1e-10) * 10 else 1


def cmd_patch_test(args) -> int:
    mesh = load_mesh(args.mesh, args.seed)
    report = patch_test(mesh, args.k, args.method, seed=args.seed, stab=args.stab)
    print(report)
    return 0 if report.passed else 1


def cmd_equivalence(args) -> int:
    mesh = load_mesh(args.mesh)
    report = equivalence_report(mesh, args.k)
    text = report.text()
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0 if report.passed else 1


def cmd_convergence(args) -> int:
    report = convergence_study(args.family, args.levels, args.k, args.method, args.case,
                               stab=args.stab, seed=args.seed, out=args.out)
    print("level,h,ndof,err_l2,err_h1,rate_l2,rate_h1")
    for r in report.rows:
        print(f"{r.level},{r.h:.4g},{r.ndof},{r.err_l2:.3e},{r.err_h1:.3e},{r.rate_l2:.3f},{r.rate_h1:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wgvem", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    methods = sorted(METHODS)

    def common(sp, k=True, method=True):
        if k:
            sp.add_argument("--k", type=int, required=True, choices=(1, 2, 3))
        if method:
            sp.add_argument("--method", required=True, choices=methods)
            sp.add_argument("--stab", choices=STABILIZATIONS, default=None,
                            help="stabilization (default: the method's own)")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("mesh", help="generate a structured mesh file")
    sp.add_argument("--kind", required=True, choices=MESH_KINDS)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--magnitude", type=float, default=0.2)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_mesh)

    sp = sub.add_parser("solve", help="solve a manufactured problem and write the dof vector")
    sp.add_argument("--mesh", required=True, help="mesh file, or kind:n to generate one")
    common(sp)
    sp.add_argument("--case", required=True, choices=sorted(CASES))
    sp.add_argument("--condense", choices=("none", "u2", "interior"), default="none")
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("patch-test", help="reproduce a random degree-k polynomial")
    sp.add_argument("--mesh", required=True)
    common(sp)
    sp.set_defaults(func=cmd_patch_test)

    sp = sub.add_parser("equivalence", help="compare the paired methods")
    sp.add_argument("--mesh", required=True)
    common(sp, method=False)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_equivalence)

    sp = sub.add_parser("convergence", help="error and rate table over refinement levels")
    sp.add_argument("--family", required=True, choices=MESH_KINDS)
    sp.add_argument("--levels", required=True, type=_levels)
    common(sp)
    sp.add_argument("--case", required=True, choices=sorted(CASES))
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_convergence)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (MeshError, SolverError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
