"""Verification driver: manufactured solutions, error norms, patch tests,
equivalence reports and convergence studies."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import (
    DiscreteField,
    SolverError,
    apply_dirichlet,
    assemble,
    back_substitute,
    condense_u2,
    solve,
)
from .dofs import DofMap, build_global_map, interpolate
from .forms import get_method, local_form, local_stiffness, stabilization, weak_gradient
from .mesh import PolygonMesh, generate_structured
from .poly import Polynomial
from .projectors import h1_projector, moment_projector

log = logging.getLogger(__name__)

__all__ = [
    "ManufacturedCase",
    "register_case",
    "get_case",
    "CASES",
    "error_norms",
    "PatchReport",
    "patch_test",
    "Check",
    "EquivalenceReport",
    "equivalence_report",
    "cotangent_stiffness",
    "kernel_gap",
    "stability_ratio",
    "ConvergenceRow",
    "ConvergenceReport",
    "convergence_study",
]

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


# -- manufactured solutions -------------------------------------------------


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact solution ``u`` of ``-lap u = f`` with its gradient; ``u`` is also the boundary trace."""

    name: str
    u: Field
    grad: Field  # returns (..., 2)
    f: Field
    domain: str = "square"

    @property
    def g(self) -> Field:
        return self.u


def _check_case(case: ManufacturedCase, seed: int = 0, tol: float = 1e-6) -> None:
    """Fourth-order finite-difference check of ``-lap u = f`` and ``grad u`` at random points."""
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(0.1, 0.9, size=(2, 20))
    d = 1e-3

    def second(dx, dy):
        u = case.u
        return (-u(x + 2 * dx, y + 2 * dy) + 16 * u(x + dx, y + dy) - 30 * u(x, y)
                + 16 * u(x - dx, y - dy) - u(x - 2 * dx, y - 2 * dy)) / (12 * d * d)

    lap = second(d, 0.0) + second(0.0, d)
    f = case.f(x, y)
    scale = max(1.0, np.abs(f).max())
    if np.abs(lap + f).max() > tol * scale:
        raise ValueError(f"case {case.name!r}: -lap u does not match f")
    gx = (case.u(x - 2 * d, y) - 8 * case.u(x - d, y) + 8 * case.u(x + d, y) - case.u(x + 2 * d, y)) / (12 * d)
    gy = (case.u(x, y - 2 * d) - 8 * case.u(x, y - d) + 8 * case.u(x, y + d) - case.u(x, y + 2 * d)) / (12 * d)
    g = case.grad(x, y)
    gscale = max(1.0, np.abs(g).max())
    if np.abs(g[..., 0] - gx).max() > tol * gscale or np.abs(g[..., 1] - gy).max() > tol * gscale:
        raise ValueError(f"case {case.name!r}: gradient does not match u")


CASES: dict[str, Callable[..., ManufacturedCase]] = {}


def register_case(name: str):
    def deco(factory):
        CASES[name] = factory
        return factory

    return deco


def get_case(name: str, k: int = 1, seed: int = 0, check: bool = True) -> ManufacturedCase:
    try:
        factory = CASES[name]
    except KeyError:
        raise ValueError(f"unknown case {name!r}; expected one of {sorted(CASES)}") from None
    case = factory(k=k, seed=seed)
    if check:
        _check_case(case)
    return case


def _sinsin(freq: float, name: str, domain: str) -> ManufacturedCase:
    w = freq * np.pi

    def u(x, y):
        return np.sin(w * x) * np.sin(w * y)

    def grad(x, y):
        return w * np.stack([np.cos(w * x) * np.sin(w * y), np.sin(w * x) * np.cos(w * y)], axis=-1)

    def f(x, y):
        return 2 * w * w * u(x, y)

    return ManufacturedCase(name, u, grad, f, domain)


@register_case("sinsin")
def _case_sinsin(k: int = 1, seed: int = 0) -> ManufacturedCase:
    return _sinsin(1.0, "sinsin", "square")


@register_case("lshape-smooth")
def _case_lshape(k: int = 1, seed: int = 0) -> ManufacturedCase:
    # vanishes on x, y in {0, 1/2, 1}, hence on the whole L-shaped boundary
    return _sinsin(2.0, "lshape-smooth", "lshape")


@register_case("polyK")
def _case_poly(k: int = 1, seed: int = 0) -> ManufacturedCase:
    p = Polynomial.random(k, seed)
    return ManufacturedCase("polyK", p, p.gradient(), -p.laplacian(), "any")


# -- error norms ------------------------------------------------------------


def _cell_approximation(el, v: np.ndarray, method):
    """(values at the cell quadrature points, gradients there) of the computable surrogate."""
    m = get_method(method)
    pts = el.rule.points
    if m.is_wg:
        u0 = el.cell_polynomial_from_moments() @ v
        vals = el.monomial_values @ u0
        grads = weak_gradient(el, m).evaluate(el, v, pts)
        return vals, grads
    pi_grad = h1_projector(el).pi_star @ v
    grads = np.einsum("qia,i->qa", el.basis.grad(pts), pi_grad)
    l2 = moment_projector(el).pi_star @ v if el.enlarged else pi_grad
    return el.monomial_values @ l2, grads


def error_norms(fld: DiscreteField, case: ManufacturedCase, method=None) -> tuple[float, float]:
    """(L2 error, broken H1 seminorm error) of ``fld`` against the exact solution.

    Weak Galerkin fields use u0 and the weak gradient. Virtual element fields use
    the H1 projector for gradients, and for values the H1 projector on V or the
    moment projector on the enlarged space.
    """
    method = method or fld.method
    e0 = e1 = 0.0
    for c in range(fld.dofmap.mesh.n_cells):
        el = fld.dofmap.element(c)
        vals, grads = _cell_approximation(el, fld.local(c), method)
        x, y = el.rule.points.T
        e0 += el.rule.integrate((case.u(x, y) - vals) ** 2)
        e1 += el.rule.integrate(np.sum((case.grad(x, y) - grads) ** 2, axis=-1))
    return float(np.sqrt(max(e0, 0.0))), float(np.sqrt(max(e1, 0.0)))


# -- patch test -------------------------------------------------------------


@dataclass
class PatchReport:
    method: str
    stab: str
    k: int
    passed: bool
    max_dof_error: float = np.inf
    offending_cell: int = -1
    err_l2: float = np.inf
    err_h1: float = np.inf
    message: str = ""

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        out = (f"patch-test {self.method}/{self.stab} k={self.k}: {status} "
               f"max_dof_error={self.max_dof_error:.3e} err_l2={self.err_l2:.3e} err_h1={self.err_h1:.3e}")
        if not self.passed and self.offending_cell >= 0:
            out += f" offending_cell={self.offending_cell}"
        if self.message:
            out += f" ({self.message})"
        return out


def patch_test(mesh: PolygonMesh, k: int, method: str, seed: int = 0, stab: str | None = None,
               tol: float = 1e-9, p: Polynomial | None = None) -> PatchReport:
    """Reproduce p in P_k (seeded random unless given) from its trace and -lap p."""
    m = get_method(method)
    stab = stab or m.default_stab
    if p is None:
        case = get_case("polyK", k=k, seed=seed)
    else:
        if p.degree > k:
            raise ValueError(f"patch polynomial has degree {p.degree} > k = {k}")
        case = ManufacturedCase("patch", p, p.gradient(), -p.laplacian(), "any")
    system = apply_dirichlet(assemble(mesh, k, m, stab, case.f), case.g)
    try:
        fld = solve(system)
    except SolverError as exc:
        return PatchReport(m.name, stab, k, False, message=str(exc))
    exact = interpolate(system.dofmap, case.u)
    dev = np.abs(fld.values - exact)
    worst = int(np.argmax(dev))
    cell = next(c for c, idx in enumerate(system.dofmap.local_to_global) if worst in idx)
    scale = max(1.0, np.abs(exact).max())
    e0, e1 = error_norms(fld, case)
    ok = bool(dev[worst] <= tol * scale and e0 <= tol and e1 <= tol)
    return PatchReport(m.name, stab, k, ok, float(dev[worst]), cell, e0, e1)


# -- equivalence ------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.threshold)

    def line(self) -> str:
        return f"{self.name},{self.value:.3e},{self.threshold:.1e},{'pass' if self.passed else 'fail'}"


@dataclass
class EquivalenceReport:
    k: int
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def text(self) -> str:
        return "\n".join(["check,max_rel_diff,threshold,pass"] + [c.line() for c in self.checks]) + "\n"


def _rel(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return float(np.linalg.norm(a - b) / scale) if scale > 0 else 0.0


def _rel_inf(a, b) -> float:
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0))
    return float(np.abs(a - b).max(initial=0.0) / scale) if scale > 0 else 0.0


def _embedding(small: DofMap, big: DofMap) -> np.ndarray:
    """Global indices in ``big`` of the dofs of ``small`` (same family, fewer cell moments)."""
    return np.array([big.index(d) for d in small.descriptors], dtype=np.int64)


def _stiffness_pair(mesh, k, vem: str, wg: str) -> tuple[float, float]:
    """Max per-cell and assembled relative discrepancy between the VEM stiffness
    on V and the weak Galerkin stiffness on the enlarged space after embedding."""
    vm, wm = get_method(vem), get_method(wg)
    vmap = build_global_map(mesh, k, vm.family, enlarged=False)
    wmap = build_global_map(mesh, k, wm.family, enlarged=True)
    worst = 0.0
    for c in range(mesh.n_cells):
        ev, ew = vmap.element(c), wmap.element(c)
        Av, Aw = local_stiffness(ev, vm), local_stiffness(ew, wm)
        E = np.zeros((ew.n_dofs, ev.n_dofs))
        E[np.arange(ev.n_dofs), np.arange(ev.n_dofs)] = 1.0  # V dofs are a prefix of the local W dofs
        worst = max(worst, _rel(Aw, E @ Av @ E.T))
    sv = assemble(mesh, k, vm, "none")
    sw = assemble(mesh, k, wm, "none")
    emb = _embedding(vmap, wmap)
    Aw = sw.matrix.toarray()
    Av = np.zeros_like(Aw)
    Av[np.ix_(emb, emb)] = sv.matrix.toarray()
    return worst, _rel(Aw, Av)


def cotangent_stiffness(points) -> np.ndarray:
    """Classical P1 element stiffness of a triangle: ``K_ij = -cot(theta_k) / 2``."""
    p = np.asarray(points, float)
    K = np.zeros((3, 3))
    for i in range(3):
        j, l = (i + 1) % 3, (i + 2) % 3
        a, b = p[j] - p[i], p[l] - p[i]
        cot = (a @ b) / abs(a[0] * b[1] - a[1] * b[0])
        K[j, l] = K[l, j] = -0.5 * cot
    K[np.diag_indices(3)] = -K.sum(axis=1)
    return K


def equivalence_report(mesh: PolygonMesh, k: int, f: Field | None = None, tol_matrix: float = 1e-11,
                       tol_solution: float = 1e-10, tol_condensed: float = 1e-9) -> EquivalenceReport:
    """Compare the method pairs the equivalence results identify.

    stiffness-*    VEM stiffness on V vs weak Galerkin stiffness on the enlarged space
    stab-*         moment-projector stabilization vs boundary stabilization
    solution-*     solutions of the paired methods, homogeneous boundary data
    condensed-*    u2-condensed weak Galerkin vs the reduced VEM assembled directly
    fem-triangle   k = 1 on all-triangle meshes: VEM stiffness vs cotangent formula

    All discrepancies are relative (Frobenius for matrices, max-norm for vectors).
    """
    if f is None:
        def f(x, y):
            return np.ones(np.broadcast(x, y).shape)

    rep = EquivalenceReport(k)
    for fam, vem, wg in (("conforming", "vem-conforming", "wg-modified"),
                         ("nonconforming", "nc-vem", "wg-original")):
        cell, glob = _stiffness_pair(mesh, k, vem, wg)
        rep.checks.append(Check(f"stiffness-{fam}-cell", cell, tol_matrix))
        rep.checks.append(Check(f"stiffness-{fam}-global", glob, tol_matrix))

    for fam, tilde, wg, bstab in (("conforming", "vem-tilde", "wg-modified", "boundary"),
                                  ("nonconforming", "nc-vem-tilde", "wg-original", "nc-boundary")):
        dm = build_global_map(mesh, k, fam, enlarged=True)
        worst = 0.0
        for c in range(mesh.n_cells):
            el = dm.element(c)
            worst = max(worst, _rel(stabilization(el, "tilde"), stabilization(el, bstab)))
        rep.checks.append(Check(f"stab-{fam}", worst, tol_matrix))
        u_t = solve(apply_dirichlet(assemble(mesh, k, tilde, f=f)))
        u_w = solve(apply_dirichlet(assemble(mesh, k, wg, f=f)))
        rep.checks.append(Check(f"solution-{wg}-vs-{tilde}", _rel_inf(u_w.values, u_t.values), tol_solution))

    for wg, vem in (("wg-modified", "vem-conforming"), ("wg-original", "nc-vem")):
        full = apply_dirichlet(assemble(mesh, k, wg, f=f))
        reduced, record = condense_u2(full)
        direct = apply_dirichlet(assemble(mesh, k, vem, "reduced", f, load="condensed"))
        rep.checks.append(Check(f"condensed-matrix-{wg}", _rel(reduced.matrix.toarray(), direct.matrix.toarray()),
                                tol_matrix))
        u_r, u_d = solve(reduced), solve(direct)
        rep.checks.append(Check(f"condensed-solution-{wg}-vs-{vem}", _rel_inf(u_r.values, u_d.values),
                                tol_condensed))
        u_full = solve(full)
        u_back = back_substitute(record, u_r)
        rep.checks.append(Check(f"back-substitution-{wg}", _rel_inf(u_back.values, u_full.values), tol_condensed))

    if k == 1 and all(len(c) == 3 for c in mesh.cells):
        dm = build_global_map(mesh, 1, "conforming")
        worst = 0.0
        for c in range(mesh.n_cells):
            A = local_stiffness(dm.element(c), "vem-conforming")
            worst = max(worst, _rel(A, cotangent_stiffness(mesh.cell_points(c))))
        rep.checks.append(Check("fem-triangle", worst, 1e-12))
    return rep


# -- spectral diagnostics ---------------------------------------------------


def kernel_gap(mesh: PolygonMesh, k: int, method: str = "wg-modified", stab: str | None = None):
    """Eigenvalues of the unconstrained operator ordered by magnitude and the ratio
    second-smallest / smallest (large means nullity exactly one)."""
    A = assemble(mesh, k, method, stab).matrix.toarray()
    lam = np.linalg.eigvalsh(A)
    lam = lam[np.argsort(np.abs(lam))]
    ratio = np.inf if lam[0] == 0 else abs(lam[1]) / abs(lam[0])
    return lam, ratio


def stability_ratio(mesh: PolygonMesh, k: int, method: str, stab: str | None = None) -> float:
    """Min over cells of the smallest nonzero eigenvalue of A_K + S_K divided by the
    smallest nonzero eigenvalue of A_K. Recorded as a diagnostic only."""
    m = get_method(method)
    dm = build_global_map(mesh, k, m.family, enlarged=m.enlarged)
    worst = np.inf
    for c in range(mesh.n_cells):
        lf = local_form(dm.element(c), m, stab)
        a = np.linalg.eigvalsh(lf.A)
        s = np.linalg.eigvalsh(lf.K)
        a_min = a[a > 1e-10 * a.max()].min()
        s_min = s[s > 1e-10 * s.max()].min()
        worst = min(worst, s_min / a_min)
    return float(worst)


# -- convergence ------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    h: float
    ndof: int
    err_l2: float
    err_h1: float
    rate_l2: float = np.nan
    rate_h1: float = np.nan


@dataclass
class ConvergenceReport:
    family: str
    k: int
    method: str
    case: str
    rows: list[ConvergenceRow] = field(default_factory=list)

    @property
    def finest_rates(self) -> tuple[float, float]:
        last = self.rows[-1]
        return last.rate_l2, last.rate_h1

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "h", "ndof", "err_l2", "err_h1", "rate_l2", "rate_h1"])
            for r in self.rows:
                w.writerow([r.level, f"{r.h:.10g}", r.ndof, f"{r.err_l2:.10e}", f"{r.err_h1:.10e}",
                            "" if np.isnan(r.rate_l2) else f"{r.rate_l2:.4f}",
                            "" if np.isnan(r.rate_h1) else f"{r.rate_h1:.4f}"])


def _rate(e0, e1, h0, h1) -> float:
    if e0 <= 0 or e1 <= 0:
        return np.nan
    return float(np.log(e0 / e1) / np.log(h0 / h1))


def convergence_study(family: str, levels, k: int, method: str, case: str | ManufacturedCase = "sinsin",
                      stab: str | None = None, seed: int = 0, out=None) -> ConvergenceReport:
    """Solve on ``generate_structured(family, n)`` for each n in ``levels`` and fit rates."""
    levels = [int(n) for n in levels]
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least three levels")
    if isinstance(case, str):
        case = get_case(case, k=k, seed=seed)
    report = ConvergenceReport(family, k, get_method(method).name, case.name)
    prev = None
    for n in levels:
        mesh = generate_structured(family, n, seed=seed)
        system = apply_dirichlet(assemble(mesh, k, method, stab, case.f), case.g)
        fld = solve(system)
        e0, e1 = error_norms(fld, case)
        h = mesh.max_diameter()
        if prev is not None and h >= prev.h:
            raise ValueError("mesh sizes must decrease strictly along the levels")
        r0 = _rate(prev.err_l2, e0, prev.h, h) if prev else np.nan
        r1 = _rate(prev.err_h1, e1, prev.h, h) if prev else np.nan
        row = ConvergenceRow(n, h, system.n_dofs, e0, e1, r0, r1)
        log.info("level %d: h=%.4g ndof=%d l2=%.3e h1=%.3e", n, h, system.n_dofs, e0, e1)
        report.rows.append(row)
        prev = row
    if out is not None:
        report.write_csv(out)
    return report
