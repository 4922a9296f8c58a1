"""Global assembly, Dirichlet conditions, static condensation and the linear solver."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .dofs import DofMap, build_global_map, dim_poly, interpolate, split_bases
from .forms import LocalForm, check_compatible, condensation_blocks, get_method, local_form
from .mesh import PolygonMesh

__all__ = [
    "SolverError",
    "CondensationError",
    "SparseSystem",
    "CondensationRecord",
    "DiscreteField",
    "assemble",
    "assemble_matrix",
    "apply_dirichlet",
    "condense_u2",
    "condense_all_interior",
    "back_substitute",
    "solve",
    "full_residual",
]


class SolverError(RuntimeError):
    pass


class CondensationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CellCondensation:
    cell: int
    kept: np.ndarray  # local indices (in transformed coordinates) that remain
    eliminated: np.ndarray
    transform: np.ndarray | None  # full local dofs = transform @ (kept, eliminated) coordinates
    factor: tuple  # Cholesky factor of the eliminated block
    coupling: np.ndarray  # K_eliminated,kept
    load: np.ndarray  # F_eliminated
    D1: np.ndarray | None = None
    D2: np.ndarray | None = None
    P: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class CondensationRecord:
    kind: str  # "u2" | "interior"
    full_dofmap: DofMap
    reduced_dofmap: DofMap
    cells: tuple


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Assembled symmetric system with optional Dirichlet data and condensation record.

    ``matrix``/``rhs`` are the unconstrained (pre-boundary-condition) operator.
    After :func:`apply_dirichlet`, ``free``/``constrained`` partition the dofs and
    ``matrix_ff``/``rhs_f`` hold the symmetrically eliminated system.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    method: str
    stab: str
    forms: tuple
    free: np.ndarray | None = None
    constrained: np.ndarray | None = None
    constrained_values: np.ndarray | None = None
    matrix_ff: sp.csr_matrix | None = None
    rhs_f: np.ndarray | None = None
    dirichlet: object = None
    condensation: CondensationRecord | None = None
    parent: "SparseSystem | None" = None

    @property
    def n_dofs(self) -> int:
        return self.dofmap.n_dofs

    @property
    def has_bc(self) -> bool:
        return self.free is not None


@dataclass(frozen=True, eq=False)
class DiscreteField:
    values: np.ndarray
    dofmap: DofMap
    method: str
    stab: str
    iterations: int = 0
    residual: float = 0.0
    solver: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.dofmap.k

    def local(self, c: int) -> np.ndarray:
        return self.values[self.dofmap.local_to_global[c]]

    @property
    def boundary_part(self) -> np.ndarray:
        """Skeleton dofs (u_b for weak Galerkin fields)."""
        return self.values[: self.dofmap.cell_offset]

    @property
    def interior_part(self) -> np.ndarray:
        """Cell-moment dofs (u_0 for weak Galerkin fields)."""
        return self.values[self.dofmap.cell_offset :]


# -- assembly ---------------------------------------------------------------


def assemble_matrix(local_matrices, local_to_global, n: int) -> sp.csr_matrix:
    """Scatter-add local matrices; duplicates are summed in (row, col, cell) order."""
    rows, cols, vals = [], [], []
    for K, idx in zip(local_matrices, local_to_global):
        rows.append(np.repeat(idx, len(idx)))
        cols.append(np.tile(idx, len(idx)))
        vals.append(np.asarray(K).ravel())
    if not rows:
        return sp.csr_matrix((n, n))
    rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    order = np.lexsort((cols, rows))  # stable: keeps cell order inside each (row, col)
    rows, cols, vals = rows[order], cols[order], vals[order]
    key = rows * n + cols
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    summed = np.add.reduceat(vals, starts)
    return sp.csr_matrix((summed, (rows[starts], cols[starts])), shape=(n, n))


def _assemble_vector(local_vectors, local_to_global, n: int) -> np.ndarray:
    out = np.zeros(n)
    for F, idx in zip(local_vectors, local_to_global):
        out[idx] += F
    return out


def _system_from_forms(forms, dofmap, method, stab, **kw) -> SparseSystem:
    l2g = [dofmap.local_to_global[f.cell] for f in forms]
    A = assemble_matrix([f.K for f in forms], l2g, dofmap.n_dofs)
    b = _assemble_vector([f.F for f in forms], l2g, dofmap.n_dofs)
    return SparseSystem(A, b, dofmap, method, stab, tuple(forms), **kw)


def assemble(mesh: PolygonMesh, k: int, method: str, stab: str | None = None, f=None, *,
             order=None, load: str | None = None) -> SparseSystem:
    """Assemble sum of scattered (A_K + S_K) and the load for ``method`` on ``mesh``.

    ``order`` permutes the cell processing order; the result does not depend on it.
    """
    m = get_method(method)
    stab = stab or m.default_stab
    check_compatible(m, stab)
    dofmap = build_global_map(mesh, k, m.family, enlarged=m.enlarged)
    cells = range(mesh.n_cells) if order is None else [int(c) for c in order]
    forms = {c: local_form(dofmap.element(c), m, stab, f, load) for c in cells}
    if len(forms) != mesh.n_cells:
        raise ValueError("order must be a permutation of the cells")
    return _system_from_forms([forms[c] for c in range(mesh.n_cells)], dofmap, m.name, stab)


# -- boundary conditions ----------------------------------------------------


def boundary_values(dofmap: DofMap, g=None) -> np.ndarray:
    """Dof values of the trace ``g`` on the boundary dofs (zero if ``g`` is None)."""
    idx = np.flatnonzero(dofmap.boundary)
    if g is None:
        return np.zeros(len(idx))
    return interpolate(dofmap, g)[idx]


def apply_dirichlet(system: SparseSystem, g=None) -> SparseSystem:
    """Constrain boundary dofs to the dofs of ``g`` (vertex values, edge moments).

    Constrained rows and columns are eliminated symmetrically with a RHS lift.
    """
    dofmap = system.dofmap
    constrained = np.flatnonzero(dofmap.boundary)
    free = np.flatnonzero(~dofmap.boundary)
    values = boundary_values(dofmap, g)
    A = system.matrix
    A_ff = A[free][:, free].tocsr()
    b_f = system.rhs[free] - A[free][:, constrained] @ values
    return dataclasses.replace(system, free=free, constrained=constrained, constrained_values=values,
                               matrix_ff=A_ff, rhs_f=b_f, dirichlet=g if g is not None else _ZERO)


def _ZERO(x, y):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)


# -- condensation -----------------------------------------------------------


def _cholesky(K: np.ndarray, what: str):
    try:
        return sla.cho_factor(K, lower=True)
    except np.linalg.LinAlgError:
        raise CondensationError(f"{what}: eliminated block is not positive definite") from None


def condense_u2(system: SparseSystem, tol: float = 1e-11) -> tuple[SparseSystem, CondensationRecord]:
    """Eliminate, cell by cell, the part u2 of u0 whose moments up to order k-2 vanish.

    Interior coordinates are changed from cell moments ``(mu_lo, mu_hi)`` to
    ``(mu_lo, c)`` with ``u0 = Phi mu_lo + Psi c``. The stiffness must not couple to
    ``c``; only the stabilization does, and its Schur complement leaves the
    projection form ``[P, -P D1; -D1^T P, D1^T P D1]`` on the V dofs.
    """
    full = system.dofmap
    if not full.enlarged:
        raise ValueError("u2 elimination needs the enlarged (weak Galerkin) space")
    k = full.k
    reduced = build_global_map(full.mesh, k, full.family, cell_degree=k - 2)
    n_lo = dim_poly(k - 2)
    new_forms, records = [], []
    for form in system.forms:
        el = form.element
        nb, nk = el.n_boundary, el.nk
        n = el.n_dofs
        Phi, Psi = split_bases(el)
        H = el.H
        T = np.eye(n)
        hi_rows = slice(nb + n_lo, n)
        if n_lo:
            T[hi_rows, nb : nb + n_lo] = H[n_lo:, :n_lo] @ np.linalg.inv(H[:n_lo, :n_lo])
        T[hi_rows, hi_rows] = (H @ Psi)[n_lo:] / el.area
        A = T.T @ form.A @ T
        S = T.T @ form.S @ T
        F = T.T @ form.F
        kept = np.arange(nb + n_lo)
        elim = np.arange(nb + n_lo, n)
        scale = max(np.abs(A).max(), 1e-300)
        leak = np.abs(A[:, elim]).max() / scale if A.size and elim.size else 0.0
        if leak > tol:
            raise CondensationError(
                f"cell {form.cell}: stiffness couples to u2 (relative {leak:.2e}); dof/space bug"
            )
        K = A + S
        fac = _cholesky(K[np.ix_(elim, elim)], f"cell {form.cell}")
        K_ek = K[np.ix_(elim, kept)]
        X = sla.cho_solve(fac, K_ek)
        K_red = K[np.ix_(kept, kept)] - K_ek.T @ X
        F_red = F[kept] - X.T @ F[elim]
        A_red = A[np.ix_(kept, kept)]
        D1, D2, P = condensation_blocks(el)
        records.append(CellCondensation(form.cell, kept, elim, T, fac, K_ek, F[elim], D1, D2, P))
        new_forms.append(LocalForm(form.cell, form.method, form.stab, A_red, K_red - A_red, F_red,
                                   reduced.element(form.cell)))
    record = CondensationRecord("u2", full, reduced, tuple(records))
    out = _system_from_forms(new_forms, reduced, system.method, system.stab, condensation=record, parent=system)
    if system.has_bc:
        out = apply_dirichlet(out, system.dirichlet)
    return out, record


def condense_all_interior(system: SparseSystem) -> tuple[SparseSystem, CondensationRecord]:
    """Schur complement of all cell-moment dofs; the reduced system is skeleton-only."""
    full = system.dofmap
    reduced = build_global_map(full.mesh, full.k, full.family, cell_degree=-1)
    new_forms, records = [], []
    for form in system.forms:
        el = form.element
        kept = np.arange(el.n_boundary)
        elim = np.arange(el.n_boundary, el.n_dofs)
        K, F = form.K, form.F
        if elim.size:
            fac = _cholesky(K[np.ix_(elim, elim)], f"cell {form.cell}")
            K_ek = K[np.ix_(elim, kept)]
            X = sla.cho_solve(fac, K_ek)
            K_red = K[np.ix_(kept, kept)] - K_ek.T @ X
            F_red = F[kept] - X.T @ F[elim]
        else:
            fac, K_ek = None, np.zeros((0, len(kept)))
            K_red, F_red = K, F
        records.append(CellCondensation(form.cell, kept, elim, None, fac, K_ek, F[elim]))
        zero = np.zeros_like(K_red)
        new_forms.append(LocalForm(form.cell, form.method, form.stab, K_red, zero, F_red, None))
    record = CondensationRecord("interior", full, reduced, tuple(records))
    out = _system_from_forms(new_forms, reduced, system.method, system.stab, condensation=record, parent=system)
    if system.has_bc:
        out = apply_dirichlet(out, system.dirichlet)
    return out, record


def back_substitute(record: CondensationRecord, reduced_field: DiscreteField) -> DiscreteField:
    """Recover the full-space field from a solution of the condensed system."""
    full, red = record.full_dofmap, record.reduced_dofmap
    out = np.zeros(full.n_dofs)
    for rec in record.cells:
        x_kept = reduced_field.values[red.local_to_global[rec.cell]]
        if rec.eliminated.size:
            x_elim = sla.cho_solve(rec.factor, rec.load - rec.coupling @ x_kept)
        else:
            x_elim = np.zeros(0)
        y = np.concatenate([x_kept, x_elim])
        local = rec.transform @ y if rec.transform is not None else y
        out[full.local_to_global[rec.cell]] = local
    return dataclasses.replace(reduced_field, values=out, dofmap=full)


# -- solver -----------------------------------------------------------------


def _dense_solve(A, b, label: str):
    dense = A.toarray() if sp.issparse(A) else np.asarray(A)
    if dense.shape[0] == 0:
        return np.zeros(0)
    try:
        L = sla.cholesky(dense, lower=True)
    except np.linalg.LinAlgError:
        raise SolverError(f"{label}: matrix is not positive definite (Cholesky failed)") from None
    pivots = np.diag(L) ** 2
    if np.any(pivots <= 1e-12 * np.abs(np.diag(dense)).max()):
        raise SolverError(f"{label}: matrix is numerically singular (Cholesky pivot collapse)")
    return sla.cho_solve((L, True), b)


def _pcg(A, b, tol: float, max_iter: int, label: str):
    """Jacobi-preconditioned conjugate gradients; rejects non-positive curvature."""
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError(f"{label}: non-positive diagonal entry; matrix is not SPD")
    inv_d = 1.0 / diag
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, 0
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0.0:
            raise SolverError(f"{label}: negative curvature in CG; matrix is indefinite or singular")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        # stop on the recursive residual; the true one is reported by the caller and
        # can sit slightly above it at tol ~ 1e-12 (attainable-accuracy floor)
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"{label}: CG did not converge in {max_iter} iterations")


def solve(system: SparseSystem, tol: float = 1e-12, max_iter: int | None = None,
          dense_threshold: int = 2000, solver: str = "auto") -> DiscreteField:
    """Solve the (constrained) system; Cholesky below ``dense_threshold`` free dofs, else PCG."""
    label = f"{system.method}/{system.stab} k={system.dofmap.k}"
    if system.has_bc:
        A, b = system.matrix_ff, system.rhs_f
    else:
        A, b = system.matrix, system.rhs
    n = A.shape[0]
    use_dense = solver == "dense" or (solver == "auto" and n <= dense_threshold)
    if use_dense:
        x, iters, name = _dense_solve(A, b, label), 1, "cholesky"
    else:
        x, iters = _pcg(A.tocsr(), b, tol, max_iter or 10 * max(n, 1), label)
        name = "pcg"
    bnorm = np.linalg.norm(b)
    res = float(np.linalg.norm(b - A @ x) / bnorm) if bnorm > 0 else float(np.linalg.norm(A @ x))
    values = np.zeros(system.n_dofs)
    if system.has_bc:
        values[system.free] = x
        values[system.constrained] = system.constrained_values
    else:
        values[:] = x
    return DiscreteField(values, system.dofmap, system.method, system.stab, iters, res, name)


def full_residual(system: SparseSystem, field_: DiscreteField) -> float:
    """Relative residual of ``field_`` in the constrained system ``system``."""
    x = field_.values[system.free] if system.has_bc else field_.values
    A, b = (system.matrix_ff, system.rhs_f) if system.has_bc else (system.matrix, system.rhs)
    bnorm = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return float(r / bnorm) if bnorm > 0 else float(r)
