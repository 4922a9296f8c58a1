"""Degrees of freedom for the conforming and non-conforming space families.

Local dof order on a cell: vertex values (cell traversal order), then edge
moments (local edge ``i`` runs from vertex ``i`` to ``i + 1``; increasing moment
order), then cell moments (graded lexicographic). The non-conforming family has
no vertex dofs. ``cell_degree`` selects the space: ``k - 2`` for V, ``k`` for the
enlarged space (identified with the weak Galerkin space W), ``-1`` for a
skeleton-only space after full static condensation.

Moment functionals are scaled: ``|e|^-1 (t^j, v)_e`` and ``|K|^-1 (m_s, v)_K``.
Vertex dofs are plain point values.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mesh import PolygonMesh, cell_geometry
from .poly import (
    ScaledMonomialBasis,
    dim_poly,
    edge_monomial_integrals,
    monomial_mass_matrix,
    monomial_stiffness_matrix,
    polygon_quadrature,
    unit_interval_rule,
)

__all__ = [
    "FAMILIES",
    "DofDescriptor",
    "DofMap",
    "LocalElement",
    "cell_moment_degree",
    "edge_moment_count",
    "local_dofs",
    "chi_of_polynomial",
    "build_global_map",
    "interpolate",
    "split_bases",
]

FAMILIES = ("conforming", "nonconforming")


def cell_moment_degree(k: int, enlarged: bool) -> int:
    return k if enlarged else k - 2


def edge_moment_count(k: int, family: str) -> int:
    if family == "conforming":
        return k - 1
    if family == "nonconforming":
        return k
    raise ValueError(f"unknown family {family!r}")


def _check(k: int, family: str) -> None:
    if k < 1:
        raise ValueError(f"polynomial degree must be >= 1, got {k}")
    edge_moment_count(k, family)


@dataclass(frozen=True)
class DofDescriptor:
    kind: str  # "vertex" | "edge" | "cell"
    entity: int
    index: int = 0  # edge moment order, or cell monomial index


def local_dofs(mesh: PolygonMesh, c: int, k: int, family: str, enlarged: bool = False,
               cell_degree: int | None = None) -> list[DofDescriptor]:
    _check(k, family)
    if cell_degree is None:
        cell_degree = cell_moment_degree(k, enlarged)
    out = []
    if family == "conforming":
        out += [DofDescriptor("vertex", int(v)) for v in mesh.cells[c]]
    for e in mesh.cell_edges[c]:
        out += [DofDescriptor("edge", int(e), j) for j in range(edge_moment_count(k, family))]
    out += [DofDescriptor("cell", c, s) for s in range(dim_poly(cell_degree))]
    return out


@dataclass(frozen=True)
class EdgeData:
    edge: int
    length: float
    normal: np.ndarray  # outward for this cell
    start: np.ndarray  # canonical start point (lower global vertex index)
    end: np.ndarray
    t: np.ndarray  # quadrature parameters in [-1/2, 1/2]
    points: np.ndarray
    weights: np.ndarray  # arclength weights (sum to length)
    dofs: np.ndarray  # local dof indices feeding the trace representative
    rep: np.ndarray  # dof values -> coefficients of the trace in powers of t
    values: np.ndarray  # trace values at the quadrature points per dof: (nq, ndofs_edge)


class LocalElement:
    """Everything computable on one cell for a given (k, family, cell_degree).

    ``D`` is the dof-of-monomial matrix: ``D[i, a] = chi_i(m_a)`` over the
    degree-k scaled monomials. Traces on edges are represented by polynomials
    in ``t`` determined by the edge dofs: for the conforming family the P_k
    polynomial matching both endpoint values and the moments of order <= k-2,
    for the non-conforming family the P_{k-1} polynomial matching the moments
    of order <= k-1. In both cases pairing the representative with P_{k-1}
    data on the edge is exact for any function carrying those dofs.
    """

    def __init__(self, mesh: PolygonMesh, c: int, k: int, family: str, cell_degree: int,
                 quad_degree: int | None = None):
        _check(k, family)
        self.mesh, self.cell, self.k, self.family = mesh, c, k, family
        self.cell_degree = cell_degree
        self.points = mesh.cell_points(c)
        self.geometry = cell_geometry(self.points)
        self.area = self.geometry.area
        self.h = self.geometry.diameter
        self.basis = ScaledMonomialBasis(self.geometry.centroid, self.h, k)
        self.nk = self.basis.size
        self.quad_degree = 2 * k + 2 if quad_degree is None else quad_degree
        self.rule = polygon_quadrature(self.points, self.quad_degree, self.geometry.centroid)
        self.nv = len(self.points) if family == "conforming" else 0
        self.ne_dofs = edge_moment_count(k, family)
        self.n_boundary = self.nv + len(self.points) * self.ne_dofs
        self.n_cell = dim_poly(cell_degree)
        self.n_dofs = self.n_boundary + self.n_cell
        self.boundary = slice(0, self.n_boundary)
        self.interior = slice(self.n_boundary, self.n_dofs)

    @property
    def enlarged(self) -> bool:
        return self.cell_degree >= self.k

    # -- geometry / integrals ------------------------------------------------

    @cached_property
    def H(self) -> np.ndarray:
        return monomial_mass_matrix(self.basis, self.rule)

    @cached_property
    def G(self) -> np.ndarray:
        return monomial_stiffness_matrix(self.basis, self.rule)

    @cached_property
    def monomial_values(self) -> np.ndarray:
        return self.basis.eval(self.rule.points)

    @cached_property
    def edges(self) -> list[EdgeData]:
        k, m = self.k, len(self.points)
        cell = self.mesh.cells[self.cell]
        qrule = unit_interval_rule(2 * k + 1)
        n_rep = k + 1 if self.family == "conforming" else k
        M = self._rep_system()
        R = np.linalg.inv(M)
        Vt = qrule.points[:, None] ** np.arange(n_rep)[None, :]
        out = []
        for i in range(m):
            ia, ib = i, (i + 1) % m
            a, b = self.points[ia], self.points[ib]
            forward = cell[ia] < cell[ib]
            start, end = (a, b) if forward else (b, a)
            d = b - a
            length = float(np.hypot(*d))
            normal = np.array([d[1], -d[0]]) / length
            moments = self.nv + i * self.ne_dofs + np.arange(self.ne_dofs)
            if self.family == "conforming":
                ends = [ia, ib] if forward else [ib, ia]
                dofs = np.concatenate([ends, moments]).astype(np.int64)
            else:
                dofs = moments.astype(np.int64)
            pts = start + (qrule.points[:, None] + 0.5) * (end - start)
            out.append(EdgeData(int(self.mesh.cell_edges[self.cell][i]), length, normal, start, end,
                                qrule.points, pts, qrule.weights * length, dofs, R, Vt @ R))
        return out

    def _rep_system(self) -> np.ndarray:
        k = self.k
        if self.family == "conforming":
            n = k + 1
            I = edge_monomial_integrals(2 * n)
            M = np.zeros((n, n))
            M[0] = (-0.5) ** np.arange(n)
            M[1] = 0.5 ** np.arange(n)
            for j in range(k - 1):
                M[2 + j] = I[j : j + n]
            return M
        I = edge_monomial_integrals(2 * k)
        return np.array([I[j : j + k] for j in range(k)])

    # -- dof functionals -----------------------------------------------------

    @cached_property
    def D(self) -> np.ndarray:
        """chi_i(m_a) for all local dofs i and degree-k monomials a."""
        D = np.zeros((self.n_dofs, self.nk))
        if self.nv:
            D[: self.nv] = self.basis.eval(self.points)
        for i, ed in enumerate(self.edges):
            vals = self.basis.eval(ed.points)  # (nq, nk)
            tw = ed.t[:, None] ** np.arange(self.ne_dofs)[None, :] * (ed.weights / ed.length)[:, None]
            row = self.nv + i * self.ne_dofs
            D[row : row + self.ne_dofs] = tw.T @ vals
        D[self.interior] = self.H[: self.n_cell] / self.area
        return D

    @property
    def D_boundary(self) -> np.ndarray:
        return self.D[self.boundary]

    def chi(self, coeffs) -> np.ndarray:
        return self.D @ np.asarray(coeffs, dtype=float)

    def interpolate(self, func, edge_degree: int | None = None) -> np.ndarray:
        """Apply every local dof functional to a callable ``func(x, y)``."""
        out = np.zeros(self.n_dofs)
        if self.nv:
            out[: self.nv] = func(self.points[:, 0], self.points[:, 1])
        qrule = unit_interval_rule(2 * self.k + 4 if edge_degree is None else edge_degree)
        for i, ed in enumerate(self.edges):
            pts = ed.start + (qrule.points[:, None] + 0.5) * (ed.end - ed.start)
            g = func(pts[:, 0], pts[:, 1])
            row = self.nv + i * self.ne_dofs
            powers = qrule.points[:, None] ** np.arange(self.ne_dofs)[None, :]
            out[row : row + self.ne_dofs] = (powers * qrule.weights[:, None]).T @ g
        if self.n_cell:
            f = func(self.rule.points[:, 0], self.rule.points[:, 1])
            vals = self.basis.eval(self.rule.points)[:, : self.n_cell]
            out[self.interior] = self.rule.integrate(f[:, None] * vals) / self.area
        return out

    def cell_polynomial_from_moments(self) -> np.ndarray:
        """C0 with ``C0 @ v`` = monomial coefficients of the P_k function whose
        cell moments of order <= k are the interior dofs of ``v`` (enlarged only)."""
        if not self.enlarged:
            raise ValueError("cell moments up to order k are only present on the enlarged space")
        C0 = np.zeros((self.nk, self.n_dofs))
        C0[:, self.interior] = self.area * np.linalg.inv(self.H)
        return C0

    def to_scaled(self, func) -> np.ndarray:
        """Scaled-monomial coefficients of the L2(K) projection of ``func`` onto P_k."""
        f = func(self.rule.points[:, 0], self.rule.points[:, 1])
        b = self.rule.integrate(f[:, None] * self.monomial_values)
        return np.linalg.solve(self.H, b)


def chi_of_polynomial(element: LocalElement, coeffs) -> np.ndarray:
    return element.chi(coeffs)


@dataclass(frozen=True, eq=False)
class DofMap:
    mesh: PolygonMesh
    k: int
    family: str
    cell_degree: int
    n_dofs: int
    descriptors: tuple
    local_to_global: tuple
    boundary: np.ndarray
    edge_offset: int
    cell_offset: int

    @property
    def enlarged(self) -> bool:
        return self.cell_degree >= self.k

    @property
    def per_edge(self) -> int:
        return edge_moment_count(self.k, self.family)

    @property
    def per_cell(self) -> int:
        return dim_poly(self.cell_degree)

    def index(self, desc: DofDescriptor) -> int:
        if desc.kind == "vertex":
            if self.family != "conforming":
                raise KeyError("non-conforming family has no vertex dofs")
            return desc.entity
        if desc.kind == "edge":
            if desc.index >= self.per_edge:
                raise KeyError(desc)
            return self.edge_offset + desc.entity * self.per_edge + desc.index
        if desc.index >= self.per_cell:
            raise KeyError(desc)
        return self.cell_offset + desc.entity * self.per_cell + desc.index

    def element(self, c: int, **kwargs) -> LocalElement:
        return LocalElement(self.mesh, c, self.k, self.family, self.cell_degree, **kwargs)


def build_global_map(mesh: PolygonMesh, k: int, family: str, enlarged: bool = False,
                     cell_degree: int | None = None) -> DofMap:
    """Global numbering: vertices, then edges (edge-major), then cells (cell-major)."""
    _check(k, family)
    if cell_degree is None:
        cell_degree = cell_moment_degree(k, enlarged)
    nv = mesh.n_vertices if family == "conforming" else 0
    per_edge = edge_moment_count(k, family)
    per_cell = dim_poly(cell_degree)
    edge_offset = nv
    cell_offset = nv + mesh.n_edges * per_edge
    n = cell_offset + mesh.n_cells * per_cell

    descriptors = [DofDescriptor("vertex", v) for v in range(nv)]
    descriptors += [DofDescriptor("edge", e, j) for e in range(mesh.n_edges) for j in range(per_edge)]
    descriptors += [DofDescriptor("cell", c, s) for c in range(mesh.n_cells) for s in range(per_cell)]

    l2g = []
    for c in range(mesh.n_cells):
        parts = []
        if nv:
            parts.append(np.asarray(mesh.cells[c]))
        for e in mesh.cell_edges[c]:
            parts.append(edge_offset + e * per_edge + np.arange(per_edge))
        parts.append(cell_offset + c * per_cell + np.arange(per_cell))
        idx = np.concatenate(parts).astype(np.int64)
        idx.setflags(write=False)
        l2g.append(idx)

    boundary = np.zeros(n, dtype=bool)
    if nv:
        boundary[:nv] = mesh.boundary_vertices
    for e in np.flatnonzero(mesh.boundary_edges):
        boundary[edge_offset + e * per_edge : edge_offset + (e + 1) * per_edge] = True
    boundary.setflags(write=False)
    return DofMap(mesh, k, family, cell_degree, n, tuple(descriptors), tuple(l2g), boundary,
                  edge_offset, cell_offset)


def interpolate(dofmap: DofMap, func, elements=None) -> np.ndarray:
    """Global dof vector of a callable; shared dofs are computed identically from each cell."""
    out = np.zeros(dofmap.n_dofs)
    for c in range(dofmap.mesh.n_cells):
        el = elements[c] if elements is not None else dofmap.element(c)
        out[dofmap.local_to_global[c]] = el.interpolate(func)
    return out


def split_bases(el: LocalElement) -> tuple[np.ndarray, np.ndarray]:
    """Bases for the split ``u0 = u1 + u2`` of an interior polynomial in P_k.

    Returns scaled-monomial coefficient matrices ``(Phi, Psi)``. Columns of
    ``Phi`` span P_{k-2} and are dual to the cell moments of order <= k-2, so
    ``u1 = Phi @ mu_lo``. Columns of ``Psi`` span the polynomials of P_k whose
    cell moments up to order k-2 vanish: the degree k-1 and k monomials made
    mass-orthogonal to P_{k-2}.
    """
    nk, n_lo = el.nk, dim_poly(el.k - 2)
    H = el.H
    Phi = np.zeros((nk, n_lo))
    Psi = np.zeros((nk, nk - n_lo))
    Psi[n_lo:] = np.eye(nk - n_lo)
    if n_lo:
        H_lo = H[:n_lo, :n_lo]
        Phi[:n_lo] = el.area * np.linalg.inv(H_lo)
        Psi[:n_lo] = -np.linalg.solve(H_lo, H[:n_lo, n_lo:])
    return Phi, Psi
