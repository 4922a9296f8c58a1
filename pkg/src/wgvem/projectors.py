"""Local projection operators, materialized as small dense matrices.

A projector is stored as ``pi_star`` mapping a local dof vector to scaled
monomial coefficients of a P_k polynomial; ``matrix = D @ pi_star`` is the same
operator in dof coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dofs import LocalElement
from .poly import dim_poly, unit_interval_rule

__all__ = [
    "ProjectorError",
    "LocalProjector",
    "boundary_flux_matrix",
    "h1_projector",
    "moment_projector",
    "l2_cell_projection",
    "l2_edge_projection",
]

_COND_LIMIT = 1e13


class ProjectorError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class LocalProjector:
    cell: int
    kind: str
    pi_star: np.ndarray
    matrix: np.ndarray


def _guarded_solve(A: np.ndarray, B: np.ndarray, what: str) -> np.ndarray:
    if np.linalg.cond(A) > _COND_LIMIT:
        raise ProjectorError(f"{what}: local system is numerically singular")
    return np.linalg.solve(A, B)


def boundary_flux_matrix(el: LocalElement) -> np.ndarray:
    """Rows ``a``: the dof functional ``v -> <v, n . grad m_a>_{dK}``."""
    out = np.zeros((el.nk, el.n_dofs))
    for ed in el.edges:
        gn = el.basis.grad(ed.points) @ ed.normal
        out[:, ed.dofs] += (gn * ed.weights[:, None]).T @ ed.values
    return out


def h1_projector(el: LocalElement) -> LocalProjector:
    """Energy projection onto P_k computed from dofs alone.

    Rows a >= 1 solve ``(grad P v, grad m_a) = -(v, lap m_a) + <v, n . grad m_a>``;
    the volume term reads the cell moments of order <= k-2. The constant is fixed
    by requiring the dof average of ``P v`` to equal the dof average of ``v``.
    """
    k, n = el.k, el.n_dofs
    if el.cell_degree < k - 2:
        raise ValueError("the H1 projector needs cell moments up to order k-2")
    B = boundary_flux_matrix(el)
    L = el.basis.laplacian_matrix()  # (nk, dim P_{k-2})
    n_lo = dim_poly(k - 2)
    if n_lo:
        lo = slice(el.n_boundary, el.n_boundary + n_lo)
        B[:, lo] -= el.area * L
    B[0] = 1.0 / n
    G = el.G.copy()
    G[0] = el.D.mean(axis=0)
    pi = _guarded_solve(G, B, "H1 projector")
    return LocalProjector(el.cell, "h1", pi, el.D @ pi)


def moment_projector(el: LocalElement) -> LocalProjector:
    """P_k polynomial sharing all cell moments of order <= k (enlarged space only)."""
    if not el.enlarged:
        raise ValueError("the moment projector is defined on the enlarged space only")
    sel = np.zeros((el.nk, el.n_dofs))
    sel[:, el.interior] = el.area * np.eye(el.nk)
    pi = _guarded_solve(el.H, sel, "moment projector")
    return LocalProjector(el.cell, "moment", pi, el.D @ pi)


def l2_cell_projection(el: LocalElement, func, degree: int) -> np.ndarray:
    """Coefficients (first ``dim P_degree`` scaled monomials) of the L2(K) projection."""
    n = dim_poly(degree)
    f = func(el.rule.points[:, 0], el.rule.points[:, 1])
    b = el.rule.integrate(f[:, None] * el.monomial_values[:, :n])
    return np.linalg.solve(el.H[:n, :n], b)


def l2_edge_projection(start, end, func, degree: int, quad_degree: int | None = None) -> np.ndarray:
    """Coefficients in powers of the edge parameter t of the L2(e) projection onto P_degree."""
    start, end = np.asarray(start, float), np.asarray(end, float)
    rule = unit_interval_rule(2 * degree + 4 if quad_degree is None else quad_degree)
    pts = start + (rule.points[:, None] + 0.5) * (end - start)
    g = func(pts[:, 0], pts[:, 1])
    V = rule.points[:, None] ** np.arange(degree + 1)[None, :]
    M = (V * rule.weights[:, None]).T @ V
    return np.linalg.solve(M, (V * rule.weights[:, None]).T @ g)
