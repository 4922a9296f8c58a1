"""Local bilinear and linear forms: weak gradients, stiffness, stabilization, loads.

Method table (family, space, stiffness operator, load, default stabilization):

================  =============  ========  =====================  ============  ===========
method            family         space     stiffness              load          stab
================  =============  ========  =====================  ============  ===========
vem-conforming    conforming     V         grad of H1 projector   Q_{k-2} f     dofi
vem-tilde         conforming     enlarged  grad of H1 projector   (f, Pi_k v)   tilde
wg-modified       conforming     W         weak grad onto grad P_k  (f, v0)     boundary
wg-original       nonconforming  W         weak grad onto grad P_k  (f, v0)     nc-boundary
nc-wg             nonconforming  W         weak grad onto P_{k-1}^2 (f, v0)     nc-boundary
nc-vem            nonconforming  V         grad of H1 projector   Q_{k-2} f     dofi
nc-vem-tilde      nonconforming  enlarged  grad of H1 projector   (f, Pi_k v)   tilde
================  =============  ========  =====================  ============  ===========

``wg-original`` is the weak Galerkin method on the original space with
discontinuous edge traces of degree k-1; ``nc-wg`` is the same space with the
larger vector-valued weak gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dofs import LocalElement, split_bases
from .poly import dim_poly
from .projectors import boundary_flux_matrix, h1_projector, moment_projector

__all__ = [
    "Method",
    "METHODS",
    "STABILIZATIONS",
    "LOADS",
    "check_compatible",
    "WeakGradientMatrix",
    "weak_gradient_modified",
    "weak_gradient_original",
    "weak_gradient",
    "local_stiffness",
    "stabilization",
    "local_load",
    "LocalForm",
    "local_form",
]


@dataclass(frozen=True)
class Method:
    name: str
    family: str
    enlarged: bool
    stiffness: str  # "projector" | "weak-modified" | "weak-original"
    load: str  # "vem" | "moment" | "wg"
    default_stab: str

    @property
    def is_wg(self) -> bool:
        return self.stiffness.startswith("weak")


METHODS = {
    m.name: m
    for m in (
        Method("vem-conforming", "conforming", False, "projector", "vem", "dofi"),
        Method("vem-tilde", "conforming", True, "projector", "moment", "tilde"),
        Method("wg-modified", "conforming", True, "weak-modified", "wg", "boundary"),
        Method("wg-original", "nonconforming", True, "weak-modified", "wg", "nc-boundary"),
        Method("nc-wg", "nonconforming", True, "weak-original", "wg", "nc-boundary"),
        Method("nc-vem", "nonconforming", False, "projector", "vem", "dofi"),
        Method("nc-vem-tilde", "nonconforming", True, "projector", "moment", "tilde"),
    )
}

STABILIZATIONS = ("dofi", "boundary", "tilde", "nc-boundary", "boundary-l2", "reduced", "none")
LOADS = ("vem", "moment", "wg", "condensed")


def get_method(method) -> Method:
    if isinstance(method, Method):
        return method
    try:
        return METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(METHODS)}") from None


def check_compatible(method, stab: str) -> None:
    """Raise ValueError for a method/stabilization pair that makes no sense."""
    m = get_method(method)
    if stab not in STABILIZATIONS:
        raise ValueError(f"unknown stabilization {stab!r}; expected one of {STABILIZATIONS}")
    need_enlarged = {"tilde", "boundary", "nc-boundary", "boundary-l2"}
    if stab in need_enlarged and not m.enlarged:
        raise ValueError(f"stabilization {stab!r} needs the enlarged space; {m.name} lives on V")
    if stab == "boundary" and m.family != "conforming":
        raise ValueError(f"stabilization 'boundary' is for the conforming family; use 'nc-boundary' with {m.name}")
    if stab == "nc-boundary" and m.family != "nonconforming":
        raise ValueError(f"stabilization 'nc-boundary' is for the non-conforming family; use 'boundary' with {m.name}")
    if stab == "reduced" and m.enlarged:
        raise ValueError(f"stabilization 'reduced' acts on V after eliminating u2; {m.name} is enlarged")


# -- weak gradients ---------------------------------------------------------


@dataclass(frozen=True)
class WeakGradientMatrix:
    """``matrix @ v`` gives coefficients of the weak gradient of the local dof vector v.

    kind "modified": coefficients on grad m_a, a >= 1 (gram = G without the constant).
    kind "original": coefficients on (m_a, 0) then (0, m_a), |a| <= k-1.
    """

    kind: str
    matrix: np.ndarray
    gram: np.ndarray

    @property
    def size(self) -> int:
        return self.gram.shape[0]

    def stiffness(self) -> np.ndarray:
        return self.matrix.T @ self.gram @ self.matrix

    def evaluate(self, el: LocalElement, v: np.ndarray, points) -> np.ndarray:
        coef = self.matrix @ v
        if self.kind == "modified":
            return np.einsum("qia,i->qa", el.basis.grad(points)[:, 1:, :], coef)
        n1 = len(coef) // 2
        vals = el.basis.eval(points)[:, :n1]
        return np.stack([vals @ coef[:n1], vals @ coef[n1:]], axis=-1)


def _require_wg_space(el: LocalElement) -> None:
    if not el.enlarged:
        raise ValueError("weak gradients act on the weak Galerkin space (cell moments up to order k)")


def _v0_pairing(el: LocalElement, coeffs: np.ndarray) -> np.ndarray:
    """Rows: ``v -> (v0, q)_K`` for polynomials q of degree <= k-2 given by monomial ``coeffs``.

    Reads the cell moments of v0 directly: ``(v0, m_s)_K = |K| chi_s(v0)``.
    """
    out = np.zeros((coeffs.shape[0], el.n_dofs))
    n_lo = coeffs.shape[1]
    out[:, el.n_boundary : el.n_boundary + n_lo] = el.area * coeffs
    return out


def _solve_gram(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if np.linalg.cond(gram) > 1e13:
        raise np.linalg.LinAlgError("weak gradient Gram matrix is numerically singular")
    return np.linalg.solve(gram, rhs)


def _derivative_matrix(el: LocalElement) -> np.ndarray:
    """``out[axis, a, s]``: d m_a / d x_axis = sum_s out[axis, a, s] m_s, |s| <= k-1."""
    exps = el.basis.exps
    n_km1 = dim_poly(el.k - 1)
    index = {tuple(e): i for i, e in enumerate(exps[:n_km1])}
    out = np.zeros((2, el.nk, n_km1))
    for a, (p, q) in enumerate(exps):
        if p:
            out[0, a, index[(p - 1, q)]] = p
        if q:
            out[1, a, index[(p, q - 1)]] = q
    return out / el.h


def weak_gradient_modified(el: LocalElement) -> WeakGradientMatrix:
    """Weak gradient in grad P_k: (grad_w v, grad p) = -(v0, lap p) + <v_b, n . grad p>."""
    _require_wg_space(el)
    rhs = boundary_flux_matrix(el) - _v0_pairing(el, el.basis.laplacian_matrix())
    gram = el.G[1:, 1:]
    return WeakGradientMatrix("modified", _solve_gram(gram, rhs[1:]), gram)


def weak_gradient_original(el: LocalElement) -> WeakGradientMatrix:
    """Weak gradient in P_{k-1}^2: (grad_w v, q) = -(v0, div q) + <v_b, n . q>."""
    _require_wg_space(el)
    n1 = dim_poly(el.k - 1)
    div = _derivative_matrix(el)[:, :n1, : dim_poly(el.k - 2)]
    rows = []
    for axis in (0, 1):
        vol = -_v0_pairing(el, div[axis])
        bd = np.zeros((n1, el.n_dofs))
        for ed in el.edges:
            mv = el.basis.eval(ed.points)[:, :n1] * ed.normal[axis]
            bd[:, ed.dofs] += (mv * ed.weights[:, None]).T @ ed.values
        rows.append(vol + bd)
    H1 = el.H[:n1, :n1]
    gram = np.block([[H1, np.zeros_like(H1)], [np.zeros_like(H1), H1]])
    return WeakGradientMatrix("original", _solve_gram(gram, np.vstack(rows)), gram)


def weak_gradient(el: LocalElement, method) -> WeakGradientMatrix:
    m = get_method(method)
    if m.stiffness == "weak-modified":
        return weak_gradient_modified(el)
    if m.stiffness == "weak-original":
        return weak_gradient_original(el)
    raise ValueError(f"{m.name} has no weak gradient")


# -- stiffness / stabilization ----------------------------------------------


def local_stiffness(el: LocalElement, method) -> np.ndarray:
    m = get_method(method)
    if m.stiffness == "projector":
        pi = h1_projector(el).pi_star
        A = pi.T @ el.G @ pi
    else:
        A = weak_gradient(el, m).stiffness()
    return 0.5 * (A + A.T)


def _residual_gram(R: np.ndarray) -> np.ndarray:
    S = R.T @ R
    return 0.5 * (S + S.T)


def condensation_blocks(el: LocalElement):
    """(D1, D2, P): boundary dofs of the u1 / u2 bases and the projection onto ker(D2^T)."""
    Phi, Psi = split_bases(el)
    Db = el.D_boundary
    D1, D2 = Db @ Phi, Db @ Psi
    P = np.eye(el.n_boundary) - D2 @ np.linalg.solve(D2.T @ D2, D2.T)
    return D1, D2, 0.5 * (P + P.T)


def stabilization(el: LocalElement, kind: str) -> np.ndarray:
    """Local stabilization matrix in dof coordinates.

    dofi         chi(v - Pi_grad v) . chi(v - Pi_grad v)
    tilde        chi(v - Pi_k v) . chi(v - Pi_k v); cell-moment rows vanish by construction
    boundary     chi_b(v_b - v0|dK) . chi_b(v_b - v0|dK)   (conforming W)
    nc-boundary  same with edge moments up to k-1           (non-conforming W)
    boundary-l2  h^-1 <v_b - Q_b v0, v_b - Q_b v0>_dK       (either W; Q_b v0 is the trace
                 of v0 rebuilt from its edge dofs)
    reduced      P-form left after eliminating u2, on V:  [P, -P D1; -D1^T P, D1^T P D1]
    none         zero
    """
    n = el.n_dofs
    if kind == "dofi":
        return _residual_gram(np.eye(n) - h1_projector(el).matrix)
    if kind == "tilde":
        pi = moment_projector(el).pi_star
        R = np.zeros((n, n))
        R[el.boundary] = np.eye(n)[el.boundary] - el.D_boundary @ pi
        return _residual_gram(R)
    if kind in ("boundary", "nc-boundary"):
        expected = "conforming" if kind == "boundary" else "nonconforming"
        if el.family != expected:
            raise ValueError(f"stabilization {kind!r} needs the {expected} family")
        C0 = el.cell_polynomial_from_moments()
        R = np.eye(n)[el.boundary] - el.D_boundary @ C0
        return _residual_gram(R)
    if kind == "boundary-l2":
        C0 = el.cell_polynomial_from_moments()
        S = np.zeros((n, n))
        D0 = el.D @ C0  # dofs of v0, so traces of v0 go through the same edge representation
        for ed in el.edges:
            diff = -ed.values @ D0[ed.dofs]
            diff[:, ed.dofs] += ed.values
            S += (diff * ed.weights[:, None]).T @ diff
        return 0.5 * (S + S.T) / el.h
    if kind == "reduced":
        if el.enlarged:
            raise ValueError("the reduced stabilization lives on V")
        D1, D2, P = condensation_blocks(el)
        R = np.hstack([P, -P @ D1])
        return _residual_gram(R)
    if kind == "none":
        return np.zeros((n, n))
    raise ValueError(f"unknown stabilization {kind!r}")


# -- loads ------------------------------------------------------------------


def _moments_of(el: LocalElement, f) -> np.ndarray:
    fv = f(el.rule.points[:, 0], el.rule.points[:, 1])
    return el.rule.integrate(np.asarray(fv)[:, None] * el.monomial_values)


def local_load(el: LocalElement, method, f, load: str | None = None) -> np.ndarray:
    """Local load vector for the method's right-hand-side treatment.

    wg         (f, v0)
    moment     (f, Pi_k v)
    vem        k >= 2: (Q_{k-2} f, v);  k = 1: (Q_0 f, mean of boundary dofs)
    condensed  WG load after eliminating u2: (D2 X, f1 - D1^T D2 X), X = (D2^T D2)^-1 f2
    """
    m = get_method(method)
    kind = load or m.load
    F = np.zeros(el.n_dofs)
    if f is None:
        return F
    b = _moments_of(el, f)
    if kind == "wg":
        return el.cell_polynomial_from_moments().T @ b
    if kind == "moment":
        return moment_projector(el).pi_star.T @ b
    if kind == "vem":
        if el.k == 1:
            F[el.boundary] = b[0] / el.n_boundary
            return F
        n_lo = dim_poly(el.k - 2)
        c = np.linalg.solve(el.H[:n_lo, :n_lo], b[:n_lo])
        F[el.n_boundary : el.n_boundary + n_lo] = el.area * c
        return F
    if kind == "condensed":
        if el.enlarged:
            raise ValueError("the condensed load lives on V")
        Phi, Psi = split_bases(el)
        D1, D2, _ = condensation_blocks(el)
        X = np.linalg.solve(D2.T @ D2, Psi.T @ b)
        F[el.boundary] = D2 @ X
        F[el.interior] = Phi.T @ b - D1.T @ (D2 @ X)
        return F
    raise ValueError(f"unknown load treatment {kind!r}")


@dataclass(frozen=True, eq=False)
class LocalForm:
    cell: int
    method: str
    stab: str
    A: np.ndarray
    S: np.ndarray
    F: np.ndarray
    element: LocalElement

    @property
    def K(self) -> np.ndarray:
        return self.A + self.S


def local_form(el: LocalElement, method, stab: str | None = None, f=None, load: str | None = None) -> LocalForm:
    m = get_method(method)
    stab = stab or m.default_stab
    check_compatible(m, stab)
    return LocalForm(el.cell, m.name, stab, local_stiffness(el, m), stabilization(el, stab),
                     local_load(el, m, f, load), el)
