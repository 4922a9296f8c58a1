"""Scaled monomials on cells and edges, and quadrature on edges and polygons.

Cell monomials are ``m_s(x) = ((x - x_c) / h)^s`` for exponent pairs ``s`` in
graded lexicographic order::

    (0,0) | (1,0) (0,1) | (2,0) (1,1) (0,2) | ...

so the first ``dim_poly(l)`` entries of any basis span P_l. Edge monomials are
powers of ``t = (s - |e|/2) / |e|`` where ``s`` is arclength from the canonical
start vertex, i.e. ``t`` runs over [-1/2, 1/2].
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import MeshError, cell_geometry

__all__ = [
    "dim_poly",
    "exponents",
    "ScaledMonomialBasis",
    "QuadratureRule",
    "edge_quadrature",
    "unit_interval_rule",
    "triangle_quadrature",
    "polygon_quadrature",
    "monomial_mass_matrix",
    "monomial_stiffness_matrix",
    "edge_monomial_integrals",
    "Polynomial",
]


def dim_poly(degree: int) -> int:
    """dim P_degree in 2D; zero for negative degree."""
    return 0 if degree < 0 else (degree + 1) * (degree + 2) // 2


@lru_cache(maxsize=None)
def exponents(degree: int) -> np.ndarray:
    exps = [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]
    out = np.array(exps, dtype=np.int64).reshape(-1, 2)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ScaledMonomialBasis:
    center: np.ndarray
    scale: float
    degree: int

    @property
    def exps(self) -> np.ndarray:
        return exponents(self.degree)

    @property
    def size(self) -> int:
        return dim_poly(self.degree)

    def _scaled(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts - self.center) / self.scale

    def eval(self, points) -> np.ndarray:
        """Values, shape (npoints, size)."""
        z = self._scaled(points)
        e = self.exps
        return z[:, None, 0] ** e[None, :, 0] * z[:, None, 1] ** e[None, :, 1]

    def grad(self, points) -> np.ndarray:
        """Gradients, shape (npoints, size, 2)."""
        z = self._scaled(points)
        a, b = self.exps[:, 0], self.exps[:, 1]
        zx, zy = z[:, None, 0], z[:, None, 1]
        gx = a * zx ** np.maximum(a - 1, 0) * zy**b
        gy = b * zx**a * zy ** np.maximum(b - 1, 0)
        return np.stack([gx, gy], axis=-1) / self.scale

    def laplacian(self, points) -> np.ndarray:
        z = self._scaled(points)
        a, b = self.exps[:, 0], self.exps[:, 1]
        zx, zy = z[:, None, 0], z[:, None, 1]
        lx = a * (a - 1) * zx ** np.maximum(a - 2, 0) * zy**b
        ly = b * (b - 1) * zx**a * zy ** np.maximum(b - 2, 0)
        return (lx + ly) / self.scale**2

    def laplacian_matrix(self) -> np.ndarray:
        """L with ``Lap m_s = sum_t L[s, t] m_t`` over the degree-(k-2) basis."""
        k = self.degree
        L = np.zeros((self.size, dim_poly(k - 2)))
        index = {tuple(e): i for i, e in enumerate(exponents(max(k - 2, 0)))}
        for s, (a, b) in enumerate(self.exps):
            if a >= 2:
                L[s, index[(a - 2, b)]] += a * (a - 1)
            if b >= 2:
                L[s, index[(a, b - 2)]] += b * (b - 1)
        return L / self.scale**2


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values) -> np.ndarray:
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


@lru_cache(maxsize=None)
def _gauss_legendre(npts: int):
    x, w = np.polynomial.legendre.leggauss(npts)
    return x, w


def unit_interval_rule(degree: int) -> QuadratureRule:
    """Gauss-Legendre on t in [-1/2, 1/2] (weights sum to 1)."""
    npts = max(1, -(-(degree + 1) // 2))
    x, w = _gauss_legendre(npts)
    return QuadratureRule(0.5 * x, 0.5 * w, 2 * npts - 1)


def edge_quadrature(degree: int, length: float = 1.0) -> QuadratureRule:
    """Gauss-Legendre rule in arclength on [0, length], exact to ``degree``."""
    if degree < 0:
        raise ValueError("exactness degree must be non-negative")
    ref = unit_interval_rule(degree)
    return QuadratureRule((ref.points + 0.5) * length, ref.weights * length, ref.degree)


@lru_cache(maxsize=None)
def _reference_triangle(degree: int):
    # collapsed (Duffy) tensor Gauss rule on the triangle (0,0),(1,0),(0,1)
    n = (degree + 3) // 2
    x, w = _gauss_legendre(n)
    u, wu = 0.5 * (x + 1.0), 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    px = U.ravel()
    py = (V * (1.0 - U)).ravel()
    wts = (WU * WV * (1.0 - U)).ravel()
    return np.column_stack([px, py]), wts


def triangle_quadrature(a, b, c, degree: int) -> QuadratureRule:
    ref_pts, ref_w = _reference_triangle(degree)
    a, b, c = (np.asarray(p, dtype=float) for p in (a, b, c))
    J = np.column_stack([b - a, c - a])
    det = float(np.linalg.det(J))
    return QuadratureRule(a + ref_pts @ J.T, ref_w * abs(det), degree)


def polygon_quadrature(points, degree: int, center=None) -> QuadratureRule:
    """Fan-triangulate from the centroid and put a degree-exact rule on each triangle.

    Raises MeshError if the cell is not star-shaped with respect to its centroid.
    """
    points = np.asarray(points, dtype=float)
    if center is None:
        center = cell_geometry(points).centroid
    ref_pts, ref_w = _reference_triangle(degree)
    m = len(points)
    all_pts, all_w = [], []
    for i in range(m):
        a, b = points[i], points[(i + 1) % m]
        J = np.column_stack([a - center, b - center])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if det <= 1e-14 * np.sum((b - a) ** 2):
            raise MeshError("cell is not star-shaped with respect to its centroid")
        all_pts.append(center + ref_pts @ J.T)
        all_w.append(ref_w * det)
    return QuadratureRule(np.vstack(all_pts), np.concatenate(all_w), degree)


def monomial_mass_matrix(basis: ScaledMonomialBasis, rule: QuadratureRule) -> np.ndarray:
    """H_ij = (m_i, m_j)_K."""
    vals = basis.eval(rule.points)
    return (vals * rule.weights[:, None]).T @ vals


def monomial_stiffness_matrix(basis: ScaledMonomialBasis, rule: QuadratureRule) -> np.ndarray:
    """G_ij = (grad m_i, grad m_j)_K."""
    g = basis.grad(rule.points)
    gw = g * rule.weights[:, None, None]
    return np.einsum("qia,qja->ij", gw, g)


@lru_cache(maxsize=None)
def edge_monomial_integrals(n: int) -> np.ndarray:
    """``I[i] = integral of t^i over [-1/2, 1/2]`` for i < n."""
    i = np.arange(n)
    out = np.where(i % 2 == 0, 2.0 * 0.5 ** (i + 1) / (i + 1), 0.0)
    out.setflags(write=False)
    return out


class Polynomial:
    """A polynomial in plain monomials ``x^a y^b`` (global, unscaled coordinates)."""

    def __init__(self, coeffs: dict[tuple[int, int], float]):
        self.coeffs = {tuple(map(int, k)): float(v) for k, v in coeffs.items() if v != 0.0}

    @classmethod
    def random(cls, degree: int, seed: int = 0) -> "Polynomial":
        rng = np.random.default_rng(seed)
        return cls({tuple(e): rng.uniform(-1.0, 1.0) for e in exponents(degree)})

    @property
    def degree(self) -> int:
        return max((a + b for a, b in self.coeffs), default=0)

    def __call__(self, x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for (a, b), c in self.coeffs.items():
            out = out + c * x**a * y**b
        return out

    def derivative(self, axis: int) -> "Polynomial":
        out: dict[tuple[int, int], float] = {}
        for (a, b), c in self.coeffs.items():
            p = (a, b)[axis]
            if p == 0:
                continue
            key = (a - 1, b) if axis == 0 else (a, b - 1)
            out[key] = out.get(key, 0.0) + c * p
        return Polynomial(out)

    def laplacian(self) -> "Polynomial":
        dxx = self.derivative(0).derivative(0)
        dyy = self.derivative(1).derivative(1)
        out = dict(dxx.coeffs)
        for k, v in dyy.coeffs.items():
            out[k] = out.get(k, 0.0) + v
        return Polynomial(out)

    def __neg__(self) -> "Polynomial":
        return Polynomial({k: -v for k, v in self.coeffs.items()})

    def gradient(self):
        dx, dy = self.derivative(0), self.derivative(1)

        def grad(x, y):
            return np.stack([dx(x, y), dy(x, y)], axis=-1)

        return grad
