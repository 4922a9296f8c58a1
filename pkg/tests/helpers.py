import numpy as np

from wgvem.mesh import build_topology


def regular_polygon(m, radius=1.0, center=(0.0, 0.0), phase=0.0):
    t = phase + 2 * np.pi * np.arange(m) / m
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def single_cell(points):
    pts = np.asarray(points, float)
    return build_topology(pts, [list(range(len(pts)))])


def random_star_polygon(rng, m=None):
    """Random polygon star-shaped about its centroid: sorted angles, jittered radii."""
    m = m or int(rng.integers(3, 10))
    while True:
        t = np.sort(rng.uniform(0, 2 * np.pi, m))
        if np.min(np.diff(np.r_[t, t[0] + 2 * np.pi])) < 0.2:
            continue
        r = rng.uniform(0.6, 1.0, m)
        pts = np.column_stack([r * np.cos(t), r * np.sin(t)]) * rng.uniform(0.1, 2.0) + rng.uniform(-1, 1, 2)
        try:
            return single_cell(pts)
        except ValueError:
            continue


def green_residual(mesh, c, degree=3):
    """Max relative residual of (grad m_i, grad m_j) = -(m_i, lap m_j) + <m_i, grad m_j . n>."""
    from wgvem.poly import ScaledMonomialBasis, edge_quadrature, polygon_quadrature

    pts = mesh.cell_points(c)
    g = mesh.geometry(c)
    basis = ScaledMonomialBasis(g.centroid, g.diameter, degree)
    rule = polygon_quadrature(pts, 2 * degree, g.centroid)
    V, dV, L = basis.eval(rule.points), basis.grad(rule.points), basis.laplacian(rule.points)
    lhs = np.einsum("q,qia,qja->ij", rule.weights, dV, dV)
    rhs = -np.einsum("q,qi,qj->ij", rule.weights, V, L)
    for a, b in zip(pts, np.roll(pts, -1, axis=0)):
        d = b - a
        length = np.hypot(*d)
        n = np.array([d[1], -d[0]]) / length
        er = edge_quadrature(2 * degree, length)
        q = a + er.points[:, None] / length * d
        rhs += np.einsum("q,qi,qj->ij", er.weights, basis.eval(q), basis.grad(q) @ n)
    return np.abs(lhs - rhs).max() / np.abs(lhs).max()
