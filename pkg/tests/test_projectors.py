import numpy as np
import pytest

from wgvem.dofs import LocalElement, build_global_map
from wgvem.mesh import generate_structured
from wgvem.poly import Polynomial, dim_poly
from wgvem.projectors import (
    ProjectorError,
    _guarded_solve,
    h1_projector,
    l2_cell_projection,
    l2_edge_projection,
    moment_projector,
)

SQUARE1 = generate_structured("square", 1)
CONFIGS = [(f, e) for f in ("conforming", "nonconforming") for e in (False, True)]


def elements(mesh, k, family, enlarged):
    dm = build_global_map(mesh, k, family, enlarged=enlarged)
    return [dm.element(c) for c in range(mesh.n_cells)]


@pytest.mark.parametrize("family, enlarged", CONFIGS)
@pytest.mark.parametrize("k", [1, 2, 3])
def test_h1_projector_reproduces_polynomials(meshes, family, enlarged, k):
    rng = np.random.default_rng(k)
    for mesh in meshes.values():
        for el in elements(mesh, k, family, enlarged):
            pi = h1_projector(el).pi_star
            assert np.allclose(pi @ el.D, np.eye(el.nk), atol=1e-11)
            c = rng.standard_normal(el.nk)
            assert np.allclose(pi @ el.chi(c), c, atol=1e-11 * np.abs(c).max())
            # projection: re-extracting dofs and projecting again changes nothing
            assert np.allclose(pi @ el.D @ pi, pi, atol=1e-10 * np.abs(pi).max())


def test_h1_projector_of_constant_dofs():
    el = LocalElement(generate_structured("hexagon-dominant", 2), 3, 2, "conforming", 0)
    v = np.zeros(el.n_dofs)
    v[: el.nv] = 2.5
    v[el.nv : el.n_boundary : el.ne_dofs] = 2.5  # zeroth edge moments
    v[el.interior.start] = 2.5
    out = h1_projector(el).pi_star @ v
    assert out[0] == pytest.approx(2.5) and np.allclose(out[1:], 0.0, atol=1e-13)


def test_h1_projector_hat_function_unit_square():
    """Independent 3x3 system in the unscaled basis {1, x, y} from analytic integrals."""
    el = LocalElement(SQUARE1, 0, 1, "conforming", -1)
    v = np.array([1.0, 0.0, 0.0, 0.0])  # vertex (0, 0)
    # (grad p, grad q) for p, q in {x, y} is the identity; boundary terms int v n ds:
    # v is the hat trace, integral 1/2 on the bottom (n = (0,-1)) and left (n = (-1,0)) edges
    A = np.array([[1.0, 0.5, 0.5],  # vertex average of 1, x, y
                  [0.0, 1.0, 0.0],
                  [0.0, 0.0, 1.0]])
    b = np.array([0.25, -0.5, -0.5])
    a0, ax, ay = np.linalg.solve(A, b)
    pts = np.random.default_rng(0).uniform(size=(5, 2))
    ref = a0 + ax * pts[:, 0] + ay * pts[:, 1]
    got = el.basis.eval(pts) @ (h1_projector(el).pi_star @ v)
    assert np.allclose(got, ref, atol=1e-14)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_energy_orthogonality_nonconforming(k):
    """For q in P_{k+1} the edge pairing is exact, so Pi is the true H1 projection."""
    mesh = generate_structured("hexagon-dominant", 3)
    q = Polynomial.random(k + 1, seed=k)
    gq = q.gradient()
    for el in elements(mesh, k, "nonconforming", False):
        c = h1_projector(el).pi_star @ el.interpolate(q, edge_degree=2 * k + 6)
        pts, w = el.rule.points, el.rule.weights
        gp = np.einsum("qia,i->qa", el.basis.grad(pts), c)
        inner = np.sum(w * np.sum(gp * (gq(*pts.T) - gp), axis=1))
        assert abs(inner) < 1e-11 * max(1.0, np.sum(w * np.sum(gp * gp, axis=1)))


@pytest.mark.parametrize("family", ["conforming", "nonconforming"])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_moment_projector(meshes, family, k):
    rng = np.random.default_rng(7)
    for el in elements(meshes["perturbed-square"], k, family, True):
        proj = moment_projector(el)
        assert np.allclose(proj.pi_star @ el.D, np.eye(el.nk), atol=1e-10)
        v = rng.standard_normal(el.n_dofs)
        v[el.interior] = 0.0
        assert np.allclose(proj.pi_star @ v, 0.0)
        # the moment projector of a weak function {u0, ub} returns u0
        u0 = rng.standard_normal(el.nk)
        w = rng.standard_normal(el.n_dofs)
        w[el.interior] = el.chi(u0)[el.interior]
        assert np.allclose(proj.pi_star @ w, u0, atol=1e-9)
        # (I - Pi_k)(I - Pi_grad) = (I - Pi_k) in dof coordinates
        I = np.eye(el.n_dofs)
        lhs = (I - proj.matrix) @ (I - h1_projector(el).matrix)
        assert np.allclose(lhs, I - proj.matrix, atol=1e-9 * np.abs(proj.matrix).max())


def test_moment_projector_needs_enlarged_space():
    el = LocalElement(SQUARE1, 0, 2, "conforming", 0)
    with pytest.raises(ValueError):
        moment_projector(el)


def test_l2_cell_projection_preserves_polynomials():
    el = LocalElement(generate_structured("hexagon-dominant", 2), 2, 3, "conforming", 3)
    c = np.random.default_rng(1).standard_normal(el.nk)

    def p(x, y):
        return el.basis.eval(np.column_stack([np.ravel(x), np.ravel(y)])) @ c

    assert np.allclose(l2_cell_projection(el, p, 3), c, atol=1e-12)


def test_l2_mean_of_sinsin():
    el = LocalElement(SQUARE1, 0, 1, "conforming", 1, quad_degree=30)
    c = l2_cell_projection(el, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), 0)
    assert abs(c[0] - 4 / np.pi**2) < 1e-13


def test_l2_edge_projection_of_linear_trace():
    start, end = np.array([0.2, 0.1]), np.array([0.7, 0.5])
    c = l2_edge_projection(start, end, lambda x, y: x, 2)
    # x(t) = midpoint_x + t * dx for t in [-1/2, 1/2]
    assert np.allclose(c, [0.45, 0.5, 0.0], atol=1e-15)


def test_guarded_solve_rejects_singular():
    with pytest.raises(ProjectorError):
        _guarded_solve(np.ones((3, 3)), np.eye(3), "test")


def test_projector_sizes():
    el = LocalElement(SQUARE1, 0, 2, "conforming", 0)
    proj = h1_projector(el)
    assert proj.pi_star.shape == (dim_poly(2), 9) and proj.matrix.shape == (9, 9)
