import numpy as np
import pytest

from wgvem.mesh import (
    MESH_KINDS,
    MeshError,
    build_topology,
    cell_geometry,
    generate_structured,
    read_mesh,
    write_mesh,
)

from helpers import regular_polygon


def test_square_2_counts():
    m = generate_structured("square", 2)
    assert (m.n_vertices, m.n_cells, m.n_edges) == (9, 4, 12)
    assert m.boundary_edges.sum() == 8
    assert (~m.boundary_edges).sum() == 4


def test_square_1_geometry():
    m = generate_structured("square", 1)
    g = m.geometry(0)
    assert g.area == pytest.approx(1.0)
    assert np.allclose(g.centroid, [0.5, 0.5])
    assert g.diameter == pytest.approx(np.sqrt(2))


def test_reference_triangle_geometry():
    g = cell_geometry(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    assert g.area == pytest.approx(0.5)
    assert np.allclose(g.centroid, [1 / 3, 1 / 3])
    assert g.diameter == pytest.approx(np.sqrt(2))


def test_regular_hexagon_area():
    g = cell_geometry(regular_polygon(6))
    assert abs(g.area - 3 * np.sqrt(3) / 2) < 1e-12


@pytest.mark.parametrize("kind", MESH_KINDS)
@pytest.mark.parametrize("n", [1, 3, 4, 8])
def test_generated_meshes_tile_domain(kind, n):
    m = generate_structured(kind, n, seed=3)
    area = 0.75 if kind == "lshape" else 1.0
    assert abs(m.total_area() - area) <= 1e-12 * area
    for c in range(m.n_cells):
        g = m.geometry(c)
        pts = m.cell_points(c)
        assert g.area > 0
        assert np.all(g.centroid >= pts.min(axis=0)) and np.all(g.centroid <= pts.max(axis=0))
        edges = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        assert g.diameter >= edges.max() - 1e-15


def test_hexagon_dominant_area_sum_shoelace():
    m = generate_structured("hexagon-dominant", 4)
    total = 0.0
    for cell in m.cells:
        x, y = m.vertices[cell].T
        total += 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    assert abs(total - 1.0) < 1e-12
    assert max(len(c) for c in m.cells) == 6


def test_interior_edges_traversed_oppositely():
    m = generate_structured("hexagon-dominant", 5)
    for e, (a, b) in enumerate(m.edges):
        assert a < b
        c0, c1 = m.edge_cells[e]
        if c1 < 0:
            continue
        dirs = []
        for c in (c0, c1):
            cell = list(m.cells[c])
            i = cell.index(a)
            dirs.append(cell[(i + 1) % len(cell)] == b)
        assert dirs[0] != dirs[1]


def test_topology_is_order_independent():
    m = generate_structured("perturbed-square", 4, seed=1)
    perm = np.random.default_rng(0).permutation(m.n_cells)
    m2 = build_topology(m.vertices, [m.cells[c] for c in perm])
    assert {tuple(e) for e in m.edges} == {tuple(e) for e in m2.edges}
    assert np.array_equal(m.edges, m2.edges)


def test_single_triangle_topology():
    m = build_topology([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    assert m.n_edges == 3 and m.boundary_edges.all()


def test_clockwise_cell_rejected_with_name():
    with pytest.raises(MeshError, match="cell 1"):
        build_topology([[0, 0], [1, 0], [1, 1], [0, 1], [2, 0], [2, 1]],
                       [[0, 1, 2, 3], [1, 2, 5, 4]])


def test_non_manifold_edge_rejected():
    verts = [[0, 0], [1, 0], [0.5, 1], [0.5, -1], [1.5, 0.5]]
    with pytest.raises(MeshError):
        build_topology(verts, [[0, 1, 2], [1, 0, 3], [0, 1, 4]])


def test_bad_indices_rejected():
    with pytest.raises(MeshError):
        build_topology([[0, 0], [1, 0], [0, 1]], [[0, 1, 3]])
    with pytest.raises(MeshError):
        build_topology([[0, 0], [1, 0], [0, 1]], [[0, 1]])


def test_generator_arguments_validated():
    with pytest.raises(ValueError):
        generate_structured("square", 0)
    with pytest.raises(ValueError):
        generate_structured("perturbed-square", 4, magnitude=0.5)
    with pytest.raises(ValueError):
        generate_structured("circle", 4)


def test_perturbed_square_is_seeded():
    a = generate_structured("perturbed-square", 4, seed=7)
    b = generate_structured("perturbed-square", 4, seed=7)
    c = generate_structured("perturbed-square", 4, seed=8)
    assert np.array_equal(a.vertices, b.vertices)
    assert not np.array_equal(a.vertices, c.vertices)


def test_mesh_roundtrip(tmp_path):
    m = generate_structured("perturbed-square", 2, seed=5)
    path = tmp_path / "m.txt"
    write_mesh(m, path)
    assert path.read_text().splitlines()[0] == "polymesh 1"
    r = read_mesh(path)
    assert np.array_equal(r.vertices, m.vertices)
    assert all(np.array_equal(a, b) for a, b in zip(r.cells, m.cells))


def test_read_mesh_index_out_of_range(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("polymesh 1\n3 1\n0 0\n1 0\n0 1\n3 0 1 3\n")
    with pytest.raises(MeshError, match="range"):
        read_mesh(path)


def test_read_mesh_clockwise(tmp_path):
    path = tmp_path / "cw.txt"
    path.write_text("polymesh 1\n3 1\n0 0\n1 0\n0 1\n3 0 2 1\n")
    with pytest.raises(MeshError, match="cell 0"):
        read_mesh(path)


def test_read_mesh_malformed(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("polymesh 2\n")
    with pytest.raises(MeshError):
        read_mesh(path)
