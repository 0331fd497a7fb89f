import numpy as np
import pytest

from hadamard_eig.mesh import (BoundaryTag, Mesh, MeshFormatError, MeshValidationError,
                               generate_rect_mesh, load_mesh, save_mesh, side_tagger, validate_mesh)


def test_smallest_crisscross_cell():
    m = generate_rect_mesh(1, 1, 1.0, 1.0, BoundaryTag.DIRICHLET)
    assert m.n_vertices == 5
    assert m.n_triangles == 4
    assert len(m.boundary_edges) == 4
    assert all(t is BoundaryTag.DIRICHLET for t in m.boundary_tags)


def test_counts_2x2():
    m = generate_rect_mesh(2, 2)
    assert (m.n_vertices, m.n_triangles) == (13, 16)


@pytest.mark.parametrize("nx,ny,w,h", [(1, 1, 1.0, 1.0), (3, 2, 2.0, 0.5), (5, 7, 1.3, 3.1), (16, 16, 1.0, 1.0)])
def test_generator_invariants(nx, ny, w, h):
    m = generate_rect_mesh(nx, ny, w, h)
    assert validate_mesh(m) == []
    assert m.n_vertices == (nx + 1) * (ny + 1) + nx * ny
    assert len(m.boundary_edges) == 2 * (nx + ny)
    assert abs(m.signed_areas().sum() - w * h) <= 1e-12 * w * h
    assert np.all(m.signed_areas() > 0)


@pytest.mark.parametrize("nx,ny,w", [(0, 1, 1.0), (1, -2, 1.0), (2, 2, 0.0), (2, 2, -1.0)])
def test_generator_rejects_bad_arguments(nx, ny, w):
    with pytest.raises(ValueError):
        generate_rect_mesh(nx, ny, w, 1.0)


def test_side_tagger_mixed():
    m = generate_rect_mesh(4, 2, 2.0, 1.0, side_tagger(left="D", right="N", bottom="N", top="N", width=2.0))
    assert validate_mesh(m) == []
    tags = dict(zip(map(tuple, m.boundary_edges), m.boundary_tags))
    left = [e for e in tags if m.vertices[e[0], 0] == 0.0 and m.vertices[e[1], 0] == 0.0]
    assert len(left) == 2 and all(tags[e] is BoundaryTag.DIRICHLET for e in left)
    assert sum(t is BoundaryTag.NEUMANN for t in m.boundary_tags) == 2 * 4 + 2


def test_clockwise_triangle_is_reported():
    m = generate_rect_mesh(1, 1)
    tris = m.triangles.copy()
    tris[2] = tris[2][::-1]
    bad = Mesh(m.vertices, tris, m.boundary_edges, m.boundary_tags)
    report = validate_mesh(bad)
    assert any("triangle 2" in r and "non-positive area" in r for r in report)


def test_untagged_edge_is_reported():
    m = generate_rect_mesh(1, 1)
    bad = Mesh(m.vertices, m.triangles, m.boundary_edges[1:], m.boundary_tags[1:])
    a, b = sorted(m.boundary_edges[0])
    report = validate_mesh(bad)
    assert any("untagged" in r and f"({a}, {b})" in r for r in report)


def test_interior_edge_tagged_is_reported():
    m = generate_rect_mesh(1, 1)
    bad = Mesh(m.vertices, m.triangles, np.vstack([m.boundary_edges, [[0, 4]]]),
               m.boundary_tags + (BoundaryTag.NEUMANN,))
    assert any("interior edge" in r for r in validate_mesh(bad))


def test_round_trip_is_exact():
    m = generate_rect_mesh(3, 2, 1.0 / 3.0, np.pi, side_tagger(bottom="N", width=1 / 3, height=np.pi))
    m2 = load_mesh(save_mesh(m))
    assert np.array_equal(m2.vertices, m.vertices)
    assert m2 == m


def test_round_trip_1x1():
    m = generate_rect_mesh(1, 1)
    assert np.array_equal(load_mesh(save_mesh(m)).vertices, m.vertices)


def test_parse_tag_letter():
    text = "v 0 0\nv 1 0\nv 0 1\nt 0 1 2\ne 0 1 D\ne 1 2 N\n# comment\ne 2 0 D\n"
    m = load_mesh(text)
    assert m.boundary_tags == (BoundaryTag.DIRICHLET, BoundaryTag.NEUMANN, BoundaryTag.DIRICHLET)


def test_index_out_of_range_cites_line():
    text = "v 0 0\nv 1 0\nv 0 1\nt 0 1 7\n"
    with pytest.raises(MeshFormatError) as err:
        load_mesh(text)
    assert err.value.lineno == 4
    assert "line 4" in str(err.value)


def test_garbage_cites_line():
    with pytest.raises(MeshFormatError) as err:
        load_mesh("v 0 0\nv 1 zero\n")
    assert err.value.lineno == 2


def test_load_reports_invariant_violation():
    text = "v 0 0\nv 1 0\nv 0 1\nt 0 1 2\ne 0 1 D\ne 1 2 N\n"
    with pytest.raises(MeshValidationError) as err:
        load_mesh(text)
    assert any("untagged" in v for v in err.value.violations)


def test_mesh_is_read_only():
    m = generate_rect_mesh(1, 1)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 3.0
