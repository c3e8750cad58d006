import math
from fractions import Fraction

import numpy as np
import pytest

from idcp import mesh
from idcp.errors import (
    MarkerAdjustmentFailed,
    NonManifoldEdge,
    NotADisk,
    OrientationConflict,
    ScaleTooCoarse,
)

from conftest import UNIT_TRIANGLE


def test_single_triangle():
    m = mesh.build_from_faces([(0, 1, 2)])
    assert (m.n_vertices, m.n_edges, m.n_faces) == (3, 3, 1)
    assert m.boundary_cycle == (0, 1, 2)


def test_two_glued_triangles():
    m = mesh.build_from_faces([(0, 1, 2), (0, 2, 3)])
    assert (m.n_vertices, m.n_edges, m.n_faces) == (4, 5, 2)
    assert m.interior_edges() == [m.edge_index[(0, 2)]]


def test_disconnected_rejected():
    with pytest.raises(NotADisk):
        mesh.build_from_faces([(0, 1, 2), (3, 4, 5)])


def test_nonmanifold_edge_rejected():
    with pytest.raises(NonManifoldEdge):
        mesh.build_from_faces([(0, 1, 2), (0, 2, 3), (2, 0, 4)])


def test_orientation_conflict_rejected():
    # both faces traverse the shared edge in the direction 2 -> 0
    with pytest.raises(OrientationConflict):
        mesh.build_from_faces([(0, 1, 2), (2, 0, 3)])


def test_pinched_vertex_rejected():
    # two triangles sharing only vertex 0: chi = 1 but the boundary branches
    with pytest.raises(NotADisk):
        mesh.build_from_faces([(0, 1, 2), (0, 3, 4)])


def test_rebuild_reproduces_complex(hex_patch):
    rebuilt = mesh.build_from_faces(hex_patch.faces)
    assert rebuilt.faces == hex_patch.faces
    assert rebuilt.edges == hex_patch.edges
    assert rebuilt.boundary_cycle == hex_patch.boundary_cycle


def test_star_polygon_counts():
    m = mesh.star_polygon(3)
    assert (m.n_vertices, m.n_faces) == (4, 3)
    assert len(m.neighbors(0)) == 3
    m6 = mesh.star_polygon(6)
    assert (m6.n_vertices, m6.n_faces) == (7, 6)
    assert all(len(m6.edge_faces[e]) == 2 for e in m6.interior_edges())
    assert len(m6.interior_edges()) == 6


def test_star_polygon_precondition():
    with pytest.raises(ValueError):
        mesh.star_polygon(2)


@pytest.mark.parametrize(
    "n,V,E,F",
    [(1, 3, 3, 1), (2, 6, 9, 4), (3, 10, 18, 9)],
)
def test_subdivision_counts(n, V, E, F):
    sub = mesh.standard_subdivision(mesh.build_from_faces([(0, 1, 2)]), n)
    assert (sub.mesh.n_vertices, sub.mesh.n_edges, sub.mesh.n_faces) == (V, E, F)


def test_subdivision_shared_edge_consistency():
    base = mesh.build_from_faces([(0, 1, 2), (0, 2, 3)])
    sub = mesh.standard_subdivision(base, 2)
    # V = 4 corners + 5 edge midpoints, F = 2 * 4
    assert sub.mesh.n_vertices == 9
    assert sub.mesh.n_faces == 8


def test_subdivision_composition_isomorphic():
    nx = pytest.importorskip("networkx")
    base = mesh.build_from_faces([(0, 1, 2), (0, 2, 3)])
    two_step = mesh.standard_subdivision(
        mesh.standard_subdivision(base, 2).mesh, 3
    ).mesh
    direct = mesh.standard_subdivision(base, 6).mesh

    def skeleton(m):
        g = nx.Graph()
        g.add_edges_from(m.edges)
        return g

    assert (two_step.n_vertices, two_step.n_edges, two_step.n_faces) == (
        direct.n_vertices,
        direct.n_edges,
        direct.n_faces,
    )
    assert nx.is_isomorphic(skeleton(two_step), skeleton(direct))


def test_subdivision_preserves_coords():
    base = mesh.build_from_faces([(0, 1, 2)], coords=[[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]])
    sub = mesh.standard_subdivision(base, 2)
    mid01 = sub.vertex_of[(0, (1, 1, 0))]
    assert np.allclose(sub.mesh.coords[mid01], [0.5, 0.0])


def test_ball_radius_zero(hex_patch):
    b = mesh.combinatorial_ball(hex_patch, 0, 0)
    assert b.vertices == (0,)
    assert b.faces == ()


def test_ball_hexagonal_interior(hex_patch):
    # lattice origin has index of the (0,0) point; full star: 7 vertices, 6 faces
    center = [v for v in range(hex_patch.n_vertices) if not hex_patch.is_boundary[v]]
    origin = [v for v in center if len(hex_patch.vertex_faces[v]) == 6][0]
    b = mesh.combinatorial_ball(hex_patch, origin, 1)
    assert len(b.vertices) == 7
    assert len(b.faces) == 6


def test_ball_covers_whole_mesh(hex_patch):
    b = mesh.combinatorial_ball(hex_patch, 0, 100)
    assert len(b.vertices) == hex_patch.n_vertices
    assert len(b.faces) == hex_patch.n_faces


# --- hexagonal approximation -----------------------------------------------------

def _exact_triangle_count(inv_scale: int) -> int:
    """Brute-force oracle with exact rational arithmetic: lattice triangles of
    the unit equilateral domain at scale 1/inv_scale. In lattice coordinates
    containment is m >= 0, n >= 0, m + n <= inv_scale."""
    N = inv_scale
    count = 0
    for m in range(-1, N + 2):
        for n in range(-1, N + 2):
            up = [(m, n), (m + 1, n), (m, n + 1)]
            if all(a >= 0 and b >= 0 and a + b <= N for a, b in up):
                bary = [Fraction(3 * m + 1, 3), Fraction(3 * n + 1, 3)]
                if bary[0] >= 0 and bary[1] >= 0 and bary[0] + bary[1] <= N:
                    count += 1
            down = [(m + 1, n), (m + 1, n + 1), (m, n + 1)]
            if all(a >= 0 and b >= 0 and a + b <= N for a, b in down):
                count += 1
    return count


def test_hex_triangle_fixture_matches_oracle():
    hx = mesh.hexagonal_approximation(UNIT_TRIANGLE, 0.25, UNIT_TRIANGLE)
    assert hx.marked.mesh.n_faces == _exact_triangle_count(4) == 16
    coords = hx.marked.mesh.coords
    got = sorted(tuple(np.round(coords[m], 12)) for m in hx.marked.markers)
    want = sorted(tuple(np.round(np.asarray(c, float), 12)) for c in UNIT_TRIANGLE)
    assert got == want
    for m in hx.marked.markers:
        assert len(hx.marked.mesh.vertex_faces[m]) == 1


def test_hex_scale_too_coarse():
    with pytest.raises(ScaleTooCoarse):
        mesh.hexagonal_approximation([[0, 0], [1, 0], [1, 1], [0, 1]], 10.0, [[0, 0], [1, 0], [1, 1]])


def test_hex_square_markers_are_only_one_face_vertices():
    hx = mesh.hexagonal_approximation(
        [[0, 0], [1, 0], [1, 1], [0, 1]], 1 / 8, [[0, 0], [1, 0], [1, 1]]
    )
    m = hx.marked.mesh
    one_face = sorted(v for v in m.boundary_cycle if len(m.vertex_faces[v]) == 1)
    assert one_face == sorted(hx.marked.markers)


def test_hex_refinement_nests():
    square = [[0, 0], [1, 0], [1, 1], [0, 1]]
    coarse = mesh.lattice_triangles_inside(square, 1 / 8)
    fine = set(mesh.lattice_triangles_inside(square, 1 / 16))

    def children(mn, o):
        m, n = mn
        if o == 0:
            return [((2 * m, 2 * n), 0), ((2 * m + 1, 2 * n), 0), ((2 * m, 2 * n + 1), 0), ((2 * m, 2 * n), 1)]
        return [((2 * m + 1, 2 * n), 1), ((2 * m + 1, 2 * n + 1), 0), ((2 * m + 1, 2 * n + 1), 1), ((2 * m, 2 * n + 1), 1)]

    for t in coarse:
        for ch in children(*t):
            assert ch in fine


def test_hex_l_fixture_corner_structure(l_fixture):
    m = l_fixture.marked.mesh
    face_counts = sorted(
        len(m.vertex_faces[v]) for v in m.boundary_cycle if v not in l_fixture.marked.markers
    )
    # one 120-degree corner (2 faces), one reflex 240-degree corner (4 faces),
    # the rest straight (3 faces)
    assert face_counts.count(2) == 1
    assert face_counts.count(4) == 1
    assert all(c in (2, 3, 4) for c in face_counts)


def test_marker_distinctness_enforced():
    m = mesh.build_from_faces([(0, 1, 2)])
    with pytest.raises(MarkerAdjustmentFailed):
        mesh.MarkedDisk(mesh=m, markers=(0, 0, 1))


def test_marker_cyclic_order_enforced():
    m = mesh.star_polygon(6)
    mesh.MarkedDisk(mesh=m, markers=(1, 3, 5))
    with pytest.raises(MarkerAdjustmentFailed):
        mesh.MarkedDisk(mesh=m, markers=(1, 5, 3))


def test_mesh_json_roundtrip(hex_patch):
    data = hex_patch.to_json_dict(markers=None)
    rebuilt, markers = mesh.mesh_from_json_dict(data)
    assert rebuilt.faces == hex_patch.faces
    assert markers is None
    assert np.allclose(rebuilt.coords, hex_patch.coords)


def test_hex_approximation_deterministic():
    a = mesh.hexagonal_approximation(UNIT_TRIANGLE, 1 / 8, UNIT_TRIANGLE)
    b = mesh.hexagonal_approximation(UNIT_TRIANGLE, 1 / 8, UNIT_TRIANGLE)
    assert a.marked.mesh.faces == b.marked.mesh.faces
    assert a.marked.markers == b.marked.markers
    assert np.array_equal(a.marked.mesh.coords, b.marked.mesh.coords)


def test_hex_markers_keep_requested_correspondence():
    hx = mesh.hexagonal_approximation(UNIT_TRIANGLE, 0.25, UNIT_TRIANGLE)
    coords = hx.marked.mesh.coords
    for req, got in zip(UNIT_TRIANGLE, hx.marked.markers):
        assert np.allclose(coords[got], req, atol=1e-12)


def test_hex_rejects_clockwise_marker_order():
    cw = [UNIT_TRIANGLE[0], UNIT_TRIANGLE[2], UNIT_TRIANGLE[1]]
    with pytest.raises(MarkerAdjustmentFailed):
        mesh.hexagonal_approximation(UNIT_TRIANGLE, 0.25, cw)
