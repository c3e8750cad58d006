import math

import numpy as np
import pytest

from idcp import layout, mesh, packing, spiral
from idcp.errors import MarkersCollinear, TriangleInequalityViolation


def flat_subdivided_triangle(n, weight=2.0):
    sub = mesh.standard_subdivision(mesh.build_from_faces([(0, 1, 2)]), n)
    state = packing.PackingState.constant(sub.mesh, weight)
    return sub, state


def test_single_face_canonical_placement():
    m = mesh.build_from_faces([(0, 1, 2)])
    lay = layout.develop(m, np.array([1.0, 1.0, 1.0]))
    np.testing.assert_allclose(lay.coords[0], [0, 0], atol=1e-15)
    np.testing.assert_allclose(lay.coords[1], [1, 0], atol=1e-15)
    np.testing.assert_allclose(lay.coords[2], [0.5, math.sqrt(3) / 2], atol=1e-15)


def test_rigid_figure_corner_distance():
    sub, state = flat_subdivided_triangle(2)
    lay = layout.develop(sub.mesh, state.edge_lengths())
    a, b = sub.old_to_new[0], sub.old_to_new[1]
    # unit sub-edges scaled by sqrt(6): corner distance is twice the sub-edge
    assert np.linalg.norm(lay.coords[a] - lay.coords[b]) == pytest.approx(
        2 * math.sqrt(6), rel=1e-12
    )


def test_isometry_of_development():
    sub, state = flat_subdivided_triangle(5)
    L = state.edge_lengths()
    lay = layout.develop(sub.mesh, L)
    np.testing.assert_allclose(lay.edge_lengths(), L, rtol=1e-9)


def test_develop_traversal_order_independence():
    sub, state = flat_subdivided_triangle(4)
    L = state.edge_lengths()
    lay0 = layout.develop(sub.mesh, L, seed_face=0)
    lay7 = layout.develop(sub.mesh, L, seed_face=7)
    R, t = layout.best_fit_rigid(lay7.coords, lay0.coords)
    aligned = lay7.coords @ R.T + t
    assert np.abs(aligned - lay0.coords).max() < 1e-9


def test_develop_rejects_triangle_inequality_violation():
    m = mesh.build_from_faces([(0, 1, 2)])
    L = np.zeros(m.n_edges)
    L[m.edge_index[(0, 1)]] = 3.0
    L[m.edge_index[(0, 2)]] = 1.0
    L[m.edge_index[(1, 2)]] = 1.0
    with pytest.raises(TriangleInequalityViolation):
        layout.develop(m, L)


def test_normalize_identity_and_scale():
    sub, state = flat_subdivided_triangle(2)
    L = state.edge_lengths() / math.sqrt(6) / 2.0  # unit outer triangle
    lay = layout.develop(sub.mesh, L)
    markers = [sub.old_to_new[k] for k in (0, 1, 2)]
    norm, resid = layout.normalize_to_unit_triangle(lay, markers)
    assert resid < 1e-12
    np.testing.assert_allclose(norm.coords[markers[1]], [1, 0], atol=1e-12)
    # doubling the layout halves through the same similarity
    doubled = layout.Layout(
        mesh=lay.mesh, coords=2 * lay.coords, face_signed_area=4 * lay.face_signed_area
    )
    norm2, _ = layout.normalize_to_unit_triangle(doubled, markers)
    np.testing.assert_allclose(norm2.coords, norm.coords, atol=1e-12)


def test_normalize_rejects_collinear():
    m = mesh.build_from_faces([(0, 1, 2)])
    lay = layout.develop(m, np.array([1.0, 1.0, 1.0]))
    coords = lay.coords.copy()
    coords[2] = [0.4, 0.0]
    bad = layout.Layout(mesh=m, coords=coords, face_signed_area=lay.face_signed_area)
    with pytest.raises(MarkersCollinear):
        layout.normalize_to_unit_triangle(bad, (0, 1, 2))


def test_pl_map_dilatations():
    sub, state = flat_subdivided_triangle(3)
    lay = layout.develop(sub.mesh, state.edge_lengths())
    ident = layout.pl_map(lay, lay)
    np.testing.assert_allclose(ident.dilatation, 1.0, rtol=1e-12)
    # conformal similarity keeps K = 1
    th = 0.7
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    sim = layout.Layout(
        mesh=sub.mesh, coords=3.0 * lay.coords @ R.T + 1.5,
        face_signed_area=9 * lay.face_signed_area,
    )
    conf = layout.pl_map(lay, sim)
    np.testing.assert_allclose(conf.dilatation, 1.0, rtol=1e-12)
    # diag(2,1) stretch has K = 2 everywhere
    stretched = layout.Layout(
        mesh=sub.mesh, coords=lay.coords * np.array([2.0, 1.0]),
        face_signed_area=2 * lay.face_signed_area,
    )
    pm = layout.pl_map(lay, stretched)
    np.testing.assert_allclose(pm.dilatation, 2.0, rtol=1e-12)
    assert pm.global_dilatation == pytest.approx(2.0, rel=1e-12)


def test_dilatation_angle_envelope():
    # conservative envelope: K <= tan(pi/2 - tmin/2) / tan(tmin/2) whenever
    # all angles of both layouts are at least tmin
    sub, state = flat_subdivided_triangle(3)
    lay = layout.develop(sub.mesh, state.edge_lengths())
    sheared = layout.Layout(
        mesh=sub.mesh,
        coords=lay.coords @ np.array([[1.0, 0.3], [0.0, 1.0]]).T,
        face_signed_area=lay.face_signed_area,
    )
    pm = layout.pl_map(lay, sheared)

    def min_angle(l):
        worst = math.pi
        for tri in l.mesh.faces:
            p = [l.coords[v] for v in tri]
            for a in range(3):
                u = p[(a + 1) % 3] - p[a]
                v = p[(a + 2) % 3] - p[a]
                c = float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))
                worst = min(worst, math.acos(np.clip(c, -1, 1)))
        return worst

    tmin = min(min_angle(lay), min_angle(sheared))
    envelope = math.tan(math.pi / 2 - tmin / 2) / math.tan(tmin / 2)
    assert pm.global_dilatation <= envelope


def test_embedding_check_flat_patch():
    sub, state = flat_subdivided_triangle(4)
    lay = layout.develop(sub.mesh, state.edge_lengths())
    res = layout.embedding_check(lay)
    assert res.embedded and res.overlap is None


def test_embedding_check_detects_spiral_overlap():
    lat = spiral.spiral_state(spiral.SpiralConfig(weights=(2, 2, 2), lam=2.0, mu=1.0, m=4))
    lay = layout.develop(lat.mesh, lat.state.edge_lengths())
    res = layout.embedding_check(lay)
    assert not res.embedded
    f, g = res.overlap
    # overlapping pair never shares an edge
    shared = set(lat.mesh.faces[f]) & set(lat.mesh.faces[g])
    assert len(shared) < 2


def test_embedding_check_ignores_edge_neighbors():
    # a thin wedge: adjacent faces nearly fold onto each other but share an edge
    m = mesh.build_from_faces([(0, 1, 2), (0, 3, 1)])
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.05], [0.5, 0.04]])
    lay = layout.Layout(mesh=m, coords=coords, face_signed_area=np.array([1.0, 1.0]))
    assert layout.embedding_check(lay).embedded


def test_layout_json():
    sub, state = flat_subdivided_triangle(2)
    lay = layout.develop(sub.mesh, state.edge_lengths())
    data = lay.to_json_dict()
    assert len(data["coords"]) == sub.mesh.n_vertices


def test_flatten_output_normalizes_to_unit_triangle():
    from idcp import flow
    from conftest import L_MARKERS, L_POLY

    hx = mesh.hexagonal_approximation(L_POLY, 1.0, L_MARKERS)
    res = flow.flatten_disk(hx.marked, 2.0, 9, flow.FlowConfig(curvature_tol=1e-12))
    assert res.completed
    st = res.state0.shifted(res.factor)
    lay = layout.develop(res.subdivision.mesh, st.edge_lengths())
    norm, resid = layout.normalize_to_unit_triangle(lay, res.markers_fine)
    assert resid < 1e-6
    assert layout.embedding_check(norm).embedded
