import math

import numpy as np
import pytest

from idcp import delaunay, mesh, packing
from idcp.errors import InadmissibleFace

from conftest import random_admissible_state

ROOT_KAPPA = 4.0 + 3.0 * math.sqrt(2.0)


def quad_state(r, weights):
    """Two faces (0,1,2) and (0,3,1) sharing edge (0,1)."""
    m = mesh.build_from_faces([(0, 1, 2), (0, 3, 1)])
    w = np.empty(m.n_edges)
    for key, val in weights.items():
        w[m.edge_index[key]] = val
    return packing.PackingState(mesh=m, weights=w, labels=np.log(np.asarray(r, float)))


def test_hexagonal_patch_margins(hex_patch):
    st = packing.PackingState.constant(hex_patch, 2.0)
    rep = delaunay.is_weighted_delaunay(st)
    assert rep.strict
    assert not rep.violations
    for v in rep.margins.values():
        assert v == pytest.approx(math.pi / 3, rel=1e-12)
    # boundary edges never appear
    interior = {hex_patch.edges[e] for e in hex_patch.interior_edges()}
    assert set(rep.margins) == interior


def test_zero_margin_from_two_degenerate_faces():
    # face (0,1,2) flat at 2 contributes -pi/2 at edge (0,1); face (0,3,1)
    # flat at 1 contributes +pi/2 (flat vertex on the edge)
    r2 = 1.0 / ROOT_KAPPA
    # r_1 chosen so the root equation of face (0,3,1) holds at vertex 1 with
    # r_0 = r_3 = 1: kappa_1 = 4 + 3 sqrt(2)
    r1 = 1.0 / ROOT_KAPPA
    geo = packing.classify_triangle([1.0, r1, 1.0], [2, 2, 2])
    assert geo.kind == packing.TriangleClass.DEGENERATE_FLAT and geo.vertex == 1
    # face (0,1,2): radii (1, r1, r_2) with r_2 making it flat at 2
    lo, hi = packing.admissible_interval_r3(1.0, r1, [2, 2, 2])
    state = quad_state(
        [1.0, r1, lo, 1.0],
        {
            (0, 1): 2.0,
            (0, 2): 2.0,
            (1, 2): 2.0,
            (0, 3): 2.0,
            (1, 3): 2.0,
        },
    )
    m = state.mesh
    cls = state.geometry().cls
    assert list(cls) == [packing.TriangleClass.DEGENERATE_FLAT] * 2
    margin = delaunay.edge_margin(state, (0, 1))
    assert margin == 0.0


def test_margin_sign_matches_h_sum():
    rng = np.random.default_rng(101)
    checked = 0
    while checked < 300:
        r = np.exp(rng.uniform(-1.0, 1.0, 4))
        w = {k: float(rng.uniform(1.05, 8)) for k in [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3)]}
        state = quad_state(r, w)
        geo = state.geometry()
        if np.any(geo.cls != packing.TriangleClass.NON_DEGENERATE):
            continue
        checked += 1
        m = delaunay.edge_margin(state, (0, 1), geo)
        # h-sum oracle over the two faces
        hsum = 0.0
        for f, tri in enumerate(state.mesh.faces):
            k_loc = tri.index(next(v for v in tri if v not in (0, 1)))
            hsum += float(geo.h_edge[f, k_loc])
        if abs(m) <= delaunay.ZERO_TOL:
            continue
        assert np.sign(m) == np.sign(hsum)


def test_violation_detected():
    # search a state with a genuinely negative margin, verified via the h-sum
    rng = np.random.default_rng(103)
    found = False
    while not found:
        r = np.exp(rng.uniform(-1.2, 1.2, 4))
        w = {k: float(rng.uniform(1.05, 8)) for k in [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3)]}
        state = quad_state(r, w)
        geo = state.geometry()
        if np.any(geo.cls != packing.TriangleClass.NON_DEGENERATE):
            continue
        rep = delaunay.is_weighted_delaunay(state, geo)
        if rep.violations:
            found = True
            assert rep.violations == [(0, 1)]
            assert not rep.strict


def test_margins_invariant_under_label_shift(hex_patch):
    rng = np.random.default_rng(107)
    state, _ = random_admissible_state(hex_patch, rng, spread=0.15)
    r1 = delaunay.is_weighted_delaunay(state)
    r2 = delaunay.is_weighted_delaunay(state.shifted(-0.9))
    for k in r1.margins:
        assert r1.margins[k] == pytest.approx(r2.margins[k], abs=1e-12)


def test_inadmissible_face_refused():
    state = quad_state(
        [1.0, 1.0, 0.05, 1.0],
        {(0, 1): 2.0, (0, 2): 2.0, (1, 2): 2.0, (0, 3): 2.0, (1, 3): 2.0},
    )
    with pytest.raises(InadmissibleFace):
        delaunay.is_weighted_delaunay(state)
    with pytest.raises(InadmissibleFace):
        delaunay.edge_margin(state, (0, 1))


def test_report_json_shape(hex_patch):
    st = packing.PackingState.constant(hex_patch, 2.0)
    data = delaunay.is_weighted_delaunay(st).to_json_dict()
    assert data["strict"] is True
    assert data["violations"] == []
    assert all("-" in k for k in data["margins"])
