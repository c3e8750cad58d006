import math

import numpy as np
import pytest

from idcp import mesh as mesh_mod
from idcp.packing import PackingState

S3 = math.sqrt(3.0) / 2.0

# L-shaped lattice pentagon: one reflex 240-degree corner (degree 5) at
# lattice point (2,1), one 120-degree corner (degree 3) at (0,2), and three
# 60-degree marker corners at (0,0), (3,0), (2,2)
L_POLY = [[0.0, 0.0], [3.0, 0.0], [2.5, S3], [3.0, 2.0 * S3], [1.0, 2.0 * S3]]
L_MARKERS = [[0.0, 0.0], [3.0, 0.0], [3.0, 2.0 * S3]]

UNIT_TRIANGLE = [[0.0, 0.0], [1.0, 0.0], [0.5, S3]]


@pytest.fixture(scope="session")
def hex_patch():
    """Radius-2 hexagonal patch with an interior vertex of full degree."""
    from idcp.spiral import hex_ball_complex

    pts, faces = hex_ball_complex(2)
    coords = [[a + b / 2.0, b * S3] for a, b in pts]
    return mesh_mod.build_from_faces(faces, coords=coords)


@pytest.fixture(scope="session")
def l_fixture():
    return mesh_mod.hexagonal_approximation(L_POLY, 1.0, L_MARKERS)


def constant_state(m, weight=2.0, label=0.0):
    return PackingState.constant(m, weight, label)


def random_admissible_state(m, rng, weight_range=(1.2, 6.0), spread=0.25):
    """Rejection-sample a state with every face admissible."""
    for _ in range(200):
        weights = rng.uniform(*weight_range, size=m.n_edges)
        labels = rng.uniform(-spread, spread, size=m.n_vertices)
        state = PackingState(mesh=m, weights=weights, labels=labels)
        geo = state.geometry()
        if np.all(geo.cls == 0):
            return state, geo
    raise AssertionError("could not sample an admissible state")


def random_delaunay_state(m, rng, weight_range=(1.5, 4.0), spread=0.1):
    """Rejection-sample a strictly weighted Delaunay state (all eta > 0)."""
    from idcp.packing import conductance

    for _ in range(500):
        try:
            state, geo = random_admissible_state(m, rng, weight_range, spread)
        except AssertionError:
            continue
        if conductance(state, geo).min() > 0:
            return state
    raise AssertionError("could not sample a strictly Delaunay state")
