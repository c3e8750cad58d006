import math

import pytest
from fastapi.testclient import TestClient

from idcp.service import app

from conftest import L_MARKERS, L_POLY, UNIT_TRIANGLE


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def star_state_payload(client, n=6, weight=2.0):
    mesh = client.post("/mesh/star", json={"n": n}).json()
    edges = set()
    for a, b, c in mesh["faces"]:
        for i, j in ((a, b), (b, c), (a, c)):
            edges.add((min(i, j), max(i, j)))
    state = {
        "weights": {f"{i}-{j}": weight for i, j in sorted(edges)},
        "labels": [0.0] * (n + 1),
    }
    return mesh, state


def test_health(client):
    data = client.get("/health").json()
    assert data["status"] == "ok"


def test_mesh_build_and_validation_error(client):
    r = client.post("/mesh/build", json={"faces": [[0, 1, 2], [0, 2, 3]]})
    assert r.status_code == 200
    assert r.json()["n_faces"] == 2
    r = client.post("/mesh/build", json={"faces": [[0, 1, 2], [3, 4, 5]]})
    assert r.status_code == 422
    assert r.json()["error"] == "NotADisk"


def test_subdivide_endpoint(client):
    mesh = client.post("/mesh/build", json={"faces": [[0, 1, 2]]}).json()
    r = client.post("/mesh/subdivide", json={"mesh": {"faces": mesh["faces"]}, "n": 3})
    assert r.status_code == 200
    assert len(r.json()["faces"]) == 9


def test_hex_approx_endpoint(client):
    r = client.post(
        "/mesh/hex-approx",
        json={"domain": UNIT_TRIANGLE, "scale": 0.25, "markers": UNIT_TRIANGLE},
    )
    assert r.status_code == 200
    body = r.json()
    assert len(body["faces"]) == 16
    assert len(body["markers"]) == 3
    r = client.post(
        "/mesh/hex-approx",
        json={"domain": UNIT_TRIANGLE, "scale": 50.0, "markers": UNIT_TRIANGLE},
    )
    assert r.status_code == 422
    assert r.json()["error"] == "ScaleTooCoarse"


def test_metrics_and_delaunay_endpoints(client):
    mesh, state = star_state_payload(client)
    r = client.post("/metrics/report", json={"mesh": mesh, "state": state})
    assert r.status_code == 200
    body = r.json()
    assert body["flags"]["any_inadmissible"] is False
    assert abs(sum(body["curvature"]) - 2 * math.pi) < 1e-9
    r = client.post("/delaunay/report", json={"mesh": mesh, "state": state})
    assert r.json()["strict"] is True


def test_flow_run_endpoint(client):
    mesh, state = star_state_payload(client)
    target = [0.0] + [2 * math.pi / 6] * 6  # keep the initial curvature
    r = client.post(
        "/flow/run",
        json={
            "mesh": mesh,
            "state": state,
            "dirichlet": [1, 2, 3, 4, 5, 6],
            "target": [0.0] * 7,
            "config": {"curvature_tol": 1e-10},
        },
    )
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "Completed"
    assert max(abs(x) for x in body["w"]) < 1e-6  # initial state already flat at center


def test_corner_flow_endpoint(client):
    r = client.post("/flow/corner", json={"n": 6, "weight": 2.0, "alpha": math.pi / 4})
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "Completed"
    assert body["ledger"]["sum"] <= math.pi / 6 + 1e-6


def test_flatten_endpoint_l_fixture(client):
    hex_body = client.post(
        "/mesh/hex-approx", json={"domain": L_POLY, "scale": 1.0, "markers": L_MARKERS}
    ).json()
    r = client.post(
        "/flow/flatten",
        json={
            "mesh": {"faces": hex_body["faces"], "vertices": hex_body["vertices"],
                     "markers": hex_body["markers"]},
            "weight": 2.0,
            "subdiv": 3,
            "config": {"curvature_tol": 1e-10,
                        "angle_floor": math.pi / 6 - 0.05,
                        "angle_ceiling": math.pi / 2 + 0.05},
        },
    )
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "Completed"
    assert len(body["corners"]) == 2


def test_spiral_endpoints(client):
    r = client.post("/spiral/constants", json={"I": [2, 2, 2]})
    body = r.json()
    assert body["residual_up"] < 1e-10
    r = client.post(
        "/spiral/flatness", json={"I": [2, 2, 2], "lambda": 1.05, "mu": 1.0, "m": 4}
    )
    assert r.json()["max_abs"] < 1e-9
    r = client.post("/spiral/rigidity", json={"weight": 2.0, "m": 4, "random_trials": 2})
    assert r.status_code == 200
    kinds = {p["kind"] for p in r.json()["probes"]}
    assert kinds == {"constant", "spiral", "random"}


def test_verify_endpoints(client):
    r = client.post("/verify/maximal-principle", json={"samples": 2000, "seed": 5})
    body = r.json()
    assert body["satisfied"] == body["proportional"]
    assert body["counterexamples"] == []
    r = client.post("/verify/ring", json={"n": 6, "weight": 2.0, "samples": 100})
    assert r.json()["solved"] == 100


def test_pipeline_endpoint(client, tmp_path):
    r = client.post(
        "/pipeline/run",
        json={
            "domain": UNIT_TRIANGLE,
            "markers": UNIT_TRIANGLE,
            "weight": 2.0,
            "scales": [0.25],
            "subdiv": 1,
            "out_dir": str(tmp_path / "arts"),
        },
    )
    assert r.status_code == 200
    body = r.json()
    assert body["scales"][0]["status"] == "Completed"
    assert (tmp_path / "arts" / "scale_0" / "map.svg").exists()


def test_map_evaluate_endpoint(client):
    mesh = {"faces": [[0, 1, 2]]}
    src = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    dst = [[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]]
    r = client.post(
        "/map/evaluate",
        json={"mesh": mesh, "layout_src": src, "layout_dst": dst,
              "points": [[0.5, 0.0], [0.25, 0.25]]},
    )
    body = r.json()
    assert body["images"][0] == [1.0, 0.0]
    assert body["global_dilatation"] == pytest.approx(2.0, rel=1e-12)


def test_layout_develop_and_svg_endpoints(client):
    mesh, state = star_state_payload(client)
    r = client.post("/layout/develop", json={"mesh": mesh, "state": state})
    assert r.status_code == 200
    body = r.json()
    assert body["embedded"] is True
    r = client.post("/layout/svg", json={"mesh": mesh, "coords": body["coords"]})
    assert "<svg" in r.json()["svg"]
