"""FastAPI service exposing the packing, flow, spiral and pipeline operations.

All endpoints are stateless: each request carries the full problem data and
returns plain JSON mirroring the package's serialization conventions. Package
errors surface as 422 responses with the error class name.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..delaunay import is_weighted_delaunay
from ..errors import IdcpError
from ..flow import (
    FlowConfig,
    FlowProblem,
    corner_flow,
    flatten_disk,
    integrate_flow,
    maximal_principle_campaign,
    ring_constant_probe,
)
from ..io import layout_svg
from ..layout import Layout, develop, embedding_check, pl_map
from ..mesh import (
    build_from_faces,
    combinatorial_ball,
    hexagonal_approximation,
    mesh_from_json_dict,
    standard_subdivision,
    star_polygon,
)
from ..packing import PackingState, metric_report
from ..pipeline import PipelineConfig, evaluate_map, run_pipeline
from ..spiral import (
    SpiralConfig,
    rigidity_experiment,
    solve_degenerate_constants,
    spiral_state,
    verify_spiral_flatness,
)
from . import schemas


def _mesh_of(model: schemas.MeshModel):
    return mesh_from_json_dict(model.model_dump())


def _state_of(mesh, model: schemas.StateModel) -> PackingState:
    return PackingState.from_json_dict(mesh, model.model_dump())


def _flow_config(model: schemas.FlowConfigModel) -> FlowConfig:
    return FlowConfig(
        steps=model.steps,
        angle_floor=model.angle_floor,
        angle_ceiling=model.angle_ceiling,
        conductance_floor=model.conductance_floor,
        curvature_tol=model.curvature_tol,
        seed=model.seed,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="idcp", version=__version__)

    @app.exception_handler(IdcpError)
    async def idcp_error_handler(request: Request, exc: IdcpError):
        return JSONResponse(
            status_code=422,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=422, content={"error": "ValueError", "message": str(exc)}
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    # --- meshes -----------------------------------------------------------

    @app.post("/mesh/build")
    def mesh_build(req: schemas.BuildMeshRequest):
        mesh = build_from_faces(req.faces, coords=req.vertices)
        return mesh.to_json_dict() | {
            "n_vertices": mesh.n_vertices,
            "n_edges": mesh.n_edges,
            "n_faces": mesh.n_faces,
            "boundary_cycle": list(mesh.boundary_cycle),
        }

    @app.post("/mesh/star")
    def mesh_star(req: schemas.StarRequest):
        return star_polygon(req.n).to_json_dict()

    @app.post("/mesh/subdivide")
    def mesh_subdivide(req: schemas.SubdivideRequest):
        mesh, markers = _mesh_of(req.mesh)
        sub = standard_subdivision(mesh, req.n)
        out = sub.mesh.to_json_dict(
            markers=[sub.old_to_new[m] for m in markers] if markers else None
        )
        out["old_to_new"] = {str(k): v for k, v in sub.old_to_new.items()}
        return out

    @app.post("/mesh/hex-approx")
    def mesh_hex(req: schemas.HexApproxRequest):
        hx = hexagonal_approximation(req.domain, req.scale, req.markers)
        out = hx.marked.to_json_dict()
        out["removed_faces"] = hx.removed_faces
        return out

    @app.post("/mesh/ball")
    def mesh_ball(req: schemas.BallRequest):
        mesh, _ = _mesh_of(req.mesh)
        ball = combinatorial_ball(mesh, req.center, req.radius)
        return {
            "vertices": list(ball.vertices),
            "faces": list(ball.faces),
            "distances": {str(k): v for k, v in ball.distances.items()},
        }

    # --- metrics ------------------------------------------------------------

    @app.post("/metrics/report")
    def metrics(req: schemas.MetricRequest):
        mesh, _ = _mesh_of(req.mesh)
        state = _state_of(mesh, req.state)
        return metric_report(state).to_json_dict(mesh)

    @app.post("/delaunay/report")
    def delaunay_report(req: schemas.MetricRequest):
        mesh, _ = _mesh_of(req.mesh)
        state = _state_of(mesh, req.state)
        return is_weighted_delaunay(state).to_json_dict()

    # --- flows ----------------------------------------------------------------

    @app.post("/flow/run")
    def flow_run(req: schemas.FlowRunRequest):
        mesh, _ = _mesh_of(req.mesh)
        state = _state_of(mesh, req.state)
        problem = FlowProblem(
            state=state,
            dirichlet=tuple(req.dirichlet),
            target=np.asarray(req.target, dtype=float),
            config=_flow_config(req.config),
        )
        return integrate_flow(problem).to_json_dict()

    @app.post("/flow/corner")
    def flow_corner(req: schemas.CornerFlowRequest):
        res = corner_flow(req.n, req.weight, req.alpha, _flow_config(req.config))
        out = res.result.to_json_dict()
        out["apex"] = res.apex
        out["side"] = list(res.side)
        out["ledger"] = {
            "per_vertex": {str(k): v for k, v in res.ledger["per_vertex"].items()},
            "max": res.ledger["max"],
            "sum": res.ledger["sum"],
        }
        return out

    @app.post("/flow/flatten")
    def flow_flatten(req: schemas.FlattenRequest):
        mesh, markers = _mesh_of(req.mesh)
        if markers is None:
            raise ValueError("flatten needs a mesh with three markers")
        from ..mesh import MarkedDisk

        marked = MarkedDisk(mesh=mesh, markers=markers)
        res = flatten_disk(
            marked, req.weight, req.subdiv, _flow_config(req.config), label=req.label
        )
        return {
            "status": res.step2.status,
            "factor": [float(x) for x in res.factor],
            "markers_fine": list(res.markers_fine),
            "mesh_fine": res.subdivision.mesh.to_json_dict(markers=res.markers_fine),
            "detail": {
                k: (v if not isinstance(v, np.floating) else float(v))
                for k, v in res.detail.items()
            },
            "corners": [
                {"vertex": c.vertex, "degree": c.degree, "alpha": c.alpha}
                for c in res.corners
            ],
        }

    # --- spiral -----------------------------------------------------------------

    @app.post("/spiral/state")
    def spiral_state_ep(req: schemas.SpiralConfigModel):
        cfg = SpiralConfig(
            weights=tuple(req.I), u=req.u, lam=req.lam, mu=req.mu, m=req.m
        )
        lat = spiral_state(cfg)
        return {
            "mesh": lat.mesh.to_json_dict(),
            "state": lat.state.to_json_dict(),
            "lattice": {str(k): list(v) for k, v in lat.lattice.items()},
        }

    @app.post("/spiral/flatness")
    def spiral_flatness(req: schemas.SpiralConfigModel):
        cfg = SpiralConfig(
            weights=tuple(req.I), u=req.u, lam=req.lam, mu=req.mu, m=req.m
        )
        return verify_spiral_flatness(cfg).to_json_dict()

    @app.post("/spiral/constants")
    def spiral_constants(req: schemas.SpiralConstantsRequest):
        return solve_degenerate_constants(req.I, req.u).to_json_dict()

    @app.post("/spiral/rigidity")
    def spiral_rigidity(req: schemas.RigidityRequest):
        rep = rigidity_experiment(
            req.weight, req.m, seed=req.seed, random_trials=req.random_trials
        )
        return rep.to_json_dict()

    # --- verification campaigns ---------------------------------------------------

    @app.post("/verify/maximal-principle")
    def verify_mp(req: schemas.MaximalPrincipleRequest):
        rep = maximal_principle_campaign(
            req.samples,
            seed=req.seed,
            star_sizes=tuple(req.star_sizes),
            weight_range=(req.weight_min, req.weight_max),
        )
        return rep.to_json_dict()

    @app.post("/verify/ring")
    def verify_ring(req: schemas.RingProbeRequest):
        rep = ring_constant_probe(
            req.n, req.weight, req.samples, seed=req.seed, label_range=req.label_range
        )
        return rep.to_json_dict()

    # --- pipeline --------------------------------------------------------------------

    @app.post("/pipeline/run")
    def pipeline_run(req: schemas.PipelineRequest):
        cfg = PipelineConfig(
            domain=np.asarray(req.domain, dtype=float),
            markers=np.asarray(req.markers, dtype=float),
            weight=req.weight,
            scales=tuple(req.scales),
            subdiv=req.subdiv,
            flow=_flow_config(req.flow),
            out_dir=req.out_dir,
            seed=req.seed,
        )
        return run_pipeline(cfg).to_json_dict()

    @app.post("/map/evaluate")
    def map_evaluate(req: schemas.EvaluateMapRequest):
        mesh, _ = _mesh_of(req.mesh)
        src = Layout(
            mesh=mesh,
            coords=np.asarray(req.layout_src, dtype=float),
            face_signed_area=np.zeros(mesh.n_faces),
        )
        dst = Layout(
            mesh=mesh,
            coords=np.asarray(req.layout_dst, dtype=float),
            face_signed_area=np.zeros(mesh.n_faces),
        )
        mapping = pl_map(src, dst)
        images = evaluate_map(mapping, np.asarray(req.points, dtype=float))
        return {
            "images": [[float(x), float(y)] for x, y in images],
            "global_dilatation": mapping.global_dilatation,
        }

    @app.post("/layout/svg")
    def layout_svg_ep(req: schemas.SvgRequest):
        mesh, markers = _mesh_of(req.mesh)
        lay = Layout(
            mesh=mesh,
            coords=np.asarray(req.coords, dtype=float),
            face_signed_area=np.zeros(mesh.n_faces),
        )
        svg = layout_svg(lay, radii=req.radii, markers=markers, labels=req.labels)
        return {"svg": svg}

    @app.post("/layout/develop")
    def layout_develop(req: schemas.MetricRequest):
        mesh, markers = _mesh_of(req.mesh)
        state = _state_of(mesh, req.state)
        lay = develop(mesh, state.edge_lengths())
        emb = embedding_check(lay)
        return {
            "coords": [[float(x), float(y)] for x, y in lay.coords],
            "embedded": emb.embedded,
            "overlap": list(emb.overlap) if emb.overlap else None,
        }

    return app


app = create_app()
