"""Pydantic request/response models for the HTTP service.

The wire formats mirror the package's JSON conventions: meshes as
{"vertices": [[x,y]|null], "faces": [[i,j,k]], "markers": [p,q,r]}, packing
states as {"weights": {"i-j": I}, "labels": [...]}.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class MeshModel(BaseModel):
    vertices: Optional[list[Optional[list[float]]]] = None
    faces: list[list[int]]
    markers: Optional[list[int]] = None


class StateModel(BaseModel):
    weights: dict[str, float]
    labels: list[float]


class FlowConfigModel(BaseModel):
    steps: int = 32
    angle_floor: Optional[float] = None
    angle_ceiling: Optional[float] = None
    conductance_floor: float = 0.0
    curvature_tol: float = 1e-9
    seed: int = 0


class BuildMeshRequest(BaseModel):
    faces: list[list[int]]
    vertices: Optional[list[Optional[list[float]]]] = None


class StarRequest(BaseModel):
    n: int = Field(ge=3)


class SubdivideRequest(BaseModel):
    mesh: MeshModel
    n: int = Field(ge=1)


class HexApproxRequest(BaseModel):
    domain: list[list[float]]
    scale: float = Field(gt=0)
    markers: list[list[float]]


class BallRequest(BaseModel):
    mesh: MeshModel
    center: int
    radius: int = Field(ge=0)


class MetricRequest(BaseModel):
    mesh: MeshModel
    state: StateModel


class FlowRunRequest(BaseModel):
    mesh: MeshModel
    state: StateModel
    dirichlet: list[int]
    target: list[float]
    config: FlowConfigModel = FlowConfigModel()


class CornerFlowRequest(BaseModel):
    n: int = Field(ge=1)
    weight: float = Field(gt=1)
    alpha: float
    config: FlowConfigModel = FlowConfigModel()


class FlattenRequest(BaseModel):
    mesh: MeshModel  # markers required
    weight: float = Field(gt=1)
    subdiv: int = Field(ge=1)
    label: float = 0.0
    config: FlowConfigModel = FlowConfigModel()


class SpiralConfigModel(BaseModel):
    I: list[float]
    u: float = 0.0
    lam: float = Field(default=1.0, alias="lambda")
    mu: float = 1.0
    m: int = Field(default=4, ge=1)

    model_config = {"populate_by_name": True}


class SpiralConstantsRequest(BaseModel):
    I: list[float]
    u: float = 0.0


class RigidityRequest(BaseModel):
    weight: float = Field(gt=1)
    m: int = Field(ge=2)
    seed: int = 0
    random_trials: int = 20


class MaximalPrincipleRequest(BaseModel):
    samples: int = Field(gt=0)
    seed: int = 0
    star_sizes: list[int] = [5, 6, 7, 8]
    weight_min: float = 1.0
    weight_max: float = 5.0


class RingProbeRequest(BaseModel):
    n: int = Field(ge=3)
    weight: float = Field(gt=1)
    samples: int = Field(gt=0)
    seed: int = 0
    label_range: float = 1.0


class PipelineRequest(BaseModel):
    domain: list[list[float]]
    markers: list[list[float]]
    weight: float = Field(gt=1)
    scales: list[float]
    subdiv: int = 1
    flow: FlowConfigModel = FlowConfigModel()
    out_dir: Optional[str] = None
    seed: int = 0


class EvaluateMapRequest(BaseModel):
    mesh: MeshModel
    layout_src: list[list[float]]
    layout_dst: list[list[float]]
    points: list[list[float]]


class SvgRequest(BaseModel):
    mesh: MeshModel
    coords: list[list[float]]
    radii: Optional[list[float]] = None
    labels: bool = False
