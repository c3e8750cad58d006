"""Inversive distance circle packings on triangulated disks.

Core subpackages:

* :mod:`idcp.mesh` - triangulated disks, subdivision, hexagonal approximation
* :mod:`idcp.packing` - per-triangle and per-vertex packing metrics
* :mod:`idcp.delaunay` - weighted Delaunay predicates
* :mod:`idcp.flow` - prescribed-curvature flows and verification oracles
* :mod:`idcp.layout` - planar developments and piecewise-linear maps
* :mod:`idcp.spiral` - spiral hexagonal lattice experiments
* :mod:`idcp.pipeline` - end-to-end Riemann-mapping approximation
* :mod:`idcp.service` - FastAPI wrapper
"""

__version__ = "0.1.0"

from .delaunay import DelaunayReport, edge_margin, is_weighted_delaunay
from .flow import (
    FlowConfig,
    FlowProblem,
    FlowResult,
    assemble_dirichlet,
    corner_flow,
    flatten_disk,
    flow_velocity,
    integrate_flow,
    maximal_principle_campaign,
    maximal_principle_check,
    ring_constant_probe,
    solve_dirichlet,
)
from .layout import Layout, PLMap, develop, embedding_check, normalize_to_unit_triangle, pl_map
from .mesh import (
    MarkedDisk,
    TriangulatedDisk,
    build_from_faces,
    combinatorial_ball,
    hexagonal_approximation,
    standard_subdivision,
    star_polygon,
)
from .packing import (
    PackingState,
    TriangleClass,
    angle_jacobian,
    classify_triangle,
    center_distances,
    conductance,
    curvature,
    edge_length,
    extended_angles,
    metric_report,
    monotonicity_probe,
    perpendiculars,
    signed_angle,
    triangle_Q,
)
from .pipeline import ConvergenceReport, PipelineConfig, evaluate_map, export_artifacts, run_pipeline
from .spiral import (
    SpiralConfig,
    rigidity_experiment,
    solve_degenerate_constants,
    spiral_state,
    verify_spiral_flatness,
)

__all__ = [
    "__version__",
    "DelaunayReport", "edge_margin", "is_weighted_delaunay",
    "FlowConfig", "FlowProblem", "FlowResult", "assemble_dirichlet",
    "corner_flow", "flatten_disk", "flow_velocity", "integrate_flow",
    "maximal_principle_campaign", "maximal_principle_check",
    "ring_constant_probe", "solve_dirichlet",
    "Layout", "PLMap", "develop", "embedding_check",
    "normalize_to_unit_triangle", "pl_map",
    "MarkedDisk", "TriangulatedDisk", "build_from_faces", "combinatorial_ball",
    "hexagonal_approximation", "standard_subdivision", "star_polygon",
    "PackingState", "TriangleClass", "angle_jacobian", "classify_triangle",
    "center_distances", "conductance", "curvature", "edge_length",
    "extended_angles", "metric_report", "monotonicity_probe",
    "perpendiculars", "signed_angle", "triangle_Q",
    "ConvergenceReport", "PipelineConfig", "evaluate_map", "export_artifacts",
    "run_pipeline",
    "SpiralConfig", "rigidity_experiment", "solve_degenerate_constants",
    "spiral_state", "verify_spiral_flatness",
]
