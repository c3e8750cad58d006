"""Weighted Delaunay predicates for generalized inversive distance packings.

An interior edge (i, j) shared by triangles (i, j, k) and (i, j, l) is
weighted Delaunay when theta_{ij,k} + theta_{ij,l} >= 0, using the signed
angles extended to +-pi/2 on degenerate faces. For doubly non-degenerate
edges this sign agrees with the sign of h_{ij,k} + h_{ij,l}.

Margins are reported at the smaller-id endpoint of each edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InadmissibleFace
from .packing import BatchGeometry, PackingState, TriangleClass

#: margins in [-ZERO_TOL, ZERO_TOL] count as weighted Delaunay but not strict
ZERO_TOL = 1e-10


@dataclass(frozen=True)
class DelaunayReport:
    margins: dict[tuple[int, int], float]  # interior edges only
    violations: list[tuple[int, int]]
    strict: bool

    def to_json_dict(self) -> dict:
        return {
            "margins": {f"{i}-{j}": v for (i, j), v in self.margins.items()},
            "violations": [f"{i}-{j}" for i, j in self.violations],
            "strict": self.strict,
        }


def _face_theta_at_edge(
    state: PackingState, geo: BatchGeometry, face: int, edge: tuple[int, int]
) -> float:
    tri = state.mesh.faces[face]
    if geo.cls[face] == TriangleClass.INADMISSIBLE:
        raise InadmissibleFace(face)
    li = tri.index(edge[0])
    lj = tri.index(edge[1])
    return float(geo.theta_signed[face, li, lj])


def edge_margin(
    state: PackingState,
    edge: tuple[int, int],
    geometry: BatchGeometry | None = None,
) -> float:
    """theta_{ij,k} + theta_{ij,l} over the two faces of an interior edge."""
    i, j = min(edge), max(edge)
    e = state.mesh.edge_index[(i, j)]
    faces = state.mesh.edge_faces[e]
    if len(faces) != 2:
        raise ValueError(f"edge {(i, j)} is not interior")
    geo = geometry if geometry is not None else state.geometry()
    return _face_theta_at_edge(state, geo, faces[0], (i, j)) + _face_theta_at_edge(
        state, geo, faces[1], (i, j)
    )


def is_weighted_delaunay(state: PackingState, geometry: BatchGeometry | None = None) -> DelaunayReport:
    """Evaluate every interior edge; ``strict`` requires every margin > ZERO_TOL."""
    geo = geometry if geometry is not None else state.geometry()
    bad = np.nonzero(geo.cls == TriangleClass.INADMISSIBLE)[0]
    if bad.size:
        raise InadmissibleFace(int(bad[0]))
    margins: dict[tuple[int, int], float] = {}
    violations: list[tuple[int, int]] = []
    for e in state.mesh.interior_edges():
        key = state.mesh.edges[e]
        m = edge_margin(state, key, geo)
        margins[key] = m
        if m < -ZERO_TOL:
            violations.append(key)
    strict = all(m > ZERO_TOL for m in margins.values())
    return DelaunayReport(margins=margins, violations=violations, strict=strict)
