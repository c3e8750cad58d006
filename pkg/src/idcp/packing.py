"""Per-triangle and per-vertex metric quantities of inversive distance circle packings.

Conventions, used throughout the package:

* per-vertex data is the label u, the radius is r = exp(u); labels are stored,
  never raw radii, so global scaling is exact and radii stay positive;
* per-edge weights I are > 1;
* inside a triangle, weights are indexed by the opposite vertex: I[k] is the
  weight on the edge joining the other two vertices, and lengths follow
  l_ij = sqrt(r_i^2 + r_j^2 + 2 r_i r_j I_k);
* kappa_i = 1/r_i, gamma_i = I_i + I_j I_k.

The admissibility discriminant

    Q = sum_i kappa_i^2 (1 - I_i^2) + 2 kappa_1 kappa_2 gamma_3
        + 2 kappa_1 kappa_3 gamma_2 + 2 kappa_2 kappa_3 gamma_1

classifies a triangle: Q > 0 non-degenerate, Q = 0 degenerate (flat at one
vertex), Q < 0 inadmissible. Angles extend continuously by constants over the
degenerate and inadmissible regions: pi at the flat/violating vertex, 0 at the
other two. The flat/violating vertex is the one whose kappa reaches the root

    root_i = [kappa_j gamma_k + kappa_k gamma_j
              + sqrt(S (kappa_j^2 + kappa_k^2 + 2 kappa_j kappa_k I_i))] / (I_i^2 - 1),

with S = I_1^2 + I_2^2 + I_3^2 + 2 I_1 I_2 I_3 - 1.

Geometric-center quantities for non-degenerate triangles:

    d_ij = (r_i^2 + r_i r_j I_ij) / l_ij            (> 0, not symmetric)
    h_small_k = kappa_k (1 - I_k^2) + kappa_i gamma_j + kappa_j gamma_i
    h_{ij,k} = r_1 r_2 r_3 kappa_k h_small_k / (sqrt(Q) l_ij)
    theta_{ij,k} = arctan(h_{ij,k} / d_ij)          in (-pi/2, pi/2)

(r_1 r_2 r_3 sqrt(Q) equals l_ij l_ik sin(theta_i), i.e. twice the area.)
On a degenerate triangle theta_{ij,k} is +pi/2 when the flat vertex is i or j
and -pi/2 when it is k. Angle variations are symmetric:
d(theta_i)/d(u_j) = h_{ij,k} / l_ij.

All functions are pure; batch forms operate on (..., 3) arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    AmbiguousDegeneracy,
    DegenerateFace,
    DegenerateInput,
    InadmissibleInput,
    IntervalNotAdmissible,
)
from .mesh import TriangulatedDisk

#: relative tolerance scale for the |Q| ~ 0 band; Q has homogeneity degree -2
#: in r, so the band is scaled by max(kappa^2 I^2, 1)
Q_TOL_SCALE = 1e-12

_P1 = np.array([1, 2, 0])
_P2 = np.array([2, 0, 1])


class TriangleClass(IntEnum):
    NON_DEGENERATE = 0
    DEGENERATE_FLAT = 1
    INADMISSIBLE = 2


@dataclass(frozen=True)
class BatchGeometry:
    """Vectorized per-triangle geometry; arrays share the leading batch shape.

    ``lengths[..., k]`` is the edge opposite local vertex k, ``h_edge[..., k]``
    is h_{ij,k} for that edge (NaN off the non-degenerate set), ``d[..., i, j]``
    the signed center-to-vertex distance, ``theta_signed[..., i, j]`` the
    signed angle at vertex i toward vertex j (extended on degenerate rows,
    NaN on inadmissible rows).
    """

    r: np.ndarray
    weight: np.ndarray
    lengths: np.ndarray
    Q: np.ndarray
    q_tol: np.ndarray
    cls: np.ndarray           # TriangleClass codes
    special_vertex: np.ndarray  # flat/violating local vertex, -1 when none
    angles: np.ndarray
    d: np.ndarray
    h_small: np.ndarray
    h_edge: np.ndarray
    eta_face: np.ndarray      # h_edge / lengths
    theta_signed: np.ndarray
    area: np.ndarray


def _roots(kappa: np.ndarray, weight: np.ndarray, S: np.ndarray) -> np.ndarray:
    kj, kk = kappa[..., _P1], kappa[..., _P2]
    g = weight + weight[..., _P1] * weight[..., _P2]
    num = kj * g[..., _P2] + kk * g[..., _P1]
    rad = S[..., None] * (kj**2 + kk**2 + 2.0 * kj * kk * weight)
    return (num + np.sqrt(np.maximum(rad, 0.0))) / (weight**2 - 1.0)


def batch_geometry(r, weight) -> BatchGeometry:
    """Compute every per-triangle quantity for radii ``r`` and opposite-indexed
    weights ``weight`` (both (..., 3), weights > 1)."""
    r = np.asarray(r, dtype=float)
    weight = np.asarray(weight, dtype=float)
    if r.shape[-1] != 3 or weight.shape != r.shape:
        raise ValueError("r and weight must both have shape (..., 3)")
    if np.any(weight <= 1.0):
        raise ValueError("all weights must be > 1")
    if np.any(r <= 0.0):
        raise ValueError("all radii must be positive")

    kappa = 1.0 / r
    g = weight + weight[..., _P1] * weight[..., _P2]
    rj, rk = r[..., _P1], r[..., _P2]
    lengths = np.sqrt(rj**2 + rk**2 + 2.0 * rj * rk * weight)

    Q = (kappa**2 * (1.0 - weight**2)).sum(-1) + 2.0 * (
        kappa[..., _P1] * kappa[..., _P2] * g
    ).sum(-1)
    q_tol = Q_TOL_SCALE * np.maximum(
        1.0, (kappa**2).max(-1) * (weight**2).max(-1)
    )

    S = (weight**2).sum(-1) + 2.0 * weight.prod(-1) - 1.0
    roots = _roots(kappa, weight, S)

    cls = np.zeros(Q.shape, dtype=np.int8)
    special = np.full(Q.shape, -1, dtype=np.int8)
    near_zero = np.abs(Q) <= q_tol
    negative = Q < -q_tol
    cls[near_zero] = TriangleClass.DEGENERATE_FLAT
    cls[negative] = TriangleClass.INADMISSIBLE

    rel = np.abs(kappa / roots - 1.0)
    if np.any(near_zero):
        flat = np.argmin(rel, axis=-1)
        special = np.where(near_zero, flat.astype(np.int8), special)
        bad = near_zero & (np.min(rel, axis=-1) > 1e-6)
        if np.any(bad):
            idx = np.argwhere(bad)[0]
            raise AmbiguousDegeneracy(
                f"|Q| within tolerance but no flat-vertex root matches at index {tuple(idx)}"
            )
    if np.any(negative):
        viol = np.argmax(kappa / roots, axis=-1)
        special = np.where(negative, viol.astype(np.int8), special)

    # extended angles
    nd = cls == TriangleClass.NON_DEGENERATE
    s = lengths.sum(-1) / 2.0
    margin = s[..., None] - lengths
    with np.errstate(invalid="ignore"):
        half_num = np.sqrt(np.maximum(margin[..., _P1] * margin[..., _P2], 0.0))
        half_den = np.sqrt(np.maximum(s[..., None] * margin, 0.0))
    angles = 2.0 * np.arctan2(half_num, half_den)
    if np.any(~nd):
        pattern = np.zeros_like(angles)
        sp = np.maximum(special, 0)
        np.put_along_axis(pattern, sp[..., None], np.pi, axis=-1)
        angles = np.where(nd[..., None], angles, pattern)

    # signed center distances d[..., i, j]
    d = np.zeros(r.shape[:-1] + (3, 3))
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            k = 3 - i - j
            d[..., i, j] = (r[..., i] ** 2 + r[..., i] * r[..., j] * weight[..., k]) / lengths[
                ..., k
            ]

    h_small = (
        kappa * (1.0 - weight**2)
        + kappa[..., _P1] * g[..., _P2]
        + kappa[..., _P2] * g[..., _P1]
    )
    rprod = r.prod(-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        twice_area = rprod * np.sqrt(np.maximum(Q, 0.0))
        h_edge = np.where(
            nd[..., None],
            (rprod**2)[..., None] * kappa * h_small / (twice_area[..., None] * lengths),
            np.nan,
        )
    eta_face = h_edge / lengths

    theta = np.full(d.shape, np.nan)
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            k = 3 - i - j
            theta[..., i, j] = np.arctan2(h_edge[..., k], d[..., i, j])
    theta = np.where(nd[..., None, None], theta, np.nan)
    deg = cls == TriangleClass.DEGENERATE_FLAT
    if np.any(deg):
        ext = np.zeros_like(theta)
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                k = 3 - i - j
                ext[..., i, j] = np.where(special == k, -np.pi / 2.0, np.pi / 2.0)
        theta = np.where(deg[..., None, None], ext, theta)

    return BatchGeometry(
        r=r,
        weight=weight,
        lengths=lengths,
        Q=Q,
        q_tol=q_tol,
        cls=cls,
        special_vertex=special,
        angles=angles,
        d=d,
        h_small=h_small,
        h_edge=h_edge,
        eta_face=eta_face,
        theta_signed=theta,
        area=twice_area / 2.0,
    )


# --- scalar operations --------------------------------------------------------

def edge_length(u_i: float, u_j: float, weight: float) -> float:
    """Packing length of a single edge from two labels and its weight."""
    if weight <= 1.0:
        raise ValueError("edge weight must be > 1")
    return math.sqrt(
        math.exp(2.0 * u_i) + math.exp(2.0 * u_j) + 2.0 * weight * math.exp(u_i + u_j)
    )


def triangle_Q(r: Sequence[float], weight: Sequence[float]) -> float:
    """Admissibility discriminant; its sign classifies the triangle."""
    return float(batch_geometry(np.asarray(r), np.asarray(weight)).Q)


@dataclass(frozen=True)
class Classification:
    kind: TriangleClass
    vertex: int | None  # flat or violating local vertex

    @property
    def is_non_degenerate(self) -> bool:
        return self.kind == TriangleClass.NON_DEGENERATE


def classify_triangle(r: Sequence[float], weight: Sequence[float]) -> Classification:
    geo = batch_geometry(np.asarray(r), np.asarray(weight))
    kind = TriangleClass(int(geo.cls))
    vertex = int(geo.special_vertex) if kind != TriangleClass.NON_DEGENERATE else None
    return Classification(kind=kind, vertex=vertex)


def extended_angles(r: Sequence[float], weight: Sequence[float]) -> np.ndarray:
    """Inner angles, continuously extended by constants off the admissible set."""
    return batch_geometry(np.asarray(r), np.asarray(weight)).angles


def center_distances(r: Sequence[float], weight: Sequence[float]) -> np.ndarray:
    """Signed distances d_ij from each vertex to the edge geometric center,
    as a 3x3 matrix (diagonal zero). Defined for any positive radii."""
    return batch_geometry(np.asarray(r), np.asarray(weight)).d


def perpendiculars(r: Sequence[float], weight: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """(h_{ij,k} per edge opposite k, h_small per vertex) for a non-degenerate
    triangle. h_small is defined everywhere; h_{ij,k} only when Q > 0."""
    geo = batch_geometry(np.asarray(r), np.asarray(weight))
    if geo.cls != TriangleClass.NON_DEGENERATE:
        raise DegenerateInput("perpendiculars need a non-degenerate triangle")
    return geo.h_edge, geo.h_small


def signed_angle(
    r: Sequence[float],
    weight: Sequence[float],
    edge: tuple[int, int],
    opposite: int,
) -> float:
    """theta_{ij,k}: signed angle at vertex i between the ray to j and the ray
    to the geometric center; extended to +-pi/2 on degenerate triangles."""
    i, j = edge
    if sorted((i, j, opposite)) != [0, 1, 2]:
        raise ValueError("edge and opposite must partition {0,1,2}")
    geo = batch_geometry(np.asarray(r), np.asarray(weight))
    if geo.cls == TriangleClass.INADMISSIBLE:
        raise InadmissibleInput("signed angle is undefined on inadmissible triangles")
    return float(geo.theta_signed[i, j])


def angle_jacobian(r: Sequence[float], weight: Sequence[float]) -> np.ndarray:
    """Matrix d(theta_i)/d(u_j); symmetric, rows sum to zero, negative diagonal."""
    geo = batch_geometry(np.asarray(r), np.asarray(weight))
    if geo.cls != TriangleClass.NON_DEGENERATE:
        raise DegenerateInput("angle jacobian needs a non-degenerate triangle")
    J = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            if i != j:
                k = 3 - i - j
                J[i, j] = geo.eta_face[k]
    np.fill_diagonal(J, -J.sum(axis=1))
    return J


def admissible_interval_r3(
    r1: float, r2: float, weight: Sequence[float]
) -> tuple[float, float]:
    """Open interval of r_3 values giving a non-degenerate triangle for fixed
    r_1, r_2 (upper end may be inf). Endpoints are degenerate packings."""
    I = np.asarray(weight, dtype=float)
    k1, k2 = 1.0 / r1, 1.0 / r2
    g = I + I[_P1] * I[_P2]
    # Q as a quadratic in kappa_3: a k3^2 + b k3 + c
    a = 1.0 - I[2] ** 2
    b = 2.0 * (k1 * g[1] + k2 * g[0])
    c = k1**2 * (1.0 - I[0] ** 2) + k2**2 * (1.0 - I[1] ** 2) + 2.0 * k1 * k2 * g[2]
    disc = b * b - 4.0 * a * c
    if disc <= 0.0:
        raise IntervalNotAdmissible("no admissible r_3 for the given r_1, r_2")
    sq = math.sqrt(disc)
    k_hi = (-b - sq) / (2.0 * a)  # a < 0: larger root
    k_lo = (-b + sq) / (2.0 * a)
    r_min = 1.0 / k_hi
    r_max = math.inf if k_lo <= 0.0 else 1.0 / k_lo
    return r_min, r_max


def monotonicity_probe(
    r1: float,
    r2: float,
    weight: Sequence[float],
    interval: tuple[float, float] | None = None,
    count: int = 100,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample theta_{12,3} on a grid of r_3 across the admissible interval
    (including degenerate endpoints); expected strictly increasing."""
    if interval is None:
        lo, hi = admissible_interval_r3(r1, r2, weight)
        if not math.isfinite(hi):
            hi = 1e3 * lo
    else:
        lo, hi = interval
        a_lo, a_hi = admissible_interval_r3(r1, r2, weight)
        if lo < a_lo * (1 - 1e-12) or hi > (a_hi * (1 + 1e-12) if math.isfinite(a_hi) else math.inf):
            raise IntervalNotAdmissible(
                f"[{lo}, {hi}] is not inside the closed admissible interval "
                f"[{a_lo}, {a_hi}]"
            )
    grid = np.linspace(lo, hi, count)
    r = np.stack(
        [np.full(count, r1), np.full(count, r2), grid], axis=-1
    )
    I = np.broadcast_to(np.asarray(weight, dtype=float), (count, 3))
    geo = batch_geometry(r, I)
    if np.any(geo.cls == TriangleClass.INADMISSIBLE):
        raise IntervalNotAdmissible("grid leaves the admissible closure")
    return grid, geo.theta_signed[:, 0, 1]


# --- packing states on a mesh ---------------------------------------------------

@dataclass
class PackingState:
    """Weights I > 1 per edge and labels u per vertex on a triangulated disk."""

    mesh: TriangulatedDisk
    weights: np.ndarray  # (E,)
    labels: np.ndarray   # (V,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.weights.shape != (self.mesh.n_edges,):
            raise ValueError("weights must have one entry per edge")
        if self.labels.shape != (self.mesh.n_vertices,):
            raise ValueError("labels must have one entry per vertex")
        if np.any(self.weights <= 1.0):
            raise ValueError("all edge weights must be > 1")
        if not np.all(np.isfinite(self.labels)):
            raise ValueError("labels must be finite")

    @classmethod
    def constant(
        cls, mesh: TriangulatedDisk, weight: float, label: float = 0.0
    ) -> "PackingState":
        return cls(
            mesh=mesh,
            weights=np.full(mesh.n_edges, float(weight)),
            labels=np.full(mesh.n_vertices, float(label)),
        )

    def with_labels(self, labels: np.ndarray) -> "PackingState":
        return PackingState(mesh=self.mesh, weights=self.weights, labels=labels)

    def shifted(self, factor: np.ndarray | float) -> "PackingState":
        """Conformally equivalent state with labels u + w."""
        return self.with_labels(self.labels + factor)

    def face_radii(self) -> np.ndarray:
        return np.exp(self.labels[self.mesh.face_array()])

    def face_weights(self) -> np.ndarray:
        return self.weights[self.mesh.face_edges]

    def geometry(self) -> BatchGeometry:
        return batch_geometry(self.face_radii(), self.face_weights())

    def edge_lengths(self) -> np.ndarray:
        """(E,) lengths computed directly from the edge table."""
        e = np.asarray(self.mesh.edges, dtype=np.int64)
        ri = np.exp(self.labels[e[:, 0]])
        rj = np.exp(self.labels[e[:, 1]])
        return np.sqrt(ri**2 + rj**2 + 2.0 * ri * rj * self.weights)

    def to_json_dict(self) -> dict:
        return {
            "weights": {
                f"{i}-{j}": float(w) for (i, j), w in zip(self.mesh.edges, self.weights)
            },
            "labels": [float(u) for u in self.labels],
        }

    @classmethod
    def from_json_dict(cls, mesh: TriangulatedDisk, data: Mapping) -> "PackingState":
        weights = np.empty(mesh.n_edges)
        weights.fill(np.nan)
        for key, w in data["weights"].items():
            i, j = (int(t) for t in key.split("-"))
            weights[mesh.edge_index[(min(i, j), max(i, j))]] = float(w)
        if np.any(np.isnan(weights)):
            raise ValueError("missing edge weights")
        return cls(mesh=mesh, weights=weights, labels=np.asarray(data["labels"], float))


def curvature(state: PackingState, geometry: BatchGeometry | None = None) -> np.ndarray:
    """Combinatorial curvature: 2*pi (interior) or pi (boundary) minus the sum
    of extended angles at each vertex."""
    mesh = state.mesh
    geo = geometry if geometry is not None else state.geometry()
    K = np.where(np.asarray(mesh.is_boundary), np.pi, 2.0 * np.pi)
    np.subtract.at(K, mesh.face_array().ravel(), geo.angles.ravel())
    return K


def conductance(state: PackingState, geometry: BatchGeometry | None = None) -> np.ndarray:
    """Per-edge conductance eta: sum of h_{ij,k}/l_ij over the incident faces.
    Requires every face non-degenerate."""
    mesh = state.mesh
    geo = geometry if geometry is not None else state.geometry()
    bad = np.nonzero(geo.cls != TriangleClass.NON_DEGENERATE)[0]
    if bad.size:
        raise DegenerateFace(int(bad[0]))
    eta = np.zeros(mesh.n_edges)
    np.add.at(eta, mesh.face_edges.ravel(), geo.eta_face.ravel())
    return eta


@dataclass(frozen=True)
class TriangleGeom:
    """Per-face report view of the batch geometry."""

    lengths: tuple[float, float, float]
    Q: float
    angles: tuple[float, float, float]
    kind: TriangleClass
    special_vertex: int | None
    d: list[list[float]]
    h_edge: tuple[float, float, float] | None
    h_small: tuple[float, float, float]
    theta_signed: list[list[float]] | None
    area: float | None


@dataclass(frozen=True)
class MetricReport:
    faces: list[TriangleGeom]
    curvature: np.ndarray
    conductance: np.ndarray | None  # None when some face is degenerate
    any_inadmissible: bool
    any_degenerate: bool
    min_angle: float
    min_conductance: float | None

    def to_json_dict(self, mesh: TriangulatedDisk) -> dict:
        def clean(x):
            if isinstance(x, list):
                return [clean(v) for v in x]
            if isinstance(x, float) and not math.isfinite(x):
                return None
            return x

        eta = None
        if self.conductance is not None:
            eta = {
                f"{i}-{j}": float(v)
                for (i, j), v in zip(mesh.edges, self.conductance)
            }
        return {
            "faces": [
                {
                    "lengths": list(f.lengths),
                    "Q": f.Q,
                    "angles": list(f.angles),
                    "class": f.kind.name,
                    "special_vertex": f.special_vertex,
                    "d": clean(f.d),
                    "h_edge": list(f.h_edge) if f.h_edge is not None else None,
                    "h_small": list(f.h_small),
                    "theta_signed": clean(f.theta_signed),
                    "area": f.area,
                }
                for f in self.faces
            ],
            "curvature": [float(k) for k in self.curvature],
            "conductance": eta,
            "flags": {
                "any_inadmissible": self.any_inadmissible,
                "any_degenerate": self.any_degenerate,
                "min_angle": self.min_angle,
                "min_conductance": self.min_conductance,
            },
        }


def metric_report(state: PackingState) -> MetricReport:
    geo = state.geometry()
    faces = []
    for f in range(state.mesh.n_faces):
        kind = TriangleClass(int(geo.cls[f]))
        nd = kind == TriangleClass.NON_DEGENERATE
        faces.append(
            TriangleGeom(
                lengths=tuple(float(x) for x in geo.lengths[f]),
                Q=float(geo.Q[f]),
                angles=tuple(float(a) for a in geo.angles[f]),
                kind=kind,
                special_vertex=None if nd else int(geo.special_vertex[f]),
                d=[[float(x) for x in row] for row in geo.d[f]],
                h_edge=tuple(float(x) for x in geo.h_edge[f]) if nd else None,
                h_small=tuple(float(x) for x in geo.h_small[f]),
                theta_signed=(
                    [[float(x) for x in row] for row in geo.theta_signed[f]]
                    if kind != TriangleClass.INADMISSIBLE
                    else None
                ),
                area=float(geo.area[f]) if nd else None,
            )
        )
    K = curvature(state, geo)
    any_inadm = bool(np.any(geo.cls == TriangleClass.INADMISSIBLE))
    any_deg = bool(np.any(geo.cls == TriangleClass.DEGENERATE_FLAT))
    eta = None
    min_eta = None
    if not any_inadm and not any_deg:
        eta = conductance(state, geo)
        min_eta = float(eta.min())
    return MetricReport(
        faces=faces,
        curvature=K,
        conductance=eta,
        any_inadmissible=any_inadm,
        any_degenerate=any_deg,
        min_angle=float(geo.angles.min()),
        min_conductance=min_eta,
    )
