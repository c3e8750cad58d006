"""Prescribed-curvature flows driven by the conductance Laplacian.

The flow interpolates curvature linearly in time: K(w(t)) = (1-t) K0 + t K*.
Differentiating gives the velocity system

    (Lap w')_i = K*_i - K0_i   on free vertices,   w' = 0 on the Dirichlet set,

where Lap is the graph Laplacian with the packing conductances eta as edge
coefficients, reduced to the free vertices (diagonal keeps the full-star sum).
Strict weighted Delaunay (eta > 0 everywhere) makes the reduced system
symmetric positive definite.

Integration is classical four-stage Runge-Kutta with step halving near the
angle and conductance floors; a terminal Newton-style correction (repeated
velocity solves against the curvature residual, whose exact Jacobian is the
same reduced Laplacian) pins the endpoint curvature.

The module also carries the verification oracles for the star maximal
principle and the ring-lemma constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .delaunay import is_weighted_delaunay
from .errors import (
    CornerDegreeUnsupported,
    HypothesesNotMet,
    NonPositiveConductance,
    OverlappingCornerBalls,
    RootNotBracketed,
    SolverFailure,
    SubdivisionTooCoarse,
)
from .mesh import MarkedDisk, SubdividedDisk, TriangulatedDisk, standard_subdivision, build_from_faces
from .packing import PackingState, TriangleClass, batch_geometry, curvature

TWO_PI = 2.0 * math.pi


def default_theta0(weight_max: float) -> float:
    """Half-width added to the [pi/6, pi/2] angle corridor."""
    return min(math.pi / 1000.0, math.asin(1.0 / (10.0 * (20.0 + weight_max))))


@dataclass(frozen=True)
class FlowConfig:
    steps: int = 32
    angle_floor: float | None = None     # default pi/6 - theta0
    angle_ceiling: float | None = None   # default pi/2 + theta0
    conductance_floor: float = 0.0
    curvature_tol: float = 1e-9
    max_corrections: int = 50
    seed: int = 0

    def resolved(self, weight_max: float) -> "FlowConfig":
        t0 = default_theta0(weight_max)
        floor = self.angle_floor if self.angle_floor is not None else math.pi / 6.0 - t0
        ceil = self.angle_ceiling if self.angle_ceiling is not None else math.pi / 2.0 + t0
        return replace(self, angle_floor=floor, angle_ceiling=ceil)

    def to_json_dict(self) -> dict:
        return {
            "steps": self.steps,
            "angle_floor": self.angle_floor,
            "angle_ceiling": self.angle_ceiling,
            "conductance_floor": self.conductance_floor,
            "curvature_tol": self.curvature_tol,
            "seed": self.seed,
        }


# --- Dirichlet operator ---------------------------------------------------------

@dataclass
class DirichletOperator:
    """Conductance Laplacian reduced to the free vertices.

    Off-diagonal entries are -eta_ij for edges with both ends free; diagonal
    entries sum eta over the full vertex star, including neighbors in the
    Dirichlet set. ``boundary_coupling`` carries the -eta entries into the
    Dirichlet vertices so ``apply`` can act on full vertex vectors.
    """

    mesh: TriangulatedDisk
    free: np.ndarray       # free vertex ids
    index: np.ndarray      # (V,) position among free, -1 for Dirichlet
    matrix: sparse.csc_matrix
    boundary_coupling: sparse.csr_matrix = field(repr=False, default=None)
    dirichlet_vertices: np.ndarray = field(repr=False, default=None)
    _lu: object | None = field(default=None, repr=False)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Laplacian action on a full vertex vector, restricted to free rows."""
        return np.asarray(
            self.matrix @ values[self.free]
            + self.boundary_coupling @ values[self.dirichlet_vertices]
        )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for the free values with one step of iterative refinement."""
        try:
            if self._lu is None:
                self._lu = splu(self.matrix)
            x = self._lu.solve(rhs)
            x += self._lu.solve(rhs - self.matrix @ x)
        except RuntimeError as exc:  # singular or non-positive pivot
            raise SolverFailure(str(exc)) from exc
        resid = np.abs(self.matrix @ x - rhs).max() if rhs.size else 0.0
        if not np.isfinite(resid) or resid > 1e-10 * (1.0 + np.abs(rhs).max(initial=0.0)):
            raise SolverFailure(f"residual {resid:.3e} too large")
        return x


def assemble_dirichlet(
    state: PackingState,
    dirichlet: Sequence[int] | np.ndarray,
    eta: np.ndarray | None = None,
) -> DirichletOperator:
    """Build the reduced operator for the current conductances."""
    mesh = state.mesh
    if eta is None:
        from .packing import conductance

        eta = conductance(state)
    bad = np.nonzero(eta <= 0.0)[0]
    if bad.size:
        e = int(bad[0])
        raise NonPositiveConductance(mesh.edges[e], float(eta[e]))
    dmask = np.zeros(mesh.n_vertices, dtype=bool)
    dmask[np.asarray(list(dirichlet), dtype=np.int64)] = True
    if not dmask.any():
        raise ValueError("Dirichlet set must be nonempty")
    free = np.nonzero(~dmask)[0]
    index = np.full(mesh.n_vertices, -1, dtype=np.int64)
    index[free] = np.arange(free.size)

    edges = np.asarray(mesh.edges, dtype=np.int64)
    i, j = edges[:, 0], edges[:, 1]
    rows, cols, vals = [], [], []
    # diagonal: full-star sums
    for end in (i, j):
        sel = index[end] >= 0
        rows.append(index[end][sel])
        cols.append(index[end][sel])
        vals.append(eta[sel])
    both = (index[i] >= 0) & (index[j] >= 0)
    rows.append(index[i][both])
    cols.append(index[j][both])
    vals.append(-eta[both])
    rows.append(index[j][both])
    cols.append(index[i][both])
    vals.append(-eta[both])
    mat = sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(free.size, free.size),
    )

    # coupling into Dirichlet neighbors, used by apply()
    dverts = np.nonzero(dmask)[0]
    didx = np.full(mesh.n_vertices, -1, dtype=np.int64)
    didx[dverts] = np.arange(dverts.size)
    cross = (index[i] >= 0) & (index[j] < 0)
    r2 = [index[i][cross]]
    c2 = [didx[j][cross]]
    v2 = [-eta[cross]]
    cross = (index[j] >= 0) & (index[i] < 0)
    r2.append(index[j][cross])
    c2.append(didx[i][cross])
    v2.append(-eta[cross])
    coupling = sparse.csr_matrix(
        (np.concatenate(v2), (np.concatenate(r2), np.concatenate(c2))),
        shape=(free.size, dverts.size),
    )
    return DirichletOperator(
        mesh=mesh,
        free=free,
        index=index,
        matrix=mat,
        boundary_coupling=coupling,
        dirichlet_vertices=dverts,
    )


def solve_dirichlet(op: DirichletOperator, rhs: np.ndarray) -> np.ndarray:
    """Solve op x = rhs for the free-vertex values."""
    return op.solve(np.asarray(rhs, dtype=float))


def flow_velocity(
    state: PackingState,
    dirichlet: Sequence[int] | np.ndarray,
    delta_K: np.ndarray,
) -> np.ndarray:
    """Velocity w' with (Lap w')_i = delta_K_i on free vertices, 0 on V0."""
    op = assemble_dirichlet(state, dirichlet)
    w = np.zeros(state.mesh.n_vertices)
    w[op.free] = op.solve(np.asarray(delta_K, dtype=float)[op.free])
    return w


# --- the interpolation flow -----------------------------------------------------

@dataclass(frozen=True)
class FlowProblem:
    state: PackingState
    dirichlet: tuple[int, ...]
    target: np.ndarray  # (V,), entries on the Dirichlet set are ignored
    config: FlowConfig = FlowConfig()

    def __post_init__(self):
        if len(self.dirichlet) == 0:
            raise ValueError("Dirichlet set must be nonempty")
        t = np.asarray(self.target, dtype=float)
        if t.shape != (self.state.mesh.n_vertices,):
            raise ValueError("target must have one entry per vertex")
        if not np.all(np.isfinite(t)):
            raise ValueError("target curvature must be finite")
        object.__setattr__(self, "target", t)


@dataclass
class TrajectorySample:
    t: float
    step: float
    min_angle: float
    max_angle: float
    min_eta: float
    drift: float
    grad_max: float = math.nan        # max edge gradient eta_ij |w'_i - w'_j|
    min_face_eta: float = math.nan    # per-face conductance terms h/l
    max_face_eta: float = math.nan
    max_radius_ratio: float = math.nan


@dataclass
class FlowResult:
    status: str  # Completed | AbortedAngle | AbortedConductance | SolverFailure
    w: np.ndarray
    trajectory: list[TrajectorySample]
    detail: dict
    curvature_final: np.ndarray | None = None

    @property
    def completed(self) -> bool:
        return self.status == "Completed"

    def to_json_dict(self) -> dict:
        return {
            "status": self.status,
            "w": [float(x) for x in self.w],
            "trajectory": [
                {
                    "t": s.t,
                    "step": s.step,
                    "min_angle": s.min_angle,
                    "max_angle": s.max_angle,
                    "min_eta": s.min_eta,
                    "drift": s.drift,
                }
                for s in self.trajectory
            ],
            "detail": {
                k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                for k, v in self.detail.items()
            },
        }


class _CorridorExit(Exception):
    def __init__(self, status: str, detail: dict):
        self.status = status
        self.detail = detail
        super().__init__(status)


@dataclass
class _Metrics:
    state: PackingState
    geo: object
    eta: np.ndarray
    K: np.ndarray
    min_angle: float
    max_angle: float
    min_eta: float
    min_face_eta: float
    max_face_eta: float
    max_radius_ratio: float


class _Evaluator:
    """Metric evaluation at labels u0 + w with corridor checks."""

    def __init__(self, problem: FlowProblem, config: FlowConfig):
        self.base = problem.state
        self.dirichlet = np.asarray(problem.dirichlet, dtype=np.int64)
        self.config = config
        self.mesh = problem.state.mesh
        e = np.asarray(self.mesh.edges, dtype=np.int64)
        self._ei, self._ej = e[:, 0], e[:, 1]

    def metrics(self, w: np.ndarray) -> _Metrics:
        from .packing import conductance as _conductance

        st = self.base.shifted(w)
        geo = st.geometry()
        min_angle = float(geo.angles.min())
        max_angle = float(geo.angles.max())
        cfg = self.config
        if np.any(geo.cls != TriangleClass.NON_DEGENERATE):
            f = int(np.nonzero(geo.cls != TriangleClass.NON_DEGENERATE)[0][0])
            raise _CorridorExit("AbortedAngle", {"face": f, "reason": "degenerate face"})
        if min_angle < cfg.angle_floor or max_angle > cfg.angle_ceiling:
            f = int(np.argmin(geo.angles.min(axis=-1)))
            raise _CorridorExit(
                "AbortedAngle",
                {"face": f, "min_angle": min_angle, "max_angle": max_angle},
            )
        eta = _conductance(st, geo)
        min_eta = float(eta.min())
        if min_eta <= cfg.conductance_floor:
            e = int(np.argmin(eta))
            raise _CorridorExit(
                "AbortedConductance", {"edge": self.mesh.edges[e], "min_eta": min_eta}
            )
        K = curvature(st, geo)
        return _Metrics(
            state=st,
            geo=geo,
            eta=eta,
            K=K,
            min_angle=min_angle,
            max_angle=max_angle,
            min_eta=min_eta,
            min_face_eta=float(geo.eta_face.min()),
            max_face_eta=float(geo.eta_face.max()),
            max_radius_ratio=float((geo.r.max(axis=-1) / geo.r.min(axis=-1)).max()),
        )

    def velocity(self, w: np.ndarray, delta_K: np.ndarray) -> tuple[np.ndarray, _Metrics]:
        m = self.metrics(w)
        op = assemble_dirichlet(m.state, self.dirichlet, eta=m.eta)
        v = np.zeros(self.mesh.n_vertices)
        v[op.free] = op.solve(delta_K[op.free])
        return v, m

    def edge_gradient_max(self, velocity_field: np.ndarray, eta: np.ndarray) -> float:
        return float(
            (eta * np.abs(velocity_field[self._ei] - velocity_field[self._ej])).max()
        )


def integrate_flow(problem: FlowProblem) -> FlowResult:
    """Integrate the curvature interpolation flow from t = 0 to 1.

    The curvature difference K* - K0 is constant in t, so along the exact flow
    K(w(t)) traces the linear interpolation. After reaching t = 1 a correction
    loop drives the free-vertex curvature residual below ``curvature_tol``.
    """
    cfg = problem.config.resolved(float(problem.state.weights.max()))
    ev = _Evaluator(problem, cfg)
    mesh = problem.state.mesh
    V = mesh.n_vertices
    free_mask = np.ones(V, dtype=bool)
    free_mask[list(problem.dirichlet)] = False

    try:
        m0 = ev.metrics(np.zeros(V))
    except _CorridorExit as exc:
        return FlowResult(status=exc.status, w=np.zeros(V), trajectory=[], detail=exc.detail)
    report = is_weighted_delaunay(problem.state)
    if not report.strict:
        raise ValueError("initial state must be strictly weighted Delaunay")

    K0 = m0.K
    delta_K = np.where(free_mask, problem.target - K0, 0.0)
    corridor_width = cfg.angle_ceiling - cfg.angle_floor
    eta_ref = m0.min_eta - cfg.conductance_floor

    base_h = 1.0 / cfg.steps
    min_step = base_h / 8.0
    w = np.zeros(V)
    t = 0.0
    trajectory: list[TrajectorySample] = []
    max_drift = 0.0
    dK_norm = float(np.abs(delta_K).max(initial=0.0))
    h = base_h

    def proximity(mn, mx, me):
        margin = min(mn - cfg.angle_floor, cfg.angle_ceiling - mx)
        near_angle = margin < 0.1 * corridor_width
        near_eta = (me - cfg.conductance_floor) < 0.1 * eta_ref
        return near_angle or near_eta

    while t < 1.0 - 1e-14:
        h = min(h, 1.0 - t)
        try:
            k1, m1 = ev.velocity(w, delta_K)
            k2, _ = ev.velocity(w + 0.5 * h * k1, delta_K)
            k3, _ = ev.velocity(w + 0.5 * h * k2, delta_K)
            k4, _ = ev.velocity(w + h * k3, delta_K)
            w_new = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            mn = ev.metrics(w_new)
        except _CorridorExit as exc:
            if h > min_step * (1.0 + 1e-12):
                h = max(h / 2.0, min_step)
                continue
            detail = dict(exc.detail)
            detail["t"] = t
            return FlowResult(status=exc.status, w=w, trajectory=trajectory, detail=detail)
        except SolverFailure as exc:
            return FlowResult(
                status="SolverFailure", w=w, trajectory=trajectory, detail={"t": t, "error": str(exc)}
            )
        near_floor = proximity(mn.min_angle, mn.max_angle, mn.min_eta)
        if near_floor and h > min_step * (1.0 + 1e-12):
            h = max(h / 2.0, min_step)
            continue
        w = w_new
        t += h
        K_lin = K0 + t * delta_K
        drift = float(np.abs((mn.K - K_lin)[free_mask]).max(initial=0.0))
        max_drift = max(max_drift, drift)
        trajectory.append(
            TrajectorySample(
                t=t,
                step=h,
                min_angle=mn.min_angle,
                max_angle=mn.max_angle,
                min_eta=mn.min_eta,
                drift=drift,
                grad_max=ev.edge_gradient_max(k1, m1.eta),
                min_face_eta=mn.min_face_eta,
                max_face_eta=mn.max_face_eta,
                max_radius_ratio=mn.max_radius_ratio,
            )
        )
        if not near_floor:
            h = min(h * 2.0, base_h)

    # terminal correction: Newton steps on K(w) = target over the free set
    corrections = 0
    resid = math.inf
    try:
        for corrections in range(cfg.max_corrections + 1):
            m = ev.metrics(w)
            resid = float(np.abs((m.K - problem.target)[free_mask]).max(initial=0.0))
            if resid < cfg.curvature_tol:
                break
            op = assemble_dirichlet(m.state, ev.dirichlet, eta=m.eta)
            w = w + _full(op, op.solve((problem.target - m.K)[op.free]), V)
        else:
            return FlowResult(
                status="SolverFailure",
                w=w,
                trajectory=trajectory,
                detail={"t": 1.0, "error": f"correction stalled at residual {resid:.3e}"},
            )
    except _CorridorExit as exc:
        detail = dict(exc.detail)
        detail["t"] = 1.0
        return FlowResult(status=exc.status, w=w, trajectory=trajectory, detail=detail)
    except SolverFailure as exc:
        return FlowResult(
            status="SolverFailure", w=w, trajectory=trajectory, detail={"t": 1.0, "error": str(exc)}
        )

    m = ev.metrics(w)
    return FlowResult(
        status="Completed",
        w=w,
        trajectory=trajectory,
        curvature_final=m.K,
        detail={
            "max_drift": max_drift,
            "corrections": corrections,
            "residual": resid,
            "min_angle_final": m.min_angle,
            "max_angle_final": m.max_angle,
            "min_eta_final": m.min_eta,
            "min_angle_traj": min((s.min_angle for s in trajectory), default=m.min_angle),
            "max_angle_traj": max((s.max_angle for s in trajectory), default=m.max_angle),
        },
    )


def _full(op: DirichletOperator, free_values: np.ndarray, V: int) -> np.ndarray:
    out = np.zeros(V)
    out[op.free] = free_values
    return out


# --- corner flow ----------------------------------------------------------------

@dataclass
class CornerFlowResult:
    subdivision: SubdividedDisk
    apex: int
    side: tuple[int, ...]      # Dirichlet vertices (side BC)
    alpha: float
    result: FlowResult
    ledger: dict               # per-vertex |K(1)-K(0)| on V0, max and sum


def corner_flow(n: int, weight: float, alpha: float, config: FlowConfig = FlowConfig()) -> CornerFlowResult:
    """Deform an n-subdivided equilateral triangle so the apex angle becomes
    alpha, pinning the opposite side; the discrete analogue of z^(3 alpha/pi).
    """
    if not (math.pi / 6.0 - 1e-12 <= alpha <= math.pi / 2.0 + 1e-12):
        raise ValueError("alpha must lie in [pi/6, pi/2]")
    sub = standard_subdivision(build_from_faces([(0, 1, 2)]), n)
    apex = sub.old_to_new[0]
    side = tuple(
        sorted(v for (f, (a, b, c)), v in sub.vertex_of.items() if f == 0 and a == 0)
    )
    mesh = sub.mesh
    state = PackingState.constant(mesh, weight)
    K0 = curvature(state)
    target = np.zeros(mesh.n_vertices)
    target[apex] = math.pi - alpha
    problem = FlowProblem(state=state, dirichlet=side, target=target, config=config)
    result = integrate_flow(problem)
    ledger: dict = {"per_vertex": {}, "max": None, "sum": None}
    if result.completed:
        K1 = result.curvature_final
        diffs = {int(v): float(abs(K1[v] - K0[v])) for v in side}
        ledger = {
            "per_vertex": diffs,
            "max": max(diffs.values()),
            "sum": sum(diffs.values()),
        }
    return CornerFlowResult(
        subdivision=sub, apex=apex, side=side, alpha=alpha, result=result, ledger=ledger
    )


# --- two-step flattening ----------------------------------------------------------

@dataclass
class CornerInfo:
    vertex: int          # coarse vertex id
    degree: int          # graph degree (= incident faces + 1)
    faces: tuple[int, ...]  # incident coarse faces in fan order
    alpha: float


@dataclass
class FlattenResult:
    subdivision: SubdividedDisk
    markers_fine: tuple[int, int, int]
    state0: PackingState
    w_bar: np.ndarray
    step2: FlowResult
    factor: np.ndarray
    corners: list[CornerInfo]
    corner_results: dict[int, CornerFlowResult]  # keyed by degree
    detail: dict

    @property
    def completed(self) -> bool:
        return self.step2.completed


def _boundary_fan(mesh: TriangulatedDisk, v: int) -> list[int]:
    """Incident faces of a boundary vertex ordered across shared interior edges."""
    faces = list(mesh.vertex_faces[v])
    if len(faces) == 1:
        return faces
    adj: dict[int, list[int]] = {f: [] for f in faces}
    for a in faces:
        for b in faces:
            if a < b and len(set(mesh.faces[a]) & set(mesh.faces[b])) == 2:
                adj[a].append(b)
                adj[b].append(a)
    ends = [f for f in faces if len(adj[f]) == 1]
    start = min(ends)
    order = [start]
    prev = None
    while len(order) < len(faces):
        cur = order[-1]
        nxt = [g for g in adj[cur] if g != prev]
        prev = cur
        order.append(nxt[0])
    return order


def find_corners(marked: MarkedDisk) -> list[CornerInfo]:
    """Non-marker boundary vertices with nonzero equilateral curvature."""
    mesh = marked.mesh
    corners = []
    for v in mesh.boundary_cycle:
        if v in marked.markers:
            if len(mesh.vertex_faces[v]) != 1:
                raise ValueError(f"marker {v} must have exactly one incident face")
            continue
        fc = len(mesh.vertex_faces[v])
        if fc == 3:
            continue
        degree = fc + 1
        if degree not in (3, 4, 5, 6):
            raise CornerDegreeUnsupported(v, degree)
        corners.append(
            CornerInfo(
                vertex=v,
                degree=degree,
                faces=tuple(_boundary_fan(mesh, v)),
                alpha=math.pi / (degree - 1),
            )
        )
    return corners


def flatten_disk(
    marked: MarkedDisk,
    weight: float,
    subdiv: int,
    config: FlowConfig = FlowConfig(),
    label: float = 0.0,
) -> FlattenResult:
    """Two-step discrete conformal flattening of an equilateral disk.

    Step 1 diffuses each corner's curvature into the combinatorial ball of
    radius floor(subdiv/3) by gluing identical corner-flow factors over the
    corner's sectors. Step 2 runs the interpolation flow to the flat target
    with curvature 2*pi/3 at the three markers; one marker serves as the
    Dirichlet gauge and the other two carry explicit targets, so the third
    marker's curvature is pinned by Gauss-Bonnet.
    """
    coarse = marked.mesh
    for v in range(coarse.n_vertices):
        if not coarse.is_boundary[v] and len(coarse.vertex_faces[v]) != 6:
            raise ValueError(
                f"interior vertex {v} has {len(coarse.vertex_faces[v])} faces; "
                "mesh must come from an equilateral triangulation"
            )
    corners = find_corners(marked)
    sub = standard_subdivision(coarse, subdiv)
    fine = sub.mesh
    markers_fine = tuple(sub.old_to_new[m] for m in marked.markers)
    state0 = PackingState.constant(fine, weight, label=label)

    k = subdiv // 3
    active = [c for c in corners if c.degree != 4]
    if active and k < 1:
        raise SubdivisionTooCoarse(
            f"subdivision {subdiv} gives corner balls of radius 0; need subdiv >= 3"
        )

    w_bar = np.zeros(fine.n_vertices)
    corner_results: dict[int, CornerFlowResult] = {}
    ball_sets: dict[int, set[int]] = {}
    max_asym = 0.0

    for c in active:
        if c.degree not in corner_results:
            corner_results[c.degree] = corner_flow(k, weight, c.alpha, config)
            res = corner_results[c.degree].result
            if not res.completed:
                return FlattenResult(
                    subdivision=sub,
                    markers_fine=markers_fine,
                    state0=state0,
                    w_bar=w_bar,
                    step2=res,
                    factor=w_bar,
                    corners=corners,
                    corner_results=corner_results,
                    detail={"failed_corner_degree": c.degree},
                )
        cres = corner_results[c.degree]
        std = cres.subdivision
        w_std = cres.result.w
        # symmetry across the apex bisector makes sector gluing consistent
        w_sym = np.empty_like(w_std)
        for (f, (a, b, cc)), vid in std.vertex_of.items():
            mirror = std.vertex_of[(f, (a, cc, b))]
            asym = abs(w_std[vid] - w_std[mirror])
            max_asym = max(max_asym, asym)
            w_sym[vid] = 0.5 * (w_std[vid] + w_std[mirror])
        if max_asym > 1e-12:
            raise SolverFailure(
                f"corner factor not symmetric across sectors: {max_asym:.3e} > 1e-12"
            )

        ball: set[int] = set()
        for f in c.faces:
            loc = coarse.faces[f].index(c.vertex)
            for (ff, bary), vid in sub.vertex_of.items():
                if ff != f or bary[loc] < subdiv - k:
                    continue
                a_std = bary[loc] - (subdiv - k)
                rest = [bary[(loc + 1) % 3], bary[(loc + 2) % 3]]
                std_vid = std.vertex_of[(0, (a_std, rest[0], rest[1]))]
                w_bar[vid] = w_sym[std_vid]
                ball.add(vid)
        for other, vs in ball_sets.items():
            if vs & ball:
                raise OverlappingCornerBalls(
                    f"corner balls of vertices {other} and {c.vertex} intersect"
                )
        ball_sets[c.vertex] = ball

    # Step 2: flow to the flat metric with 2pi/3 at the markers
    p, q, r = markers_fine
    target = np.zeros(fine.n_vertices)
    target[q] = TWO_PI / 3.0
    target[r] = TWO_PI / 3.0
    problem = FlowProblem(
        state=state0.shifted(w_bar), dirichlet=(p,), target=target, config=config
    )
    step2 = integrate_flow(problem)
    factor = w_bar + step2.w
    detail = {"ball_radius": k, "max_sector_asymmetry": max_asym}
    if step2.completed:
        K = step2.curvature_final
        detail["marker_curvatures"] = [float(K[m]) for m in markers_fine]
        detail["max_abs_free_curvature"] = float(
            np.abs(np.delete(K, list(markers_fine))).max()
        )
    return FlattenResult(
        subdivision=sub,
        markers_fine=markers_fine,
        state0=state0,
        w_bar=w_bar,
        step2=step2,
        factor=factor,
        corners=corners,
        corner_results=corner_results,
        detail=detail,
    )


# --- maximal principle oracle -----------------------------------------------------

_HYP_TOL = 1e-12
_PROP_TOL = 1e-9


@dataclass(frozen=True)
class MaximalPrincipleVerdict:
    proportional: bool
    constant: float | None
    max_relative_deviation: float


def _star_face_arrays(n: int, radii: np.ndarray, spoke_w: np.ndarray, rim_w: np.ndarray):
    """(S, n, 3) radii and opposite-indexed weights for star triangulations.

    ``radii[..., 0]`` is the center; face i has vertices (0, i, i+1 cyclic).
    ``spoke_w[..., i-1]`` is the weight of edge (0, i), ``rim_w[..., i-1]``
    of edge (i, i+1).
    """
    S = radii.shape[:-1]
    r = np.empty(S + (n, 3))
    w = np.empty(S + (n, 3))
    idx = np.arange(n)
    nxt = (idx + 1) % n
    r[..., :, 0] = radii[..., :1]
    r[..., :, 1] = radii[..., 1 + idx]
    r[..., :, 2] = radii[..., 1 + nxt]
    w[..., :, 0] = rim_w[..., idx]       # opposite the center
    w[..., :, 1] = spoke_w[..., nxt]     # opposite vertex i: edge (0, i+1)
    w[..., :, 2] = spoke_w[..., idx]     # opposite vertex i+1: edge (0, i)
    return r, w


def _star_metrics(n: int, radii: np.ndarray, spoke_w: np.ndarray, rim_w: np.ndarray):
    """Center curvature, spoke Delaunay margins and admissibility flags."""
    r, w = _star_face_arrays(n, radii, spoke_w, rim_w)
    geo = batch_geometry(r, w)
    admissible = np.all(geo.cls != TriangleClass.INADMISSIBLE, axis=-1)
    K0 = TWO_PI - geo.angles[..., 0].sum(-1)
    # margin of spoke (0, i): theta in face i-1 (center toward local 2)
    # plus theta in face i (center toward local 1)
    th_prev = geo.theta_signed[..., 0, 2]
    th_next = geo.theta_signed[..., 0, 1]
    idx = np.arange(n)
    margins = th_prev[..., (idx - 1) % n] + th_next[..., idx]
    return K0, margins, admissible, geo


def maximal_principle_check(
    n: int,
    radii: Sequence[float],
    radii_ref: Sequence[float],
    spoke_w: Sequence[float],
    rim_w: Sequence[float],
) -> MaximalPrincipleVerdict:
    """Check the star maximal principle hypotheses for the pair (r, r_ref) and
    report whether r is a constant multiple of r_ref.

    Raises :class:`HypothesesNotMet` when a precondition or hypothesis fails:
    both packings generalized weighted Delaunay, K0(r) <= K0(r_ref), and
    max_i r_i / r_ref_i <= r_0 / r_ref_0.
    """
    r = np.asarray(radii, dtype=float)
    rb = np.asarray(radii_ref, dtype=float)
    sw = np.asarray(spoke_w, dtype=float)
    rw = np.asarray(rim_w, dtype=float)
    K0_r, m_r, adm_r, _ = _star_metrics(n, r, sw, rw)
    K0_b, m_b, adm_b, _ = _star_metrics(n, rb, sw, rw)
    if not bool(adm_r):
        raise HypothesesNotMet("r has an inadmissible face")
    if not bool(adm_b):
        raise HypothesesNotMet("r_ref has an inadmissible face")
    if float(m_r.min()) < -_HYP_TOL:
        raise HypothesesNotMet("r is not generalized weighted Delaunay")
    if float(m_b.min()) < -_HYP_TOL:
        raise HypothesesNotMet("r_ref is not generalized weighted Delaunay")
    if float(K0_r) > float(K0_b) + _HYP_TOL:
        raise HypothesesNotMet("K0(r) > K0(r_ref)")
    ratio = r / rb
    if float(ratio[1:].max()) > float(ratio[0]) * (1.0 + _HYP_TOL):
        raise HypothesesNotMet("max boundary ratio exceeds the center ratio")
    c = float(ratio[0])
    dev = float(np.abs(ratio / c - 1.0).max())
    return MaximalPrincipleVerdict(
        proportional=dev <= _PROP_TOL, constant=c if dev <= _PROP_TOL else None,
        max_relative_deviation=dev,
    )


@dataclass
class CampaignReport:
    samples: int
    satisfied: int
    proportional: int
    counterexamples: list[dict]
    rejected: dict[str, int]

    def to_json_dict(self) -> dict:
        return {
            "samples": self.samples,
            "satisfied": self.satisfied,
            "proportional": self.proportional,
            "counterexamples": self.counterexamples,
            "rejected": dict(self.rejected),
        }


def maximal_principle_campaign(
    samples: int,
    seed: int = 0,
    star_sizes: Sequence[int] = (5, 6, 7, 8),
    weight_range: tuple[float, float] = (1.0, 5.0),
    label_spread: float = 0.3,
) -> CampaignReport:
    """Randomized falsification campaign for the star maximal principle.

    Half of the draws pair a reference packing with an exact scaling of
    itself (these must satisfy the hypotheses and come out proportional);
    the other half shrink one boundary radius, which the curvature
    hypothesis is expected to reject. Hypothesis-satisfying pairs that are
    not proportional are counterexample candidates and are reported.
    """
    rng = np.random.default_rng(seed)
    rejected: dict[str, int] = {}
    satisfied = 0
    proportional = 0
    counterexamples: list[dict] = []

    batch = 4096
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        n = int(rng.choice(star_sizes))
        labels = rng.uniform(-label_spread, label_spread, size=(m, n + 1))
        sw = rng.uniform(weight_range[0] + 1e-9, weight_range[1], size=(m, n))
        rw = rng.uniform(weight_range[0] + 1e-9, weight_range[1], size=(m, n))
        c = np.exp(rng.uniform(-1.0, 1.0, size=m))
        perturb = rng.random(m) < 0.5
        j = rng.integers(1, n + 1, size=m)
        delta = rng.uniform(0.05, 0.2, size=m)

        rb = np.exp(labels)
        r = rb * c[:, None]
        rows = np.arange(m)
        r[rows[perturb], j[perturb]] *= np.exp(-delta[perturb])

        K0_b, m_b, adm_b, _ = _star_metrics(n, rb, sw, rw)
        K0_r, m_r, adm_r, _ = _star_metrics(n, r, sw, rw)

        ok = np.ones(m, dtype=bool)

        def reject(mask, reason):
            nonlocal ok
            mask = mask & ok
            if mask.any():
                rejected[reason] = rejected.get(reason, 0) + int(mask.sum())
                ok &= ~mask

        with np.errstate(invalid="ignore"):
            reject(~adm_b, "reference inadmissible")
            reject(~adm_r, "sample inadmissible")
            reject(np.nanmin(m_b, axis=-1) < -_HYP_TOL, "reference not weighted Delaunay")
            reject(np.nanmin(m_r, axis=-1) < -_HYP_TOL, "sample not weighted Delaunay")
            reject(K0_r > K0_b + _HYP_TOL, "K0(r) > K0(r_ref)")
            ratio = r / rb
            reject(
                ratio[:, 1:].max(axis=-1) > ratio[:, 0] * (1.0 + _HYP_TOL),
                "ratio hypothesis fails",
            )

        sat = int(ok.sum())
        satisfied += sat
        cc = ratio[:, 0]
        dev = np.abs(ratio / cc[:, None] - 1.0).max(axis=-1)
        prop = ok & (dev <= _PROP_TOL)
        proportional += int(prop.sum())
        bad = ok & ~prop
        for b in np.nonzero(bad)[0]:
            counterexamples.append(
                {
                    "n": n,
                    "radii": [float(x) for x in r[b]],
                    "radii_ref": [float(x) for x in rb[b]],
                    "spoke_w": [float(x) for x in sw[b]],
                    "rim_w": [float(x) for x in rw[b]],
                    "deviation": float(dev[b]),
                }
            )
        done += m

    return CampaignReport(
        samples=samples,
        satisfied=satisfied,
        proportional=proportional,
        counterexamples=counterexamples,
        rejected=rejected,
    )


# --- ring lemma probe --------------------------------------------------------------

@dataclass
class RingProbeReport:
    n: int
    weight: float
    samples: int
    solved: int
    skipped: int
    max_ratio: float
    ratios_quantiles: dict[str, float]

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "weight": self.weight,
            "samples": self.samples,
            "solved": self.solved,
            "skipped": self.skipped,
            "max_ratio": self.max_ratio,
            "ratios_quantiles": self.ratios_quantiles,
        }


def solve_flat_center_label(
    boundary_labels: np.ndarray, weight: float, iters: int = 80
) -> np.ndarray:
    """For each row of boundary labels, the center label making K0 = 0,
    found by bisection on the continuous extended curvature."""
    S, n = boundary_labels.shape
    sw = np.full((S, n), weight)
    rw = np.full((S, n), weight)

    def K0_of(u0: np.ndarray) -> np.ndarray:
        radii = np.concatenate([np.exp(u0)[:, None], np.exp(boundary_labels)], axis=1)
        K0, _, _, _ = _star_metrics(n, radii, sw, rw)
        return K0

    lo = np.full(S, -40.0)
    hi = np.full(S, 40.0)
    flo = K0_of(lo)
    fhi = K0_of(hi)
    ok = (flo < 0.0) & (fhi > 0.0)
    if not ok.all():
        raise RootNotBracketed(
            f"{int((~ok).sum())} draws have no flat center label in [-40, 40]"
        )
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = K0_of(mid)
        neg = fm < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


def ring_constant_probe(
    n: int,
    weight: float,
    sample_count: int,
    seed: int = 0,
    label_range: float = 1.0,
) -> RingProbeReport:
    """Empirical bound on r_0 / min_i r_i over random flat star packings."""
    rng = np.random.default_rng(seed)
    labels = rng.uniform(-label_range, label_range, size=(sample_count, n))
    skipped = 0
    try:
        u0 = solve_flat_center_label(labels, weight)
    except RootNotBracketed:
        # fall back to per-draw solving, skipping unbracketed draws
        u0 = np.full(sample_count, np.nan)
        for s in range(sample_count):
            try:
                u0[s] = solve_flat_center_label(labels[s : s + 1], weight)[0]
            except RootNotBracketed:
                skipped += 1
    solved_mask = np.isfinite(u0)
    ratios = np.exp(u0[solved_mask] - labels[solved_mask].min(axis=1))
    qs = {q: float(np.quantile(ratios, float(q))) for q in ("0.5", "0.9", "0.99")}
    return RingProbeReport(
        n=n,
        weight=weight,
        samples=sample_count,
        solved=int(solved_mask.sum()),
        skipped=skipped,
        max_ratio=float(ratios.max()),
        ratios_quantiles=qs,
    )
