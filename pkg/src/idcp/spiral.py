"""Spiral factors on the hexagonal lattice and the degenerate-constant system.

Vertices are lattice points a*v1 + b*v2 with v1 = (1, 0), v2 = (1/2, sqrt3/2),
truncated to a combinatorial ball. Weights are translation invariant: one
value per edge direction (v1, v2, v2 - v1). A spiral factor multiplies labels
by a*log(lambda) + b*log(mu), which scales every lattice translate of a
triangle by a constant, so the two translation classes stay similar and all
full-star vertices are flat.

When every triangle is degenerate, the flat-vertex root equation applied to
the two classes around a common vertex couples (lambda, mu) into a system
with one strictly monotone reduced equation; ``solve_degenerate_constants``
solves it by bisection in log(lambda).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import BracketNotFound, InadmissibleFace, TriangleInequalityViolation
from .layout import develop, embedding_check
from .mesh import TriangulatedDisk, build_from_faces
from .packing import (
    Classification,
    PackingState,
    TriangleClass,
    classify_triangle,
    curvature,
)
from .delaunay import is_weighted_delaunay

_V1 = np.array([1.0, 0.0])
_V2 = np.array([0.5, math.sqrt(3.0) / 2.0])


def hex_distance(a: int, b: int) -> int:
    return (abs(a) + abs(b) + abs(a + b)) // 2


def direction_class(da: int, db: int) -> int:
    """0 for +-v1, 1 for +-v2, 2 for +-(v2 - v1)."""
    if (da, db) in ((1, 0), (-1, 0)):
        return 0
    if (da, db) in ((0, 1), (0, -1)):
        return 1
    if (da, db) in ((-1, 1), (1, -1)):
        return 2
    raise ValueError(f"({da}, {db}) is not a lattice edge direction")


@dataclass(frozen=True)
class SpiralConfig:
    weights: tuple[float, float, float]  # per direction v1, v2, v2-v1
    u: float = 0.0
    lam: float = 1.0
    mu: float = 1.0
    m: int = 4  # combinatorial truncation radius

    def __post_init__(self):
        if any(w <= 1.0 for w in self.weights):
            raise ValueError("all direction weights must be > 1")
        if self.lam <= 0.0 or self.mu <= 0.0:
            raise ValueError("lambda and mu must be positive")
        if self.m < 1:
            raise ValueError("truncation radius must be >= 1")

    def to_json_dict(self) -> dict:
        return {
            "I": list(self.weights),
            "u": self.u,
            "lambda": self.lam,
            "mu": self.mu,
            "m": self.m,
        }


@dataclass(frozen=True)
class SpiralLattice:
    config: SpiralConfig
    mesh: TriangulatedDisk
    state: PackingState
    lattice: Mapping[int, tuple[int, int]]  # vertex id -> (a, b)
    interior: tuple[int, ...]  # vertices with a full hexagonal star


def hex_ball_complex(m: int) -> tuple[list[tuple[int, int]], list[tuple[int, int, int]]]:
    pts = [
        (a, b)
        for b in range(-m, m + 1)
        for a in range(-m, m + 1)
        if hex_distance(a, b) <= m
    ]
    idx = {p: i for i, p in enumerate(pts)}
    faces = []
    for a, b in pts:
        up = ((a, b), (a + 1, b), (a, b + 1))
        if all(p in idx for p in up):
            faces.append(tuple(idx[p] for p in up))
        down = ((a, b), (a, b + 1), (a - 1, b + 1))
        if all(p in idx for p in down):
            faces.append(tuple(idx[p] for p in down))
    return pts, faces


def spiral_state(config: SpiralConfig) -> SpiralLattice:
    """Packing state with labels u + a log(lambda) + b log(mu) on the ball."""
    pts, faces = hex_ball_complex(config.m)
    coords = np.array([a * _V1 + b * _V2 for a, b in pts])
    mesh = build_from_faces(faces, coords=coords)
    labels = np.array(
        [
            config.u + a * math.log(config.lam) + b * math.log(config.mu)
            for a, b in pts
        ]
    )
    weights = np.empty(mesh.n_edges)
    for e, (i, j) in enumerate(mesh.edges):
        da = pts[j][0] - pts[i][0]
        db = pts[j][1] - pts[i][1]
        weights[e] = config.weights[direction_class(da, db)]
    state = PackingState(mesh=mesh, weights=weights, labels=labels)
    interior = tuple(
        i for i, (a, b) in enumerate(pts) if hex_distance(a, b) <= config.m - 1
    )
    return SpiralLattice(
        config=config,
        mesh=mesh,
        state=state,
        lattice={i: p for i, p in enumerate(pts)},
        interior=interior,
    )


@dataclass(frozen=True)
class FlatnessReport:
    interior_curvature: dict[int, float]
    max_abs: float
    class_angle_spread: float  # max angle deviation within each translation class

    def to_json_dict(self) -> dict:
        return {
            "interior_curvature": {str(k): v for k, v in self.interior_curvature.items()},
            "max_abs": self.max_abs,
            "class_angle_spread": self.class_angle_spread,
        }


def verify_spiral_flatness(config: SpiralConfig) -> FlatnessReport:
    """Curvature at full-star vertices of the truncation (expected zero)."""
    lat = spiral_state(config)
    geo = lat.state.geometry()
    bad = np.nonzero(geo.cls == TriangleClass.INADMISSIBLE)[0]
    if bad.size:
        raise InadmissibleFace(int(bad[0]))
    K = curvature(lat.state, geo)
    interior_K = {int(v): float(K[v]) for v in lat.interior}
    # the two translation classes: up faces have lattice delta v1 at slot 1
    ups, downs = [], []
    for f, tri in enumerate(lat.mesh.faces):
        a0, b0 = lat.lattice[tri[0]]
        a1, b1 = lat.lattice[tri[1]]
        if (a1 - a0, b1 - b0) == (1, 0):
            ups.append(f)
        else:
            downs.append(f)
    spread = 0.0
    for group in (ups, downs):
        if group:
            ang = geo.angles[group]
            spread = max(spread, float((ang.max(axis=0) - ang.min(axis=0)).max()))
    max_abs = max((abs(v) for v in interior_K.values()), default=0.0)
    return FlatnessReport(
        interior_curvature=interior_K, max_abs=max_abs, class_angle_spread=spread
    )


# --- degenerate constants ---------------------------------------------------------

def _delta(I1: float, I2: float, I3: float) -> float:
    return I1 * I1 + I2 * I2 + I3 * I3 + 2.0 * I1 * I2 * I3 - 1.0


def _f1(lam: float, I: Sequence[float]) -> float:
    """mu as a function of lambda from the down-class flat-vertex equation."""
    I1, I2, I3 = I
    D = _delta(I1, I2, I3)
    return (
        (I2 + I1 * I3)
        + (I3 + I1 * I2) * lam
        + math.sqrt(D * (1.0 + lam * lam + 2.0 * I1 * lam))
    ) / (I1 * I1 - 1.0)


def _f2(lam: float, I: Sequence[float]) -> float:
    """mu as a function of lambda from the up-class flat-vertex equation,
    with mu/lambda eliminated through the down-class equation."""
    I1, I2, I3 = I
    D = _delta(I1, I2, I3)
    g = _f1(lam, I) / lam  # mu / lambda, strictly decreasing in lambda
    return (
        (I2 + I1 * I3)
        + (I1 + I2 * I3) * g
        + math.sqrt(D * (1.0 + g * g + 2.0 * I3 * g))
    ) / (I3 * I3 - 1.0)


@dataclass(frozen=True)
class DegenerateConstants:
    lam: float
    mu: float
    residual_down: float  # |mu - f1(lambda)|
    residual_up: float    # |mu - f2(lambda)|

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "residual_down": self.residual_down,
            "residual_up": self.residual_up,
        }


def solve_degenerate_constants(
    weights: Sequence[float],
    u: float = 0.0,
    bracket: tuple[float, float] = (1e-2, 1e2),
) -> DegenerateConstants:
    """Unique (lambda, mu) making every lattice triangle degenerate.

    Bisection on F(lambda) = f1 - f2 in log(lambda); F is strictly increasing.
    The constant label u drops out of the system. The starting bracket is
    expanded geometrically up to 1e6 before giving up.
    """
    I = tuple(float(w) for w in weights)
    if len(I) != 3 or any(w <= 1.0 for w in I):
        raise ValueError("weights must be three values > 1")

    def F(loglam: float) -> float:
        lam = math.exp(loglam)
        return _f1(lam, I) - _f2(lam, I)

    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    flo, fhi = F(lo), F(hi)
    limit = math.log(1e6)
    while flo > 0.0 and lo > -limit:
        lo = max(lo - math.log(10.0) * 2.0, -limit)
        flo = F(lo)
    while fhi < 0.0 and hi < limit:
        hi = min(hi + math.log(10.0) * 2.0, limit)
        fhi = F(hi)
    if flo > 0.0 or fhi < 0.0:
        raise BracketNotFound("no sign change for lambda in [1e-6, 1e6]")
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if F(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    lam = math.exp(0.5 * (lo + hi))
    mu = _f1(lam, I)
    return DegenerateConstants(
        lam=lam,
        mu=mu,
        residual_down=abs(mu - _f1(lam, I)),
        residual_up=abs(mu - _f2(lam, I)),
    )


def degenerate_pattern(
    weights: Sequence[float], lam: float, mu: float
) -> tuple[Classification, Classification]:
    """Classify the two triangle classes under the factor (lambda, mu).

    The up class (x, x+v1, x+v2) carries radii proportional to (1, lam, mu)
    and opposite-indexed weights (I3, I2, I1); the down class
    (x, x+v2, x+v2-v1) carries (1, mu, mu/lam) and (I1, I3, I2). In the
    all-degenerate pattern both classes are flat at the anchor x.
    """
    I1, I2, I3 = weights
    up = classify_triangle([1.0, lam, mu], [I3, I2, I1])
    down = classify_triangle([1.0, mu, mu / lam], [I1, I3, I2])
    return up, down


# --- rigidity experiments ----------------------------------------------------------

@dataclass
class RigidityProbe:
    kind: str
    params: dict
    flat: bool | None
    delaunay: bool | None
    embedded: bool | None
    survived: bool
    note: str = ""

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params,
            "flat": self.flat,
            "delaunay": self.delaunay,
            "embedded": self.embedded,
            "survived": self.survived,
            "note": self.note,
        }


@dataclass
class RigidityReport:
    m: int
    weight: float
    probes: list[RigidityProbe]

    @property
    def survivors(self) -> list[RigidityProbe]:
        return [p for p in self.probes if p.survived]

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "weight": self.weight,
            "probes": [p.to_json_dict() for p in self.probes],
        }


_FLAT_TOL = 1e-8


def _probe_factor(
    base: SpiralLattice, factor: np.ndarray, kind: str, params: dict
) -> RigidityProbe:
    state = base.state.shifted(factor)
    geo = state.geometry()
    if np.any(geo.cls == TriangleClass.INADMISSIBLE):
        return RigidityProbe(
            kind=kind, params=params, flat=None, delaunay=None, embedded=None,
            survived=False, note="inadmissible face",
        )
    K = curvature(state, geo)
    flat = bool(max(abs(float(K[v])) for v in base.interior) < _FLAT_TOL)
    report = is_weighted_delaunay(state, geo)
    delaunay = len(report.violations) == 0
    embedded: bool | None = None
    note = ""
    if flat and delaunay:
        try:
            lay = develop(state.mesh, state.edge_lengths())
            embedded = embedding_check(lay).embedded
        except TriangleInequalityViolation:
            embedded = None
            note = "degenerate faces; no development"
    survived = bool(flat and delaunay and (embedded is True))
    if survived:
        note = (
            "survivor on a finite truncation; boundary vertices are uncontrolled, "
            "so this does not refute the infinite statement"
        )
    return RigidityProbe(
        kind=kind, params=params, flat=flat, delaunay=delaunay,
        embedded=embedded, survived=survived, note=note,
    )


def rigidity_experiment(
    weight: float,
    m: int,
    seed: int = 0,
    random_trials: int = 20,
    spiral_lams: Sequence[float] = (1.1, 1.3, 1.6),
    noise: float = 1e-3,
) -> RigidityReport:
    """Randomized search for non-constant flat weighted-Delaunay embeddable
    factors on the truncated lattice (none expected besides constants)."""
    cfg = SpiralConfig(weights=(weight, weight, weight), m=m)
    base = spiral_state(cfg)
    rng = np.random.default_rng(seed)
    probes: list[RigidityProbe] = []

    probes.append(
        _probe_factor(base, np.zeros(base.mesh.n_vertices), "constant", {"c": 0.0})
    )
    probes.append(
        _probe_factor(
            base,
            np.full(base.mesh.n_vertices, 0.37),
            "constant",
            {"c": 0.37},
        )
    )
    for lam in spiral_lams:
        factor = np.array(
            [a * math.log(lam) for a, b in (base.lattice[v] for v in range(base.mesh.n_vertices))]
        )
        probes.append(_probe_factor(base, factor, "spiral", {"lambda": lam, "mu": 1.0}))
    for t in range(random_trials):
        factor = rng.normal(0.0, noise, size=base.mesh.n_vertices)
        probes.append(_probe_factor(base, factor, "random", {"trial": t, "noise": noise}))
    return RigidityReport(m=m, weight=weight, probes=probes)
