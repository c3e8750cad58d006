"""Planar developments of flat metrics and piecewise-linear maps between them.

``develop`` unfolds a simply connected complex face by face: the seed face is
placed with its lowest vertex-index edge on the positive horizontal axis and
each subsequent face is laid across an already-placed shared edge, choosing
the side that keeps the stored counterclockwise orientation. For a flat
metric the result is independent of the traversal order up to rigid motion.

Overlapping developments are legal outputs; use :func:`embedding_check` to
detect them.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateFace, MarkersCollinear, TriangleInequalityViolation
from .mesh import TriangulatedDisk


@dataclass(frozen=True)
class Layout:
    """Planar coordinates realizing a metric on a mesh."""

    mesh: TriangulatedDisk
    coords: np.ndarray          # (V, 2)
    face_signed_area: np.ndarray  # (F,)
    provenance: tuple[str, str] = ("", "")

    def edge_lengths(self) -> np.ndarray:
        e = np.asarray(self.mesh.edges, dtype=np.int64)
        d = self.coords[e[:, 0]] - self.coords[e[:, 1]]
        return np.hypot(d[:, 0], d[:, 1])

    def to_json_dict(self) -> dict:
        return {"coords": [[float(x), float(y)] for x, y in self.coords]}


def _signed_area(p: np.ndarray, q: np.ndarray, s: np.ndarray) -> float:
    return 0.5 * float((q[0] - p[0]) * (s[1] - p[1]) - (q[1] - p[1]) * (s[0] - p[0]))


def develop(
    mesh: TriangulatedDisk,
    edge_lengths: np.ndarray | Sequence[float],
    seed_face: int | None = None,
    provenance: tuple[str, str] = ("", ""),
) -> Layout:
    """Breadth-first isometric development of a metric into the plane."""
    L = np.asarray(edge_lengths, dtype=float)
    if L.shape != (mesh.n_edges,):
        raise ValueError("edge_lengths must have one entry per edge")

    def elen(i: int, j: int) -> float:
        return float(L[mesh.edge_index[(min(i, j), max(i, j))]])

    for f, (a, b, c) in enumerate(mesh.faces):
        x, y, z = elen(a, b), elen(b, c), elen(a, c)
        if not (x < y + z and y < x + z and z < x + y):
            raise TriangleInequalityViolation(f)

    coords = np.full((mesh.n_vertices, 2), np.nan)
    placed = np.zeros(mesh.n_vertices, dtype=bool)
    face_done = np.zeros(mesh.n_faces, dtype=bool)

    f0 = 0 if seed_face is None else seed_face
    tri = mesh.faces[f0]
    # seed edge: the lowest vertex-index pair of the face
    pairs = sorted(
        [tuple(sorted((tri[0], tri[1]))), tuple(sorted((tri[1], tri[2]))), tuple(sorted((tri[0], tri[2])))]
    )
    i, j = pairs[0]
    k = next(v for v in tri if v not in (i, j))
    lij, lik, ljk = elen(i, j), elen(i, k), elen(j, k)
    coords[i] = (0.0, 0.0)
    coords[j] = (lij, 0.0)
    x = (lij**2 + lik**2 - ljk**2) / (2.0 * lij)
    y = math.sqrt(max(lik**2 - x**2, 0.0))
    coords[k] = (x, y)
    # keep the stored orientation
    ordered = _face_coords(mesh.faces[f0], coords)
    if _signed_area(*ordered) < 0.0:
        coords[k] = (x, -y)
    placed[[i, j, k]] = True
    face_done[f0] = True

    queue = deque([f0])
    while queue:
        f = queue.popleft()
        a, b, c = mesh.faces[f]
        for e in mesh.face_edges[f]:
            for g in mesh.edge_faces[e]:
                if face_done[g]:
                    continue
                tri = mesh.faces[g]
                missing = [v for v in tri if not placed[v]]
                if len(missing) == 0:
                    face_done[g] = True
                    queue.append(g)
                    continue
                if len(missing) != 1:
                    continue  # not attachable yet
                (m,) = missing
                p_id, q_id = (v for v in tri if v != m)
                P, Q = coords[p_id], coords[q_id]
                lpq, lpm, lqm = elen(p_id, q_id), elen(p_id, m), elen(q_id, m)
                # normalize by the measured distance: keeps placement errors
                # additive instead of compounding across the traversal
                u = (Q - P) / np.hypot(*(Q - P))
                n = np.array([-u[1], u[0]])
                x = (lpq**2 + lpm**2 - lqm**2) / (2.0 * lpq)
                y = math.sqrt(max(lpm**2 - x**2, 0.0))
                cand = P + x * u + y * n
                coords[m] = cand
                if _signed_area(*_face_coords(tri, coords)) < 0.0:
                    coords[m] = P + x * u - y * n
                placed[m] = True
                face_done[g] = True
                queue.append(g)

    if not face_done.all():
        raise ValueError("mesh is not face-connected; development incomplete")

    areas = np.array(
        [_signed_area(*_face_coords(tri, coords)) for tri in mesh.faces]
    )
    return Layout(mesh=mesh, coords=coords, face_signed_area=areas, provenance=provenance)


def _face_coords(tri, coords):
    return coords[tri[0]], coords[tri[1]], coords[tri[2]]


def normalize_to_unit_triangle(
    layout: Layout, markers: Sequence[int]
) -> tuple[Layout, float]:
    """Apply the similarity sending the first two marker images to (0,0) and
    (1,0); returns the new layout and the third marker's residual distance
    from (1/2, sqrt(3)/2)."""
    p, q, r = markers
    z = layout.coords[:, 0] + 1j * layout.coords[:, 1]
    denom = z[q] - z[p]
    span = float(np.abs(z - z[p]).max())
    if abs(denom) <= 1e-14 * max(span, 1.0):
        raise MarkersCollinear("first two markers coincide")
    w = (z - z[p]) / denom
    target = 0.5 + 1j * (math.sqrt(3.0) / 2.0)
    if abs(w[r].imag) <= 1e-12 * max(1.0, abs(w[r])):
        raise MarkersCollinear("marker images are collinear")
    residual = float(abs(w[r] - target))
    coords = np.stack([w.real, w.imag], axis=-1)
    scale2 = abs(1.0 / denom) ** 2
    areas = layout.face_signed_area * scale2
    return (
        Layout(
            mesh=layout.mesh,
            coords=coords,
            face_signed_area=areas,
            provenance=layout.provenance,
        ),
        residual,
    )


@dataclass(frozen=True)
class PLMap:
    """Piecewise-linear map between two layouts of the same mesh."""

    source: Layout
    target: Layout
    linear: np.ndarray       # (F, 2, 2)
    translation: np.ndarray  # (F, 2)
    dilatation: np.ndarray   # (F,)

    @property
    def global_dilatation(self) -> float:
        return float(self.dilatation.max())


def pl_map(src: Layout, dst: Layout) -> PLMap:
    """Per-face affine interpolation of the vertex correspondence."""
    if src.mesh is not dst.mesh and src.mesh.faces != dst.mesh.faces:
        raise ValueError("layouts must share one mesh")
    F = src.mesh.n_faces
    lin = np.zeros((F, 2, 2))
    trans = np.zeros((F, 2))
    K = np.zeros(F)
    for f, tri in enumerate(src.mesh.faces):
        S = np.stack([src.coords[tri[1]] - src.coords[tri[0]], src.coords[tri[2]] - src.coords[tri[0]]], axis=-1)
        D = np.stack([dst.coords[tri[1]] - dst.coords[tri[0]], dst.coords[tri[2]] - dst.coords[tri[0]]], axis=-1)
        det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
        if abs(det) < 1e-300:
            raise DegenerateFace(f)
        Sinv = np.array([[S[1, 1], -S[0, 1]], [-S[1, 0], S[0, 0]]]) / det
        Lf = D @ Sinv
        lin[f] = Lf
        trans[f] = dst.coords[tri[0]] - Lf @ src.coords[tri[0]]
        p, qq = Lf[0, 0], Lf[0, 1]
        rr, s = Lf[1, 0], Lf[1, 1]
        a = complex(p + s, rr - qq) / 2.0
        b = complex(p - s, rr + qq) / 2.0
        if abs(a) <= abs(b):
            raise DegenerateFace(f, f"face {f} is not orientation-preserving")
        K[f] = (abs(a) + abs(b)) / (abs(a) - abs(b))
    return PLMap(source=src, target=dst, linear=lin, translation=trans, dilatation=K)


# --- overlap detection ----------------------------------------------------------

@dataclass(frozen=True)
class EmbeddingResult:
    embedded: bool
    overlap: tuple[int, int] | None  # first overlapping face pair found


def _orient(eps: float, a, b, c) -> int:
    v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if v > eps:
        return 1
    if v < -eps:
        return -1
    return 0


def _segments_cross(eps, p1, p2, q1, q2) -> bool:
    """Proper crossing: interiors of the segments intersect."""
    d1 = _orient(eps, q1, q2, p1)
    d2 = _orient(eps, q1, q2, p2)
    d3 = _orient(eps, p1, p2, q1)
    d4 = _orient(eps, p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def _point_strictly_inside(eps, pt, tri) -> bool:
    d1 = _orient(eps, tri[0], tri[1], pt)
    d2 = _orient(eps, tri[1], tri[2], pt)
    d3 = _orient(eps, tri[2], tri[0], pt)
    return (d1 > 0 and d2 > 0 and d3 > 0) or (d1 < 0 and d2 < 0 and d3 < 0)


def embedding_check(layout: Layout) -> EmbeddingResult:
    """Scan face pairs that share no edge for interior overlap.

    Uses sign-of-area predicates with an epsilon fallback at 1e-12 of the
    bounding-box diagonal; candidate pairs come from a uniform spatial grid
    over face bounding boxes.
    """
    mesh = layout.mesh
    pts = layout.coords
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    diag = float(np.hypot(*(hi - lo)))
    eps = 1e-12 * max(diag, 1e-30)
    eps_area = eps * max(diag, 1.0)

    tri_pts = [tuple(pts[v] for v in tri) for tri in mesh.faces]
    boxes = np.array(
        [
            [min(p[0] for p in t), min(p[1] for p in t), max(p[0] for p in t), max(p[1] for p in t)]
            for t in tri_pts
        ]
    )
    cell = max(float(np.median(boxes[:, 2] - boxes[:, 0])), diag * 1e-6, 1e-30)

    grid: dict[tuple[int, int], list[int]] = {}
    for f in range(mesh.n_faces):
        x0, y0, x1, y1 = boxes[f]
        for gx in range(int(x0 // cell), int(x1 // cell) + 1):
            for gy in range(int(y0 // cell), int(y1 // cell) + 1):
                grid.setdefault((gx, gy), []).append(f)

    share_edge = [set() for _ in range(mesh.n_faces)]
    for fs in mesh.edge_faces:
        if len(fs) == 2:
            share_edge[fs[0]].add(fs[1])
            share_edge[fs[1]].add(fs[0])

    seen: set[tuple[int, int]] = set()
    for bucket in grid.values():
        bucket.sort()
        for ai in range(len(bucket)):
            f = bucket[ai]
            for bi in range(ai + 1, len(bucket)):
                g = bucket[bi]
                if g in share_edge[f]:
                    continue
                pair = (f, g)
                if pair in seen:
                    continue
                seen.add(pair)
                if (
                    boxes[f, 2] < boxes[g, 0] - eps
                    or boxes[g, 2] < boxes[f, 0] - eps
                    or boxes[f, 3] < boxes[g, 1] - eps
                    or boxes[g, 3] < boxes[f, 1] - eps
                ):
                    continue
                if _triangles_overlap(eps_area, tri_pts[f], tri_pts[g], mesh.faces[f], mesh.faces[g]):
                    return EmbeddingResult(embedded=False, overlap=pair)
    return EmbeddingResult(embedded=True, overlap=None)


def _triangles_overlap(eps, t1, t2, tri1, tri2) -> bool:
    shared = set(tri1) & set(tri2)
    segs1 = [(t1[0], t1[1]), (t1[1], t1[2]), (t1[2], t1[0])]
    segs2 = [(t2[0], t2[1]), (t2[1], t2[2]), (t2[2], t2[0])]
    for p1, p2 in segs1:
        for q1, q2 in segs2:
            if _segments_cross(eps, p1, p2, q1, q2):
                return True
    # containment without boundary crossing
    for v, pt in zip(tri1, t1):
        if v not in shared and _point_strictly_inside(eps, pt, t2):
            return True
    for v, pt in zip(tri2, t2):
        if v not in shared and _point_strictly_inside(eps, pt, t1):
            return True
    return False


def best_fit_rigid(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orientation-preserving rigid motion minimizing ||R src + t - dst||.

    Returns (R, t). Used to compare developments modulo rigid motion.
    """
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    A = (dst - cd).T @ (src - cs)
    # closest rotation to A via its polar part, restricted to SO(2)
    theta = math.atan2(A[1, 0] - A[0, 1], A[0, 0] + A[1, 1])
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    t = cd - R @ cs
    return R, t
