"""Triangulated disks: construction, validation, subdivision, lattice approximation.

A :class:`TriangulatedDisk` is a simplicial disk given by counterclockwise
face triples over integer vertex ids. Edges, boundary cycle and
interior/boundary flags are derived at construction and validated:

* every edge lies in one face (boundary) or two (interior),
* face orientations are globally consistent,
* the 1-skeleton is connected and V - E + F = 1,
* boundary edges form one simple closed cycle.

Meshes are immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    MarkerAdjustmentFailed,
    NonManifoldEdge,
    NotADisk,
    OrientationConflict,
    ScaleTooCoarse,
)

Face = tuple[int, int, int]
Edge = tuple[int, int]


def _edge_key(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class TriangulatedDisk:
    """Validated triangulated disk. Build through :func:`build_from_faces`."""

    faces: tuple[Face, ...]
    n_vertices: int
    edges: tuple[Edge, ...]
    edge_index: Mapping[Edge, int]
    edge_faces: tuple[tuple[int, ...], ...]
    boundary_cycle: tuple[int, ...]
    is_boundary: tuple[bool, ...]
    coords: np.ndarray | None = None  # (V, 2) or None for abstract meshes
    # derived lookups, filled in __post_init__
    vertex_faces: tuple[tuple[int, ...], ...] = field(default=(), repr=False)
    face_edges: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        vf: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for f, (a, b, c) in enumerate(self.faces):
            vf[a].append(f)
            vf[b].append(f)
            vf[c].append(f)
        object.__setattr__(self, "vertex_faces", tuple(tuple(x) for x in vf))
        # face_edges[f, k] = edge id opposite local vertex k
        fe = np.empty((len(self.faces), 3), dtype=np.int64)
        for f, (a, b, c) in enumerate(self.faces):
            fe[f, 0] = self.edge_index[_edge_key(b, c)]
            fe[f, 1] = self.edge_index[_edge_key(a, c)]
            fe[f, 2] = self.edge_index[_edge_key(a, b)]
        object.__setattr__(self, "face_edges", fe)

    # -- basic queries ---------------------------------------------------

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def interior_edges(self) -> list[int]:
        return [e for e, fs in enumerate(self.edge_faces) if len(fs) == 2]

    def neighbors(self, v: int) -> list[int]:
        out = set()
        for f in self.vertex_faces[v]:
            for w in self.faces[f]:
                if w != v:
                    out.add(w)
        return sorted(out)

    def face_array(self) -> np.ndarray:
        return np.asarray(self.faces, dtype=np.int64)

    def is_interior_vertex(self, v: int) -> bool:
        return not self.is_boundary[v]

    def graph_distances(self, source: int) -> np.ndarray:
        """Hop distances from ``source`` over the 1-skeleton (-1 unreachable)."""
        dist = np.full(self.n_vertices, -1, dtype=np.int64)
        dist[source] = 0
        frontier = [source]
        while frontier:
            nxt = []
            for v in frontier:
                for w in self.neighbors(v):
                    if dist[w] < 0:
                        dist[w] = dist[v] + 1
                        nxt.append(w)
            frontier = nxt
        return dist

    # -- serialization ---------------------------------------------------

    def to_json_dict(self, markers: Sequence[int] | None = None) -> dict:
        verts: list[list[float] | None]
        if self.coords is None:
            verts = [None] * self.n_vertices
        else:
            verts = [[float(x), float(y)] for x, y in self.coords]
        out = {"vertices": verts, "faces": [list(f) for f in self.faces]}
        if markers is not None:
            out["markers"] = list(int(m) for m in markers)
        return out


@dataclass(frozen=True)
class MarkedDisk:
    """Disk with three distinct boundary markers ordered along the boundary."""

    mesh: TriangulatedDisk
    markers: tuple[int, int, int]

    def __post_init__(self):
        p, q, r = self.markers
        if len({p, q, r}) != 3:
            raise MarkerAdjustmentFailed("markers must be three distinct vertices")
        cyc = self.mesh.boundary_cycle
        pos = {}
        for m in self.markers:
            if m not in cyc:
                raise MarkerAdjustmentFailed(f"marker {m} is not a boundary vertex")
            pos[m] = cyc.index(m)
        # cyclic order along the boundary must match the marker order
        a, b, c = pos[p], pos[q], pos[r]
        if not ((a < b < c) or (b < c < a) or (c < a < b)):
            raise MarkerAdjustmentFailed(
                "markers are not ordered consistently with the boundary orientation"
            )

    def to_json_dict(self) -> dict:
        return self.mesh.to_json_dict(markers=self.markers)


def build_from_faces(
    face_list: Iterable[Sequence[int]],
    coords: Sequence[Sequence[float]] | np.ndarray | None = None,
) -> TriangulatedDisk:
    """Assemble and validate a triangulated disk from oriented face triples."""
    faces: list[Face] = []
    for tri in face_list:
        a, b, c = (int(v) for v in tri)
        if len({a, b, c}) != 3:
            raise NotADisk(f"face {tri} has repeated vertices")
        if min(a, b, c) < 0:
            raise NotADisk("vertex ids must be non-negative")
        faces.append((a, b, c))
    if not faces:
        raise NotADisk("empty face list")

    n_vertices = max(max(f) for f in faces) + 1

    edge_index: dict[Edge, int] = {}
    edge_faces: list[list[int]] = []
    for f, (a, b, c) in enumerate(faces):
        for i, j in ((a, b), (b, c), (c, a)):
            key = _edge_key(i, j)
            e = edge_index.get(key)
            if e is None:
                edge_index[key] = len(edge_faces)
                edge_faces.append([f])
            else:
                if len(edge_faces[e]) >= 2:
                    raise NonManifoldEdge(f"edge {key} lies in more than two faces")
                edge_faces[e].append(f)

    directed_seen: set[tuple[int, int]] = set()
    for a, b, c in faces:
        for i, j in ((a, b), (b, c), (c, a)):
            if (i, j) in directed_seen:
                raise OrientationConflict(
                    f"directed edge {(i, j)} traversed twice; faces are not "
                    "consistently oriented"
                )
            directed_seen.add((i, j))

    edges = sorted(edge_index)
    order = {k: i for i, k in enumerate(edges)}
    edge_faces_sorted: list[tuple[int, ...]] = [()] * len(edges)
    for k, e in edge_index.items():
        edge_faces_sorted[order[k]] = tuple(edge_faces[e])
    edge_index = {k: order[k] for k in edge_index}

    V, E, F = n_vertices, len(edges), len(faces)
    if V - E + F != 1:
        raise NotADisk(f"Euler characteristic V-E+F = {V - E + F}, expected 1")

    # boundary = directed edges whose reverse is absent; must form one cycle
    boundary_next: dict[int, int] = {}
    for i, j in directed_seen:
        if (j, i) not in directed_seen:
            if i in boundary_next:
                raise NotADisk(f"boundary branches at vertex {i}")
            boundary_next[i] = j
    if not boundary_next:
        raise NotADisk("no boundary edge found")
    start = min(boundary_next)
    cycle = [start]
    cur = boundary_next[start]
    while cur != start:
        cycle.append(cur)
        if cur not in boundary_next or len(cycle) > len(boundary_next):
            raise NotADisk("boundary edges do not close into a cycle")
        cur = boundary_next[cur]
    if len(cycle) != len(boundary_next):
        raise NotADisk("boundary is not a single cycle")

    # boundary orientation consistency: boundary directed edges (i->j) come
    # from faces, so the cycle inherits the face orientation already.
    is_boundary = [False] * n_vertices
    for v in cycle:
        is_boundary[v] = True

    # connectivity of the 1-skeleton (also rejects isolated vertices)
    adj: list[list[int]] = [[] for _ in range(n_vertices)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n_vertices
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if not seen[w]:
                seen[w] = True
                count += 1
                stack.append(w)
    if count != n_vertices:
        raise NotADisk("1-skeleton is not connected")

    coord_arr = None
    if coords is not None:
        coord_arr = np.asarray(coords, dtype=float)
        if coord_arr.shape != (n_vertices, 2):
            raise NotADisk(
                f"coords shape {coord_arr.shape} does not match vertex count {n_vertices}"
            )
        coord_arr = coord_arr.copy()
        coord_arr.setflags(write=False)

    return TriangulatedDisk(
        faces=tuple(faces),
        n_vertices=n_vertices,
        edges=tuple(edges),
        edge_index=edge_index,
        edge_faces=tuple(edge_faces_sorted),
        boundary_cycle=tuple(cycle),
        is_boundary=tuple(is_boundary),
        coords=coord_arr,
    )


def mesh_from_json_dict(data: Mapping) -> tuple[TriangulatedDisk, tuple[int, int, int] | None]:
    """Inverse of :meth:`TriangulatedDisk.to_json_dict`."""
    verts = data.get("vertices")
    coords = None
    if verts is not None and any(v is not None for v in verts):
        if any(v is None for v in verts):
            raise NotADisk("either all vertex coordinates or none must be given")
        coords = [[float(v[0]), float(v[1])] for v in verts]
    mesh = build_from_faces(data["faces"], coords=coords)
    markers = data.get("markers")
    if markers is not None:
        markers = (int(markers[0]), int(markers[1]), int(markers[2]))
    return mesh, markers


def star_polygon(n: int) -> TriangulatedDisk:
    """Star triangulation: interior vertex 0 coned to boundary vertices 1..n."""
    if n < 3:
        raise ValueError(f"star polygon needs n >= 3, got {n}")
    faces = [(0, i, i % n + 1) for i in range(1, n + 1)]
    return build_from_faces(faces)


# --- standard subdivision -----------------------------------------------------

@dataclass(frozen=True)
class SubdividedDisk:
    """Result of :func:`standard_subdivision`.

    ``vertex_of[(f, (a, b, c))]`` is the new vertex id at integer barycentric
    position (a, b, c), a+b+c = n, inside old face f. ``old_to_new`` maps old
    vertex ids to new ones.
    """

    mesh: TriangulatedDisk
    n: int
    vertex_of: Mapping[tuple[int, tuple[int, int, int]], int]
    old_to_new: Mapping[int, int]


def standard_subdivision(mesh: TriangulatedDisk, n: int) -> SubdividedDisk:
    """Replace each face by its n-th standard subdivision (n^2 small faces).

    Shared edges are subdivided consistently; new vertex ids are assigned in
    lexicographic order of (face id, barycentric coordinates) so runs are
    reproducible.
    """
    if n < 1:
        raise ValueError("subdivision order must be >= 1")

    # global identity of a subdivision point: old vertex / point on old edge /
    # interior point of old face
    assign: dict[tuple, int] = {}
    vertex_of: dict[tuple[int, tuple[int, int, int]], int] = {}

    def global_key(f: int, a: int, b: int, c: int):
        tri = mesh.faces[f]
        if a == n:
            return ("v", tri[0])
        if b == n:
            return ("v", tri[1])
        if c == n:
            return ("v", tri[2])
        if c == 0:
            i, j, t = tri[0], tri[1], b
        elif b == 0:
            i, j, t = tri[0], tri[2], c
        elif a == 0:
            i, j, t = tri[1], tri[2], c
        else:
            return ("f", f, a, b, c)
        if i > j:
            i, j, t = j, i, n - t
        return ("e", i, j, t)

    for f in range(mesh.n_faces):
        for a in range(n, -1, -1):
            for b in range(n - a, -1, -1):
                c = n - a - b
                key = global_key(f, a, b, c)
                if key not in assign:
                    assign[key] = len(assign)
                vertex_of[(f, (a, b, c))] = assign[key]

    faces: list[Face] = []
    for f in range(mesh.n_faces):
        vo = lambda a, b, c: vertex_of[(f, (a, b, c))]
        for a in range(n):
            for b in range(n - a):
                c = n - 1 - a - b
                faces.append((vo(a + 1, b, c), vo(a, b + 1, c), vo(a, b, c + 1)))
        # downward triangles
        for a in range(n - 1):
            for b in range(n - 1 - a):
                c = n - 2 - a - b
                faces.append(
                    (vo(a, b + 1, c + 1), vo(a + 1, b, c + 1), vo(a + 1, b + 1, c))
                )

    coords = None
    if mesh.coords is not None:
        coords = np.zeros((len(assign), 2))
        done = np.zeros(len(assign), dtype=bool)
        for (f, (a, b, c)), v in vertex_of.items():
            if not done[v]:
                p0, p1, p2 = (mesh.coords[w] for w in mesh.faces[f])
                coords[v] = (a * p0 + b * p1 + c * p2) / n
                done[v] = True

    sub = build_from_faces(faces, coords=coords)
    old_to_new = {}
    for old in range(mesh.n_vertices):
        old_to_new[old] = assign[("v", old)]
    return SubdividedDisk(mesh=sub, n=n, vertex_of=vertex_of, old_to_new=old_to_new)


# --- combinatorial balls ------------------------------------------------------

@dataclass(frozen=True)
class BallSubcomplex:
    """Vertices within graph distance <= radius and fully contained faces."""

    center: int
    radius: int
    vertices: tuple[int, ...]
    faces: tuple[int, ...]  # face ids of the ambient mesh
    distances: Mapping[int, int]


def combinatorial_ball(mesh: TriangulatedDisk, center: int, radius: int) -> BallSubcomplex:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    dist = mesh.graph_distances(center)
    inside = {v for v in range(mesh.n_vertices) if 0 <= dist[v] <= radius}
    faces = tuple(
        f for f, tri in enumerate(mesh.faces) if all(v in inside for v in tri)
    )
    return BallSubcomplex(
        center=center,
        radius=radius,
        vertices=tuple(sorted(inside)),
        faces=faces,
        distances={v: int(dist[v]) for v in sorted(inside)},
    )


# --- hexagonal lattice approximation ------------------------------------------

#: lattice basis, scaled by the approximation scale
HEX_BASIS = np.array([[1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])


def point_in_polygon(point: np.ndarray, polygon: np.ndarray, eps: float) -> bool:
    """Closed containment test: true for interior points and points within
    ``eps`` of the boundary. Crossing-number for the interior part."""
    x, y = float(point[0]), float(point[1])
    n = len(polygon)
    # on-boundary check
    for k in range(n):
        ax, ay = polygon[k]
        bx, by = polygon[(k + 1) % n]
        ux, uy = bx - ax, by - ay
        vx, vy = x - ax, y - ay
        L2 = ux * ux + uy * uy
        if L2 == 0.0:
            continue
        t = (vx * ux + vy * uy) / L2
        if -eps <= t <= 1 + eps:
            px, py = ax + t * ux, ay + t * uy
            if math.hypot(x - px, y - py) <= eps:
                return True
    inside = False
    for k in range(n):
        ax, ay = polygon[k]
        bx, by = polygon[(k + 1) % n]
        if (ay > y) != (by > y):
            t = (y - ay) / (by - ay)
            xc = ax + t * (bx - ax)
            if x < xc:
                inside = not inside
    return inside


@dataclass(frozen=True)
class HexApproximation:
    """Output of :func:`hexagonal_approximation`."""

    marked: MarkedDisk
    scale: float
    lattice_of_vertex: Mapping[int, tuple[int, int]]
    removed_faces: int  # faces dropped by marker adjustment / de-spiking


def lattice_triangles_inside(
    domain: Sequence[Sequence[float]] | np.ndarray, scale: float
) -> list[tuple[tuple[int, int], int]]:
    """Lattice triangles (anchor (m, n), orientation 0=up/1=down) whose three
    corners and barycenter pass the closed containment test."""
    poly = np.asarray(domain, dtype=float)
    if scale <= 0:
        raise ValueError("scale must be positive")
    diag = float(np.hypot(*(poly.max(axis=0) - poly.min(axis=0))))
    eps = 1e-12 * max(diag, 1.0)
    basis = HEX_BASIS * scale
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    n_min = int(math.floor(lo[1] / basis[1, 1])) - 1
    n_max = int(math.ceil(hi[1] / basis[1, 1])) + 1
    kept: list[tuple[tuple[int, int], int]] = []
    for n_ in range(n_min, n_max + 1):
        m_lo = int(math.floor((lo[0] - n_ * basis[1, 0]) / basis[0, 0])) - 1
        m_hi = int(math.ceil((hi[0] - n_ * basis[1, 0]) / basis[0, 0])) + 1
        for m_ in range(m_lo, m_hi + 1):
            for orient in (0, 1):
                corners = _lattice_triangle((m_, n_), orient)
                pts = [c[0] * basis[0] + c[1] * basis[1] for c in corners]
                bary = (pts[0] + pts[1] + pts[2]) / 3.0
                if all(point_in_polygon(p, poly, eps) for p in pts) and point_in_polygon(
                    bary, poly, eps
                ):
                    kept.append(((m_, n_), orient))
    return kept


def _lattice_triangle(mn: tuple[int, int], orient: int):
    m_, n_ = mn
    if orient == 0:
        return ((m_, n_), (m_ + 1, n_), (m_, n_ + 1))
    return ((m_ + 1, n_), (m_ + 1, n_ + 1), (m_, n_ + 1))


def _polygon_area_centroid(poly: np.ndarray) -> tuple[float, np.ndarray]:
    x, y = poly[:, 0], poly[:, 1]
    xs, ys = np.roll(x, -1), np.roll(y, -1)
    cross = x * ys - xs * y
    area = cross.sum() / 2.0
    if abs(area) < 1e-30:
        raise ValueError("degenerate polygon")
    cx = ((x + xs) * cross).sum() / (6 * area)
    cy = ((y + ys) * cross).sum() / (6 * area)
    return area, np.array([cx, cy])


def _fan_components(face_ids: list[int], faces: list[Face]) -> list[list[int]]:
    """Group a vertex's incident faces into edge-connected fans."""
    remaining = set(face_ids)
    comps = []
    while remaining:
        seed = min(remaining)
        comp = {seed}
        remaining.discard(seed)
        grew = True
        while grew:
            grew = False
            for g in list(remaining):
                if any(len(set(faces[g]) & set(faces[h])) == 2 for h in comp):
                    comp.add(g)
                    remaining.discard(g)
                    grew = True
        comps.append(sorted(comp))
    return comps


def hexagonal_approximation(
    domain: Sequence[Sequence[float]] | np.ndarray,
    scale: float,
    markers: Sequence[Sequence[float]],
) -> HexApproximation:
    """Largest simply connected piece of the scaled hexagonal lattice inside a
    simple closed polygon, with three one-face boundary markers.

    A lattice triangle is kept when its three corners and barycenter pass the
    closed point-in-polygon test. The edge-connected component containing the
    triangle nearest the domain centroid is selected; pinch vertices are
    resolved by discarding the smaller fans. Marker adjustment then removes
    boundary faces so that the three marker vertices have exactly one incident
    triangle while every other boundary vertex has more than one.
    """
    poly = np.asarray(domain, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
        raise ValueError("domain must be a closed planar polygon [[x,y],...]")
    if len(markers) != 3:
        raise ValueError("exactly three marker points are required")
    if scale <= 0:
        raise ValueError("scale must be positive")
    _, centroid = _polygon_area_centroid(poly)
    diag = float(np.hypot(*(poly.max(axis=0) - poly.min(axis=0))))
    eps = 1e-12 * max(diag, 1.0)

    basis = HEX_BASIS * scale
    pos_cache: dict[tuple[int, int], np.ndarray] = {}

    def pos(mn):
        p = pos_cache.get(mn)
        if p is None:
            p = mn[0] * basis[0] + mn[1] * basis[1]
            pos_cache[mn] = p
        return p

    kept = lattice_triangles_inside(poly, scale)
    if not kept:
        raise ScaleTooCoarse(f"no lattice triangle of side {scale} fits in the domain")

    # vertex ids in deterministic lattice order
    lattice_pts = sorted(
        {c for t in kept for c in _lattice_triangle(*t)}, key=lambda t: (t[1], t[0])
    )
    vid = {p: i for i, p in enumerate(lattice_pts)}
    tri_faces: list[Face] = [
        tuple(vid[c] for c in _lattice_triangle(mn, o)) for mn, o in kept
    ]

    # --- select edge-connected component nearest the centroid ---------------
    def components(faces: list[Face]) -> list[list[int]]:
        by_edge: dict[Edge, list[int]] = {}
        for f, (a, b, c) in enumerate(faces):
            for e in (_edge_key(a, b), _edge_key(b, c), _edge_key(a, c)):
                by_edge.setdefault(e, []).append(f)
        parent = list(range(len(faces)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for fs in by_edge.values():
            for g in fs[1:]:
                ra, rb = find(fs[0]), find(g)
                if ra != rb:
                    parent[rb] = ra
        groups: dict[int, list[int]] = {}
        for f in range(len(faces)):
            groups.setdefault(find(f), []).append(f)
        return list(groups.values())

    def barycenter_of(face: Face) -> np.ndarray:
        return sum(pos(lattice_pts[v]) for v in face) / 3.0

    def pick_component(faces: list[Face]) -> list[Face]:
        comps = components(faces)
        best = None
        best_d = None
        for comp in comps:
            d = min(float(np.linalg.norm(barycenter_of(faces[f]) - centroid)) for f in comp)
            if best_d is None or d < best_d - 1e-15:
                best, best_d = comp, d
        return [faces[f] for f in sorted(best)]

    def resolve_pinches(faces: list[Face]) -> list[Face]:
        while True:
            incident: dict[int, list[int]] = {}
            for f, tri in enumerate(faces):
                for v in tri:
                    incident.setdefault(v, []).append(f)
            drop: set[int] = set()
            for v, fs in incident.items():
                comps = _fan_components(fs, faces)
                if len(comps) > 1:
                    comps.sort(key=lambda c: (len(c), -min(c)))
                    for comp in comps[:-1]:
                        drop.update(comp)
            if not drop:
                return faces
            faces = [f for i, f in enumerate(faces) if i not in drop]
            faces = pick_component(faces)

    tri_faces = pick_component(tri_faces)
    tri_faces = resolve_pinches(tri_faces)
    removed = 0

    # faces below carry lattice-point ids (indices into lattice_pts), which
    # stay stable while faces are removed; meshes are rebuilt on demand
    def build(faces: list[Face]) -> tuple[TriangulatedDisk, list[int]]:
        used = sorted({v for f in faces for v in f})
        remap = {v: i for i, v in enumerate(used)}
        coords = np.array([pos(lattice_pts[v]) for v in used])
        mesh = build_from_faces(
            [(remap[a], remap[b], remap[c]) for a, b, c in faces], coords
        )
        return mesh, used

    def face_count(faces: list[Face], lat: int) -> int:
        return sum(1 for tri in faces if lat in tri)

    def one_face_lattice_vertices(mesh: TriangulatedDisk, used: list[int]) -> list[int]:
        return [
            used[v] for v in mesh.boundary_cycle if len(mesh.vertex_faces[v]) == 1
        ]

    current_faces: list[Face] = list(tri_faces)
    mesh, used = build(current_faces)
    marker_lattice: list[int] = []

    def lat_dist(lat: int, target: np.ndarray) -> float:
        return float(np.linalg.norm(pos(lattice_pts[lat]) - target))

    for target in markers:
        target = np.asarray(target, dtype=float)
        cands = [l for l in one_face_lattice_vertices(mesh, used) if l not in marker_lattice]
        if cands:
            best = min(cands, key=lambda l: (lat_dist(l, target), l))
            if lat_dist(best, target) <= 3.0 * scale:
                marker_lattice.append(best)
                continue
        # no natural marker nearby: carve the nearest boundary vertex down to
        # a single incident triangle, one face at a time
        bverts = [used[v] for v in mesh.boundary_cycle if used[v] not in marker_lattice]
        if not bverts:
            raise MarkerAdjustmentFailed("no boundary vertex available for a marker")
        lat = min(bverts, key=lambda l: (lat_dist(l, target), l))
        guard = 0
        while face_count(current_faces, lat) > 1:
            guard += 1
            if guard > len(current_faces):
                raise MarkerAdjustmentFailed("marker carving did not converge")
            fan = [i for i, tri in enumerate(current_faces) if lat in tri]
            carved = False
            for f in fan:
                trial = current_faces[:f] + current_faces[f + 1 :]
                if any(face_count(trial, m) < 1 for m in marker_lattice):
                    continue
                try:
                    t_mesh, t_used = build(trial)
                except (NotADisk, NonManifoldEdge, OrientationConflict):
                    continue
                if lat not in t_used:
                    continue
                current_faces = trial
                mesh, used = t_mesh, t_used
                removed += 1
                carved = True
                break
            if not carved:
                raise MarkerAdjustmentFailed(f"cannot carve a marker near {target}")
        marker_lattice.append(lat)

    # --- de-spike: no non-marker boundary vertex may keep exactly one face ----
    guard = 0
    while True:
        guard += 1
        if guard > len(current_faces) + 8:
            raise MarkerAdjustmentFailed("de-spiking did not converge")
        mesh, used = build(current_faces)
        if any(face_count(current_faces, m) != 1 for m in marker_lattice):
            raise MarkerAdjustmentFailed("a marker lost its one-face property")
        spikes = [
            l for l in one_face_lattice_vertices(mesh, used) if l not in marker_lattice
        ]
        if not spikes:
            break
        lat = spikes[0]
        f = next(i for i, tri in enumerate(current_faces) if lat in tri)
        if any(m in current_faces[f] for m in marker_lattice):
            raise MarkerAdjustmentFailed("spike removal would destroy a marker face")
        current_faces = current_faces[:f] + current_faces[f + 1 :]
        current_faces = pick_component(current_faces)
        removed += 1

    marker_ids = [used.index(l) for l in marker_lattice]

    # markers keep the requested correspondence; MarkedDisk rejects an order
    # inconsistent with the boundary orientation (an orientation-preserving
    # map cannot swap two of them silently)
    marked = MarkedDisk(mesh=mesh, markers=tuple(marker_ids))
    lattice_of_vertex = {i: lattice_pts[u] for i, u in enumerate(used)}
    return HexApproximation(
        marked=marked, scale=scale, lattice_of_vertex=lattice_of_vertex, removed_faces=removed
    )
