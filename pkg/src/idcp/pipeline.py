"""End-to-end discrete conformal approximation of the Riemann mapping.

For each scale the pipeline intersects the hexagonal lattice with the domain,
flattens the resulting disk by the two-step flow, develops both metrics
(initial lattice embedding and flat target normalized to the unit triangle)
and assembles the piecewise-linear map from the unit triangle onto the
approximating region. Convergence is reported Cauchy-style between successive
maps on a fixed barycentric grid; the distance to the identity is also
recorded, which is meaningful for the unit-triangle fixture whose Riemann
mapping is the identity.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np

from . import io as idcp_io
from .errors import IdcpError, PointOutsideDomain
from .flow import FlattenResult, FlowConfig, flatten_disk
from .layout import Layout, PLMap, develop, embedding_check, normalize_to_unit_triangle, pl_map
from .mesh import HexApproximation, hexagonal_approximation
from .packing import PackingState

UNIT_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])


def unit_triangle_grid(n: int = 32) -> np.ndarray:
    """Fixed evaluation grid: barycentric lattice (i+j+k = n) on the unit triangle."""
    pts = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = n - i - j
            pts.append((i * UNIT_TRIANGLE[0] + j * UNIT_TRIANGLE[1] + k * UNIT_TRIANGLE[2]) / n)
    return np.array(pts)


@dataclass(frozen=True)
class PipelineConfig:
    domain: np.ndarray            # closed polygon (N, 2)
    markers: np.ndarray           # (3, 2) points on the boundary
    weight: float
    scales: tuple[float, ...]
    subdiv: int = 1
    flow: FlowConfig = field(default_factory=FlowConfig)
    out_dir: str | None = None
    seed: int = 0

    def __post_init__(self):
        domain = np.asarray(self.domain, dtype=float)
        markers = np.asarray(self.markers, dtype=float)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "markers", markers)
        if markers.shape != (3, 2):
            raise ValueError("exactly three marker points are required")
        if len({tuple(m) for m in markers.tolist()}) != 3:
            raise ValueError("marker points must be distinct")
        if self.weight <= 1.0:
            raise ValueError("weight must be > 1")
        if len(self.scales) == 0 or any(
            b >= a for a, b in zip(self.scales, self.scales[1:])
        ):
            raise ValueError("scales must be strictly decreasing")
        if self.subdiv < 1:
            raise ValueError("subdiv must be >= 1")
        diag = float(np.hypot(*(domain.max(axis=0) - domain.min(axis=0))))
        for m in markers:
            if _distance_to_polygon(m, domain) > 1e-6 * diag:
                raise ValueError(f"marker {m.tolist()} is not on the domain boundary")


def _distance_to_polygon(p: np.ndarray, poly: np.ndarray) -> float:
    best = math.inf
    n = len(poly)
    for k in range(n):
        a, b = poly[k], poly[(k + 1) % n]
        u = b - a
        L2 = float(u @ u)
        t = 0.0 if L2 == 0 else float(np.clip((p - a) @ u / L2, 0.0, 1.0))
        best = min(best, float(np.hypot(*(p - a - t * u))))
    return best


@dataclass
class ScaleResult:
    scale: float
    status: str                       # Completed | <error kind>
    error: str | None = None
    hex: HexApproximation | None = None
    flatten: FlattenResult | None = None
    state_flat: PackingState | None = None
    layout_src: Layout | None = None  # normalized to the unit triangle
    layout_dst: Layout | None = None  # embedded lattice coordinates
    mapping: PLMap | None = None
    grid_images: np.ndarray | None = None
    marker_drift: float | None = None
    third_marker_residual: float | None = None
    embedded: bool | None = None
    sup_vs_identity: float | None = None

    def counts(self) -> dict:
        m = self.flatten.subdivision.mesh if self.flatten else None
        return {
            "vertices": m.n_vertices if m else None,
            "edges": m.n_edges if m else None,
            "faces": m.n_faces if m else None,
        }

    def report_dict(self) -> dict:
        out = {
            "scale": self.scale,
            "status": self.status,
            **self.counts(),
            "marker_drift": self.marker_drift,
            "third_marker_residual": self.third_marker_residual,
            "embedded": self.embedded,
            "sup_vs_identity": self.sup_vs_identity,
            "global_dilatation": self.mapping.global_dilatation if self.mapping else None,
        }
        if self.error:
            out["error"] = self.error
        if self.flatten is not None and self.flatten.step2.completed:
            out["flow"] = {
                "corrections": self.flatten.step2.detail.get("corrections"),
                "residual": self.flatten.step2.detail.get("residual"),
                "max_drift": self.flatten.step2.detail.get("max_drift"),
            }
        return out


@dataclass
class ConvergenceReport:
    config: PipelineConfig
    scales: list[ScaleResult]
    grid: np.ndarray
    successive_sup_distance: list[float | None]

    def to_json_dict(self) -> dict:
        return {
            "weight": self.config.weight,
            "subdiv": self.config.subdiv,
            "seed": self.config.seed,
            "scales": [s.report_dict() for s in self.scales],
            "successive_sup_distance": self.successive_sup_distance,
            "grid_size": int(len(self.grid)),
        }


def evaluate_map(mapping: PLMap, points: np.ndarray) -> np.ndarray:
    """Apply the PL map to points inside the source layout footprint.

    Each point is located in a containing source face (barycentric test with
    a small tolerance, lowest face id wins) and mapped by that face's affine
    part; points on shared edges get the same image from either side.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    src = mapping.source
    faces = src.mesh.face_array()
    A = src.coords[faces[:, 0]]
    B = src.coords[faces[:, 1]]
    C = src.coords[faces[:, 2]]
    det = (B[:, 0] - A[:, 0]) * (C[:, 1] - A[:, 1]) - (B[:, 1] - A[:, 1]) * (C[:, 0] - A[:, 0])
    scale = float(np.abs(src.coords).max())
    # the looser fallback tolerates development rounding of the boundary;
    # it stays far below any face size, so faces cannot be misattributed
    tolerances = (1e-12 * max(scale, 1.0), 1e-7 * max(scale, 1.0))

    out = np.empty_like(pts)
    for p_idx, p in enumerate(pts):
        vx = p[0] - A[:, 0]
        vy = p[1] - A[:, 1]
        l1 = ((C[:, 1] - A[:, 1]) * vx - (C[:, 0] - A[:, 0]) * vy) / det
        l2 = (-(B[:, 1] - A[:, 1]) * vx + (B[:, 0] - A[:, 0]) * vy) / det
        f = -1
        for tol in tolerances:
            inside = (l1 >= -tol) & (l2 >= -tol) & (l1 + l2 <= 1.0 + tol)
            idx = np.nonzero(inside)[0]
            if idx.size:
                f = int(idx[0])
                break
        if f < 0:
            raise PointOutsideDomain(f"point {p.tolist()} is outside the source layout")
        out[p_idx] = mapping.linear[f] @ p + mapping.translation[f]
    return out


def _run_scale(config: PipelineConfig, scale: float, grid: np.ndarray) -> ScaleResult:
    try:
        hx = hexagonal_approximation(config.domain, scale, config.markers)
        # base label makes the initial packing lengths equal the lattice side
        label = math.log(scale) - 0.5 * math.log(2.0 + 2.0 * config.weight)
        flat = flatten_disk(
            hx.marked, config.weight, config.subdiv, config.flow, label=label
        )
        if not flat.step2.completed:
            return ScaleResult(
                scale=scale,
                status=flat.step2.status,
                error=str(flat.step2.detail),
                hex=hx,
                flatten=flat,
            )
        fine = flat.subdivision.mesh
        state_flat = flat.state0.shifted(flat.factor)
        lay_flat = develop(fine, state_flat.edge_lengths(), provenance=("flat", f"scale={scale}"))
        lay_src, residual = normalize_to_unit_triangle(lay_flat, flat.markers_fine)
        emb = embedding_check(lay_src).embedded
        lay_dst = Layout(
            mesh=fine,
            coords=fine.coords,
            face_signed_area=_signed_areas(fine),
            provenance=("lattice", f"scale={scale}"),
        )
        mapping = pl_map(lay_src, lay_dst)
        images = evaluate_map(mapping, grid)
        drift = float(
            sum(
                np.hypot(*(fine.coords[mf] - np.asarray(cm)))
                for mf, cm in zip(flat.markers_fine, config.markers)
            )
        )
        sup_id = float(np.hypot(*(images - grid).T).max())
        return ScaleResult(
            scale=scale,
            status="Completed",
            hex=hx,
            flatten=flat,
            state_flat=state_flat,
            layout_src=lay_src,
            layout_dst=lay_dst,
            mapping=mapping,
            grid_images=images,
            marker_drift=drift,
            third_marker_residual=residual,
            embedded=emb,
            sup_vs_identity=sup_id,
        )
    except IdcpError as exc:
        return ScaleResult(scale=scale, status=type(exc).__name__, error=str(exc))


def _signed_areas(mesh) -> np.ndarray:
    f = mesh.face_array()
    p = mesh.coords
    a, b, c = p[f[:, 0]], p[f[:, 1]], p[f[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def run_pipeline(config: PipelineConfig) -> ConvergenceReport:
    """Run every scale (independently, in parallel) and assemble the report.

    Per-scale failures are recorded and the remaining scales still run; only
    when every scale fails is an error raised.
    """
    grid = unit_triangle_grid()
    with ThreadPoolExecutor(max_workers=min(len(config.scales), 4)) as pool:
        results = list(pool.map(lambda s: _run_scale(config, s, grid), config.scales))
    if all(r.status != "Completed" for r in results):
        raise RuntimeError(
            "every scale failed: "
            + "; ".join(f"{r.scale}: {r.status} ({r.error})" for r in results)
        )
    successive: list[float | None] = []
    for a, b in zip(results, results[1:]):
        if a.grid_images is not None and b.grid_images is not None:
            successive.append(float(np.hypot(*(a.grid_images - b.grid_images).T).max()))
        else:
            successive.append(None)
    report = ConvergenceReport(
        config=config, scales=results, grid=grid, successive_sup_distance=successive
    )
    if config.out_dir is not None:
        export_artifacts(report, config.out_dir)
    return report


def export_artifacts(report: ConvergenceReport, out_dir: str | Path) -> list[Path]:
    """Write per-scale artifacts and the cross-scale report.

    Layout: <out>/scale_<k>/{mesh.json, factor.json, layout_src.json,
    layout_dst.json, map.svg, report.json} and <out>/report.json. Files are
    byte-stable across reruns with the same configuration.
    """
    out = Path(out_dir)
    written: list[Path] = []
    for k, res in enumerate(report.scales):
        d = out / f"scale_{k}"
        d.mkdir(parents=True, exist_ok=True)
        if res.status == "Completed":
            fine_marked = res.flatten.subdivision.mesh.to_json_dict(
                markers=res.flatten.markers_fine
            )
            idcp_io.write_json(d / "mesh.json", fine_marked)
            idcp_io.write_json(
                d / "factor.json",
                {
                    "weight": report.config.weight,
                    "base_label": float(res.flatten.state0.labels[0]),
                    "factor": [float(x) for x in res.flatten.factor],
                },
            )
            idcp_io.write_json(d / "layout_src.json", res.layout_src.to_json_dict())
            idcp_io.write_json(d / "layout_dst.json", res.layout_dst.to_json_dict())
            hist, edges = np.histogram(res.mapping.dilatation, bins=20)
            svg = idcp_io.layout_svg(
                res.layout_dst, markers=res.flatten.markers_fine
            )
            (d / "map.svg").write_text(svg)
            scale_report = res.report_dict()
            scale_report["dilatation_histogram"] = {
                "counts": [int(c) for c in hist],
                "edges": [float(e) for e in edges],
            }
            idcp_io.write_json(d / "report.json", scale_report)
            written += [d / n for n in ("mesh.json", "factor.json", "layout_src.json", "layout_dst.json", "map.svg", "report.json")]
        else:
            idcp_io.write_json(d / "report.json", res.report_dict())
            written.append(d / "report.json")
    idcp_io.write_json(out / "report.json", report.to_json_dict())
    written.append(out / "report.json")
    return written
