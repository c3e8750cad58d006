"""Canonical JSON serialization and the SVG emitter.

JSON files are written with sorted keys and fixed separators so reruns with
identical configuration produce byte-identical artifacts.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from .layout import Layout


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def write_json(path: str | Path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_dumps(obj))


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def layout_svg(
    layout: Layout,
    radii: Sequence[float] | None = None,
    markers: Sequence[int] | None = None,
    labels: bool = False,
    width: int = 640,
) -> str:
    """Render a layout's faces (and optionally vertex circles, marker dots and
    vertex labels) as a standalone SVG document."""
    pts = layout.coords
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-12))
    pad = 0.05 * span
    vb = (lo[0] - pad, lo[1] - pad, (hi[0] - lo[0]) + 2 * pad, (hi[1] - lo[1]) + 2 * pad)
    height = int(round(width * vb[3] / vb[2])) or width

    def pt(p):
        # flip y so the mathematical orientation is upright on screen
        return f"{_fmt(p[0])},{_fmt(vb[1] + vb[3] - (p[1] - vb[1]))}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="{_fmt(vb[0])} {_fmt(vb[1])} {_fmt(vb[2])} {_fmt(vb[3])}">'
    ]
    stroke = _fmt(0.004 * span)
    for tri in layout.mesh.faces:
        poly = " ".join(pt(pts[v]) for v in tri)
        parts.append(
            f'<polygon points="{poly}" fill="#cfe2f3" stroke="#1f3b57" stroke-width="{stroke}"/>'
        )
    if radii is not None:
        rstroke = _fmt(0.002 * span)
        for v, r in enumerate(radii):
            c = pts[v]
            parts.append(
                f'<circle cx="{_fmt(c[0])}" cy="{_fmt(vb[1] + vb[3] - (c[1] - vb[1]))}" '
                f'r="{_fmt(float(r))}" fill="none" stroke="#cc4125" stroke-width="{rstroke}"/>'
            )
    if markers is not None:
        rr = _fmt(0.015 * span)
        for m in markers:
            c = pts[m]
            parts.append(
                f'<circle cx="{_fmt(c[0])}" cy="{_fmt(vb[1] + vb[3] - (c[1] - vb[1]))}" '
                f'r="{rr}" fill="#38761d"/>'
            )
    if labels:
        fs = _fmt(0.03 * span)
        for v in range(len(pts)):
            c = pts[v]
            parts.append(
                f'<text x="{_fmt(c[0])}" y="{_fmt(vb[1] + vb[3] - (c[1] - vb[1]))}" '
                f'font-size="{fs}">{v}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
