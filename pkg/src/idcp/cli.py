"""Command line interface: a thin client of the HTTP service.

By default commands run against an in-process instance of the FastAPI app
(no server needed); pass --server to talk to a remote instance instead. The
environment variable IDCP_SEED overrides any configured seed.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import click
import httpx


def _post(ctx, path: str, payload: dict) -> dict:
    server = ctx.obj.get("server")
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            resp = client.post(path, json=payload)
    else:
        # in-process: drive the ASGI app directly, no server required
        import asyncio

        from .service import app

        async def call():
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://idcp", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        resp = asyncio.run(call())
    if resp.status_code != 200:
        try:
            body = resp.json()
            msg = f"{body.get('error', 'error')}: {body.get('message', resp.text)}"
        except Exception:
            msg = resp.text
        raise click.ClickException(msg)
    return resp.json()


def _emit(data: dict, out: str | None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


def _seed(value: int) -> int:
    env = os.environ.get("IDCP_SEED")
    return int(env) if env else value


def _parse_points(text: str) -> list[list[float]]:
    pts = []
    for part in text.split(";"):
        x, y = part.split(",")
        pts.append([float(x), float(y)])
    return pts


def _parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",")]


@click.group()
@click.option("--server", default=None, help="Base URL of a running service (default: in-process).")
@click.pass_context
def main(ctx, server):
    """Inversive distance circle packing toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("idcp.service:app", host=host, port=port)


# --- idcp map ---------------------------------------------------------------

@main.command("map")
@click.option("--domain", "domain_path", required=True, type=click.Path(exists=True),
              help="Domain JSON: {\"polygon\": [[x,y],...]}.")
@click.option("--markers", required=True, help="Three boundary points 'x1,y1;x2,y2;x3,y3'.")
@click.option("--weight", default=2.0, show_default=True, type=float)
@click.option("--scales", required=True, help="Comma-separated decreasing lattice scales.")
@click.option("--subdiv", default=1, show_default=True, type=int)
@click.option("--steps", default=32, show_default=True, type=int)
@click.option("--curvature-tol", default=1e-9, show_default=True, type=float)
@click.option("--angle-floor", default=None, type=float)
@click.option("--angle-ceiling", default=None, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_context
def map_cmd(ctx, domain_path, markers, weight, scales, subdiv, steps, curvature_tol,
            angle_floor, angle_ceiling, seed, out_dir):
    """Run the full lattice-approximation pipeline over a scale sequence."""
    domain = json.loads(Path(domain_path).read_text())["polygon"]
    payload = {
        "domain": domain,
        "markers": _parse_points(markers),
        "weight": weight,
        "scales": _parse_floats(scales),
        "subdiv": subdiv,
        "flow": {
            "steps": steps,
            "curvature_tol": curvature_tol,
            "angle_floor": angle_floor,
            "angle_ceiling": angle_ceiling,
            "seed": _seed(seed),
        },
        "out_dir": str(out_dir),
        "seed": _seed(seed),
    }
    data = _post(ctx, "/pipeline/run", payload)
    _emit(data, None)


# --- idcp flow --------------------------------------------------------------

@main.group()
def flow():
    """Prescribed-curvature flows."""


@flow.command("corner")
@click.option("--n", required=True, type=int, help="Subdivision order of the triangle.")
@click.option("--alpha", required=True, type=float, help="Target apex angle in radians.")
@click.option("--weight", default=2.0, show_default=True, type=float)
@click.option("--steps", default=32, show_default=True, type=int)
@click.option("--curvature-tol", default=1e-9, show_default=True, type=float)
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def flow_corner(ctx, n, alpha, weight, steps, curvature_tol, out):
    """Corner flow on an n-subdivided equilateral triangle."""
    data = _post(ctx, "/flow/corner", {
        "n": n, "weight": weight, "alpha": alpha,
        "config": {"steps": steps, "curvature_tol": curvature_tol},
    })
    _emit(data, out)


@flow.command("run")
@click.option("--mesh", "mesh_path", required=True, type=click.Path(exists=True))
@click.option("--state", "state_path", required=True, type=click.Path(exists=True))
@click.option("--dirichlet", required=True, help="Comma-separated vertex ids pinned to w=0.")
@click.option("--target", "target_path", required=True, type=click.Path(exists=True),
              help="JSON list of per-vertex target curvatures.")
@click.option("--steps", default=32, show_default=True, type=int)
@click.option("--curvature-tol", default=1e-9, show_default=True, type=float)
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def flow_run(ctx, mesh_path, state_path, dirichlet, target_path, steps, curvature_tol, out):
    """Integrate the interpolation flow on an arbitrary mesh and state."""
    data = _post(ctx, "/flow/run", {
        "mesh": json.loads(Path(mesh_path).read_text()),
        "state": json.loads(Path(state_path).read_text()),
        "dirichlet": [int(t) for t in dirichlet.split(",")],
        "target": json.loads(Path(target_path).read_text()),
        "config": {"steps": steps, "curvature_tol": curvature_tol},
    })
    _emit(data, out)


@flow.command("flatten")
@click.option("--mesh", "mesh_path", required=True, type=click.Path(exists=True),
              help="Mesh JSON with three markers.")
@click.option("--weight", default=2.0, show_default=True, type=float)
@click.option("--subdiv", default=3, show_default=True, type=int)
@click.option("--curvature-tol", default=1e-9, show_default=True, type=float)
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def flow_flatten(ctx, mesh_path, weight, subdiv, curvature_tol, out):
    """Two-step flattening of a marked equilateral disk."""
    data = _post(ctx, "/flow/flatten", {
        "mesh": json.loads(Path(mesh_path).read_text()),
        "weight": weight,
        "subdiv": subdiv,
        "config": {"curvature_tol": curvature_tol},
    })
    _emit(data, out)


# --- idcp spiral ---------------------------------------------------------------

@main.group()
def spiral():
    """Spiral hexagonal lattice experiments."""


@spiral.command("constants")
@click.option("--weights", required=True, help="Three direction weights 'i1,i2,i3'.")
@click.option("-u", "--label", default=0.0, type=float)
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def spiral_constants(ctx, weights, label, out):
    """Solve the all-degenerate (lambda, mu) system."""
    data = _post(ctx, "/spiral/constants", {"I": _parse_floats(weights), "u": label})
    _emit(data, out)


@spiral.command("state")
@click.option("--weights", required=True)
@click.option("--lam", default=1.0, type=float)
@click.option("--mu", default=1.0, type=float)
@click.option("-m", "--radius", default=4, type=int)
@click.option("--svg", "svg_path", default=None, type=click.Path())
@click.option("--circles/--no-circles", default=True, help="Draw vertex circles of radius r(v).")
@click.option("--labels", is_flag=True, default=False, help="Draw vertex ids.")
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def spiral_state_cmd(ctx, weights, lam, mu, radius, svg_path, circles, labels, out):
    """Spiral packing state on a truncated lattice (optionally rendered)."""
    import math

    payload = {"I": _parse_floats(weights), "lambda": lam, "mu": mu, "m": radius}
    data = _post(ctx, "/spiral/state", payload)
    if svg_path:
        dev = _post(ctx, "/layout/develop", {"mesh": data["mesh"], "state": data["state"]})
        svg = _post(ctx, "/layout/svg", {
            "mesh": data["mesh"],
            "coords": dev["coords"],
            "radii": [math.exp(u) for u in data["state"]["labels"]] if circles else None,
            "labels": labels,
        })
        Path(svg_path).write_text(svg["svg"])
        click.echo(f"wrote {svg_path} (embedded: {dev['embedded']})")
    _emit(data, out)


@spiral.command("flatness")
@click.option("--weights", required=True)
@click.option("--lam", default=1.0, type=float)
@click.option("--mu", default=1.0, type=float)
@click.option("-m", "--radius", default=4, type=int)
@click.pass_context
def spiral_flatness(ctx, weights, lam, mu, radius):
    """Interior curvature of a spiral state (expected zero)."""
    payload = {"I": _parse_floats(weights), "lambda": lam, "mu": mu, "m": radius}
    data = _post(ctx, "/spiral/flatness", payload)
    click.echo(json.dumps({"max_abs": data["max_abs"],
                           "class_angle_spread": data["class_angle_spread"]}, indent=2))


@spiral.command("rigidity")
@click.option("--weight", default=2.0, type=float)
@click.option("-m", "--radius", default=6, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--trials", default=20, type=int)
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def spiral_rigidity(ctx, weight, radius, seed, trials, out):
    """Randomized search for non-constant flat embeddable factors."""
    data = _post(ctx, "/spiral/rigidity", {
        "weight": weight, "m": radius, "seed": _seed(seed), "random_trials": trials,
    })
    _emit(data, out)


# --- idcp verify ------------------------------------------------------------------

@main.group()
def verify():
    """Verification campaigns for the star oracles."""


@verify.command("maximal-principle")
@click.option("--samples", default=10000, show_default=True, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def verify_mp(ctx, samples, seed, out):
    """Randomized falsification campaign for the star maximal principle."""
    data = _post(ctx, "/verify/maximal-principle", {
        "samples": samples, "seed": _seed(seed),
    })
    _emit(data, out)


@verify.command("ring")
@click.option("--n", default=6, show_default=True, type=int)
@click.option("--weight", default=2.0, show_default=True, type=float)
@click.option("--samples", default=1000, show_default=True, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def verify_ring(ctx, n, weight, samples, seed, out):
    """Empirical ring-lemma constant over random flat stars."""
    data = _post(ctx, "/verify/ring", {
        "n": n, "weight": weight, "samples": samples, "seed": _seed(seed),
    })
    _emit(data, out)


# --- idcp mesh ----------------------------------------------------------------------

@main.group("mesh")
def mesh_group():
    """Mesh construction helpers."""


@mesh_group.command("star")
@click.option("--n", required=True, type=int)
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def mesh_star(ctx, n, out):
    """Star triangulation of an n-gon."""
    _emit(_post(ctx, "/mesh/star", {"n": n}), out)


@mesh_group.command("hex")
@click.option("--domain", "domain_path", required=True, type=click.Path(exists=True))
@click.option("--scale", required=True, type=float)
@click.option("--markers", required=True, help="'x1,y1;x2,y2;x3,y3'.")
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def mesh_hex(ctx, domain_path, scale, markers, out):
    """Hexagonal lattice approximation of a polygonal domain."""
    domain = json.loads(Path(domain_path).read_text())["polygon"]
    data = _post(ctx, "/mesh/hex-approx", {
        "domain": domain, "scale": scale, "markers": _parse_points(markers),
    })
    _emit(data, out)


if __name__ == "__main__":
    main()
