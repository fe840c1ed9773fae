"""Command-line front end: a thin client over the in-process service.

Every command talks to the FastAPI app through an in-process ASGI
transport, so CLI and HTTP behavior cannot drift apart.  stdout carries
only JSON (sorted keys); diagnostics go to stderr.

Exit codes: 0 success, 2 schema/problem-file error, 3 solver failure,
4 unsupported cone (no capable backend), 5 other (failed verification,
disturbance outside the set).
"""

from __future__ import annotations

import json
import sys

import click
import httpx

with __import__("warnings").catch_warnings():
    # starlette warns about its httpx-based TestClient; harmless here
    __import__("warnings").simplefilter("ignore")
    from fastapi.testclient import TestClient

from .service import app

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_SOLVER = 3
EXIT_UNSUPPORTED = 4
EXIT_OTHER = 5


def _client() -> TestClient:
    # in-process ASGI bridge; server exceptions surface as HTTP responses,
    # exactly as they would over the wire
    return TestClient(app, raise_server_exceptions=False)


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        click.echo(
            f"error: {path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}",
            err=True,
        )
        sys.exit(EXIT_SCHEMA)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_SCHEMA)


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
        click.echo(f"wrote {out}", err=True)
    else:
        click.echo(text)


def _fail_on_http(resp: httpx.Response) -> dict:
    if resp.status_code == 422:
        detail = resp.json().get("detail", resp.text)
        click.echo(f"error: {detail}", err=True)
        sys.exit(EXIT_SCHEMA)
    if resp.status_code == 409:
        click.echo(f"error: {resp.json().get('detail', resp.text)}", err=True)
        sys.exit(EXIT_OTHER)
    if resp.status_code != 200:
        click.echo(f"error: HTTP {resp.status_code}: {resp.text}", err=True)
        sys.exit(EXIT_OTHER)
    return resp.json()


@click.group()
def main() -> None:
    """Robust optimal control with adjustable uncertainty sets."""


@main.command()
@click.argument("problem_file", type=click.Path())
@click.option("--tol", default=1e-8, show_default=True, help="solver tolerance")
@click.option("--backend", default="builtin", show_default=True)
@click.option("--out", default=None, type=click.Path(), help="write result JSON here")
def solve(problem_file: str, tol: float, backend: str, out: str | None) -> None:
    """Solve the synthesis counterpart of a problem file."""
    problem = _read_json(problem_file)
    with _client() as client:
        resp = client.post(
            "/solve", json={"problem": problem, "tol": tol, "backend": backend}
        )
    doc = _fail_on_http(resp)
    _emit(doc, out)
    if doc["status"] == "optimal":
        sys.exit(EXIT_OK)
    if doc["status"] == "unsupported-cone":
        sys.exit(EXIT_UNSUPPORTED)
    sys.exit(EXIT_SOLVER)


@main.command()
@click.argument("result_file", type=click.Path())
@click.argument("problem_file", type=click.Path())
@click.option("--probes", default=10_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--tol", default=1e-6, show_default=True, help="violation tolerance")
@click.option("--out", default=None, type=click.Path())
def verify(
    result_file: str, problem_file: str, probes: int, seed: int, tol: float,
    out: str | None,
) -> None:
    """Certify robust feasibility of a solved result against its problem."""
    result = _read_json(result_file)
    problem = _read_json(problem_file)
    with _client() as client:
        resp = client.post(
            "/verify",
            json={
                "problem": problem,
                "result": result,
                "probes": probes,
                "seed": seed,
                "tolerance": tol,
            },
        )
    doc = _fail_on_http(resp)
    _emit(doc, out)
    sys.exit(EXIT_OK if doc["verdict"] else EXIT_OTHER)


@main.command()
@click.argument("result_file", type=click.Path())
@click.argument("problem_file", type=click.Path())
@click.option("--w", "w_text", default=None, help="comma-separated disturbance")
@click.option("--w-file", default=None, type=click.Path(), help="JSON array file")
@click.option("--out", default=None, type=click.Path())
def evaluate(
    result_file: str, problem_file: str, w_text: str | None, w_file: str | None,
    out: str | None,
) -> None:
    """Evaluate the recovered policy at a disturbance realization."""
    if (w_text is None) == (w_file is None):
        click.echo("error: give exactly one of --w or --w-file", err=True)
        sys.exit(EXIT_SCHEMA)
    if w_text is not None:
        try:
            w = [float(v) for v in w_text.split(",") if v.strip()]
        except ValueError as exc:
            click.echo(f"error: bad --w: {exc}", err=True)
            sys.exit(EXIT_SCHEMA)
    else:
        w = _read_json(w_file)
    result = _read_json(result_file)
    problem = _read_json(problem_file)
    with _client() as client:
        resp = client.post(
            "/evaluate", json={"problem": problem, "result": result, "w": w}
        )
    doc = _fail_on_http(resp)
    _emit(doc, out)
    sys.exit(EXIT_OK)


@main.command()
@click.argument("name", type=click.Choice(["robustness", "reserve"]))
@click.option("--lams", default="20,30,40,50", show_default=True,
              help="reserve demo reward grid")
@click.option("--horizon", default=24, show_default=True)
@click.option("--m", default=30, show_default=True, help="polytope vertex count")
@click.option("--anchor-radius", default=40.0, show_default=True)
@click.option("--out", default=None, type=click.Path())
def demo(
    name: str, lams: str, horizon: int, m: int, anchor_radius: float,
    out: str | None,
) -> None:
    """Reproduce the benchmark experiments (volume table / bid-curve CSV)."""
    with _client() as client:
        if name == "robustness":
            resp = client.get(
                "/demo/robustness", params={"m": m, "anchor_radius": anchor_radius}
            )
        else:
            resp = client.get(
                "/demo/reserve", params={"horizon": horizon, "lams": lams}
            )
    doc = _fail_on_http(resp)
    _emit(doc, out)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
