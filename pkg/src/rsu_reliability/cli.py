"""Command-line client for the estimation service.

The CLI is a thin shuttle: it loads the config and input files named there,
posts them to the service (an in-process instance by default, or a remote
one via ``--server``), and writes the returned files atomically into the
output directory.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx

from rsu_reliability.pipeline import apply_overrides
from rsu_reliability.scenario import ConfigError
from rsu_reliability.serialize import atomic_write_text

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

_IO_KEYS = {"stream", "streams", "reference", "verdicts", "scenario_id"}


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _post(server: Optional[str], path: str, payload: dict) -> dict:
    """POST to a remote server, or to an in-process app instance."""
    if server is not None:
        try:
            response = httpx.post(f"{server.rstrip('/')}{path}", json=payload,
                                  timeout=600.0)
        except httpx.HTTPError as exc:
            raise CliFailure(EXIT_INTERNAL, f"server unreachable: {exc}")
    else:
        from rsu_reliability.service.app import app

        async def call():
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://service",
                                         timeout=600.0) as client:
                return await client.post(path, json=payload)

        response = asyncio.run(call())

    if response.status_code == 200:
        return response.json()
    if response.status_code == 422:
        body = response.json()
        kind = body.get("kind")
        detail = body.get("detail", body)
        if kind == "config":
            raise CliFailure(EXIT_CONFIG, f"configuration error: {detail}")
        if kind == "data":
            raise CliFailure(EXIT_DATA, f"data error: {detail}")
        raise CliFailure(EXIT_CONFIG, f"invalid request: {detail}")
    raise CliFailure(
        EXIT_INTERNAL, f"service error {response.status_code}: {response.text}"
    )


def _load_config(path: str, seed: Optional[int], sets: tuple[str, ...]) -> tuple[dict, dict]:
    """Read the config file, apply --seed/--set, split off the io section."""
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliFailure(EXIT_CONFIG, f"configuration error: no such file: {path}")
    except json.JSONDecodeError as exc:
        raise CliFailure(EXIT_CONFIG,
                         f"configuration error: {path} is not valid JSON ({exc})")
    if seed is not None:
        raw["seed"] = seed
    if sets:
        try:
            raw = apply_overrides(raw, list(sets))
        except ConfigError as exc:
            raise CliFailure(EXIT_CONFIG, f"configuration error: {exc}")
    io = raw.pop("io", {})
    unknown = set(io) - _IO_KEYS
    if unknown:
        raise CliFailure(
            EXIT_CONFIG,
            f"configuration error: io.{sorted(unknown)[0]}: unknown key",
        )
    return raw, io


def _read_input(path: Path, what: str) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise CliFailure(EXIT_DATA, f"data error: missing {what} file: {path}")


def _write_bundle(out_dir: str, bundle: dict) -> None:
    for name, text in bundle["files"].items():
        atomic_write_text(Path(out_dir) / name, text)


def _echo_summary(bundle: dict) -> None:
    click.echo(json.dumps(bundle["summary"], sort_keys=True))


def _run(func) -> None:
    try:
        func()
    except CliFailure as failure:
        click.echo(str(failure), err=True)
        sys.exit(failure.code)
    except Exception as exc:  # invariant violation or bug
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(EXIT_INTERNAL)


config_option = click.option("--config", "config_path", required=True,
                             type=click.Path(), help="Run config JSON file.")
out_option = click.option("--out", "out_dir", default=".", show_default=True,
                          type=click.Path(file_okay=False),
                          help="Output directory.")
set_option = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                          help="Override a config entry (repeatable).")
seed_option = click.option("--seed", type=click.IntRange(0, 2**64 - 1),
                           default=None, help="Override the scenario seed.")
server_option = click.option("--server", default=None, metavar="URL",
                             help="Remote service URL (default: in-process).")


@click.group()
def main() -> None:
    """Reliability estimation for RSU cooperative-perception streams."""


@main.command()
@config_option
@out_option
@set_option
@seed_option
@server_option
def simulate(config_path, out_dir, sets, seed, server) -> None:
    """Simulate a scenario and write stream.ndjson."""

    def go():
        raw, _ = _load_config(config_path, seed, sets)
        bundle = _post(server, "/simulate", {"config": raw, "overrides": []})
        _write_bundle(out_dir, bundle)
        _echo_summary(bundle)

    _run(go)


@main.command()
@config_option
@out_option
@set_option
@seed_option
@server_option
def commission(config_path, out_dir, sets, seed, server) -> None:
    """Build per-lane reference opinions from fault-free streams.

    Reads the streams named in the config's io.streams (default: the
    stream.ndjson in the output directory) and writes reference.json.
    """

    def go():
        _, io = _load_config(config_path, seed, sets)
        paths = io.get("streams") or [io.get("stream") or
                                      Path(out_dir) / "stream.ndjson"]
        streams = [_read_input(Path(p), "stream") for p in paths]
        bundle = _post(server, "/commission", {"streams": streams})
        _write_bundle(out_dir, bundle)
        _echo_summary(bundle)

    _run(go)


@main.command()
@config_option
@out_option
@set_option
@seed_option
@click.option("--label", type=click.Choice(["correct", "faulty"]), default=None,
              help="Class label stored in the verdict.")
@server_option
def estimate(config_path, out_dir, sets, seed, label, server) -> None:
    """Run the four tests over a stream and write metrics plus a verdict.

    Reads io.stream (default <out>/stream.ndjson) and io.reference (default
    <out>/reference.json).
    """

    def go():
        raw, io = _load_config(config_path, seed, sets)
        stream = _read_input(Path(io.get("stream") or
                                  Path(out_dir) / "stream.ndjson"), "stream")
        reference = _read_input(Path(io.get("reference") or
                                     Path(out_dir) / "reference.json"),
                                "reference")
        bundle = _post(server, "/estimate", {
            "config": raw,
            "overrides": [],
            "stream": stream,
            "reference": reference,
            "label": label,
            "scenario_id": io.get("scenario_id"),
        })
        _write_bundle(out_dir, bundle)
        _echo_summary(bundle)

    _run(go)


@main.command()
@config_option
@out_option
@set_option
@server_option
def evaluate(config_path, out_dir, sets, server) -> None:
    """Summarize labeled verdicts into a separation report and beta CSV.

    Reads the verdict files named in the config's io.verdicts.
    """

    def go():
        _, io = _load_config(config_path, None, sets)
        paths = io.get("verdicts")
        if not paths:
            raise CliFailure(EXIT_CONFIG,
                             "configuration error: io.verdicts: missing key")
        verdicts = [_read_input(Path(p), "verdict") for p in paths]
        bundle = _post(server, "/evaluate", {"verdicts": verdicts})
        _write_bundle(out_dir, bundle)
        _echo_summary(bundle)

    _run(go)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port) -> None:
    """Run the estimation service."""
    import uvicorn

    from rsu_reliability.service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
