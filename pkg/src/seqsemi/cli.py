"""Command-line runner: a thin client over the HTTP service.

By default each command talks to an in-process instance of the service
through an ASGI transport, so no server has to be running; --server points
the same client at a deployed instance instead.  Exit codes: 0 all checks
pass, 1 a check failed, 2 configuration error.
"""

from __future__ import annotations

import json
import sys
from typing import Optional

import click
import httpx

from . import __version__
from .config import ConfigError, apply_overrides, load_config
from .reportio import write_csv, write_run_artifacts
from .service import create_app

EXIT_PASS = 0
EXIT_CHECK_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def _client(server: Optional[str]) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        # this starlette build warns about its own httpx bridge
        warnings.filterwarnings("ignore", message=".*httpx.*")
        from fastapi.testclient import TestClient

    return TestClient(create_app())


def _load(config_path, seed, scenarios):
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    return apply_overrides(config, seed=seed, scenarios=scenarios)


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code == 422:
        click.echo(f"error: request rejected: {response.text}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    response.raise_for_status()
    return response.json()


server_option = click.option("--server", default=None, help="Service URL; default runs in-process.")
config_option = click.option("--config", "config_path", required=True, type=click.Path(), help="Config JSON file.")
seed_option = click.option("--seed", type=int, default=None, help="Override the config master_seed.")
scenarios_option = click.option("--scenarios", type=int, default=None, help="Override the scenario count.")
quiet_option = click.option("--quiet", is_flag=True, help="Suppress per-check output.")


@click.group()
@click.version_option(version=__version__, prog_name="seqsemi")
def main():
    """Sequence-semimartingale integration checks and simulations."""


@main.command()
@config_option
@click.option("--out", "out_dir", default="reports", type=click.Path(), help="Output directory.")
@seed_option
@scenarios_option
@quiet_option
@server_option
def run(config_path, out_dir, seed, scenarios, quiet, server):
    """Run the configured checks and write reports."""
    config = _load(config_path, seed, scenarios)
    with _client(server) as client:
        result = _post(client, "/run", {"config": config.model_dump()})
    write_run_artifacts(out_dir, config, result)
    failing = [r["check"] for r in result["reports"] if not r["pass"]]
    if not quiet:
        for report in result["reports"]:
            click.echo(f"{report['check']}: {'PASS' if report['pass'] else 'FAIL'}")
        click.echo(f"reports written to {out_dir}")
    if failing:
        click.echo(f"error: failing checks: {', '.join(failing)}", err=True)
        sys.exit(EXIT_CHECK_FAILURE)
    sys.exit(EXIT_PASS)


@main.command("list-checks")
@server_option
def list_checks_cmd(server):
    """List the available checks."""
    with _client(server) as client:
        response = client.get("/checks")
        response.raise_for_status()
    for item in response.json()["checks"]:
        click.echo(f"{item['name']}: {item['description']}")


@main.command()
@config_option
@quiet_option
@server_option
def validate(config_path, quiet, server):
    """Validate a config file without running anything."""
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            text = fh.read()
        raw = json.loads(text)
    except OSError as exc:
        click.echo(f"error: cannot read config: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    except json.JSONDecodeError as exc:
        click.echo(f"error: config is not valid JSON: line {exc.lineno} column {exc.colno}: {exc.msg}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    with _client(server) as client:
        result = _post(client, "/validate", {"config": raw})
    if result["valid"]:
        if not quiet:
            click.echo("config is valid")
        sys.exit(EXIT_PASS)
    for line in result["errors"]:
        click.echo(f"error: {line}", err=True)
    sys.exit(EXIT_CONFIG_ERROR)


@main.command()
@config_option
@click.option("--out", "out_dir", default="reports", type=click.Path(), help="Output directory.")
@seed_option
@scenarios_option
@quiet_option
@server_option
def simulate(config_path, out_dir, seed, scenarios, quiet, server):
    """Generate the configured noise paths and export them as CSV."""
    import os

    config = _load(config_path, seed, scenarios)
    with _client(server) as client:
        result = _post(client, "/simulate", {"config": config.model_dump()})
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "paths.csv")
    write_csv(path, result["rows"])
    if not quiet:
        click.echo(f"paths written to {path}")
    sys.exit(EXIT_PASS)


@main.command()
@server_option
def version(server):
    """Print the library version."""
    with _client(server) as client:
        response = client.get("/version")
        response.raise_for_status()
    click.echo(response.json()["version"])


if __name__ == "__main__":
    main()
