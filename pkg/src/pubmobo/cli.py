"""Command-line interface: experiment sweeps, aggregation, method comparison,
plot-data export, and the interactive session service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import PubmoboError
from .harness import (
    AXES,
    ExperimentConfig,
    aggregate,
    compare_methods,
    export_plotdata,
    run_experiment,
)


def _fail(code: str, message: str, field: str | None = None) -> None:
    payload = {"code": code, "message": message}
    if field:
        payload["field"] = field
    click.echo(json.dumps(payload), err=True)
    sys.exit(1)


@click.group()
def main():
    """Preference-guided multi-objective Bayesian optimization toolkit."""


@main.command("run")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--force", is_flag=True, help="Recompute cells even if traces exist.")
@click.option("--workers", type=int, default=None, help="Parallel cell workers.")
def run_cmd(config_path, force, workers):
    """Run the experiment sweep described by a JSON config file."""
    try:
        cfg = ExperimentConfig.from_json(config_path)
        if workers is not None:
            from dataclasses import replace

            cfg = replace(cfg, workers=workers)
        out = run_experiment(cfg, force=force)
        manifest = json.loads((out / "manifest.json").read_text())
        failed = {k: v for k, v in manifest["cells"].items() if v.get("status") != "ok"}
        click.echo(json.dumps({"results_dir": str(out), "cells": len(manifest["cells"]),
                               "failed": failed}))
        if failed:
            sys.exit(1)
    except PubmoboError as exc:
        _fail(type(exc).__name__, str(exc))
    except (KeyError, ValueError, OSError) as exc:
        _fail(type(exc).__name__, str(exc))


@main.command("aggregate")
@click.argument("results_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--axis", type=click.Choice(AXES), default="evaluations")
@click.option("--out", type=click.Path(), default=None, help="Write curves as JSON here.")
def aggregate_cmd(results_dir, axis, out):
    """Aggregate best-so-far percentile curves across seeds."""
    try:
        curves = aggregate(results_dir, axis)
        payload = [
            {
                "benchmark": c.benchmark,
                "method": c.method,
                "axis": c.axis,
                "steps": c.steps.tolist(),
                "median": {k: v.tolist() for k, v in c.median.items()},
                "p25": {k: v.tolist() for k, v in c.p25.items()},
                "p75": {k: v.tolist() for k, v in c.p75.items()},
            }
            for c in curves
        ]
        text = json.dumps(payload)
        if out:
            Path(out).write_text(text)
            click.echo(json.dumps({"written": out, "curves": len(curves)}))
        else:
            click.echo(text)
    except PubmoboError as exc:
        _fail(type(exc).__name__, str(exc))


@main.command("compare")
@click.argument("results_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--method-a", default="pub-mobo", show_default=True)
@click.option("--method-b", default="eubo-qeiuu", show_default=True)
def compare_cmd(results_dir, method_a, method_b):
    """One-sided Mann-Whitney p-values: is method A's terminal metric lower?"""
    try:
        table = compare_methods(results_dir, method_a, method_b)
        click.echo(json.dumps({"method_a": method_a, "method_b": method_b, "table": table},
                              indent=1))
    except PubmoboError as exc:
        _fail(type(exc).__name__, str(exc))


@main.command("export")
@click.argument("results_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", type=click.Path(), default=None, help="CSV output directory.")
def export_cmd(results_dir, out):
    """Export plot-ready CSV files (one per benchmark, metric, axis)."""
    try:
        out = out or str(Path(results_dir) / "plotdata")
        written = []
        for axis in AXES:
            written += export_plotdata(aggregate(results_dir, axis), out)
        click.echo(json.dumps({"written": [str(p) for p in written]}))
    except PubmoboError as exc:
        _fail(type(exc).__name__, str(exc))


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8777, show_default=True)
@click.option("--data-dir", type=click.Path(), default="sessions", show_default=True,
              help="Directory for session event logs.")
@click.option("--ui-dir", type=click.Path(), default=None,
              help="Static UI bundle to mount at /ui.")
def serve_cmd(host, port, data_dir, ui_dir):
    """Serve the interactive session API (and the UI bundle when present)."""
    import uvicorn

    from .service import create_app

    app = create_app(Path(data_dir), ui_dir=Path(ui_dir) if ui_dir else None)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
