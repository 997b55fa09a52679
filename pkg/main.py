#!/usr/bin/env python3
"""
killspec - spectral lab for the Killing generator of stationary spacetimes on flat tori
"""

import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional

import typer
from rich.console import Console
from rich.logging import RichHandler

from killspec import __version__
from killspec.core.benchmarks import ultrastatic_circle
from killspec.core.config import RunConfig, config_from_dict, parse_config, parse_grid_option
from killspec.core.errors import ConfigError, LabError
from killspec.core.lab import SpectralLab
from killspec.core.settings import LabSettings
from killspec.ui.export import export_artifact, export_names
from killspec.ui.report import LabReport

app = typer.Typer(
    name="killspec",
    help="Spectrum, Weyl law, periodic orbits and wave trace of the timelike Killing generator.",
    add_completion=False,
    no_args_is_help=True,
)
console = Console()
err_console = Console(stderr=True)


@dataclass
class CliState:
    config: Optional[Path] = None
    out: Optional[str] = None
    no_cache: bool = False
    seed: Optional[int] = None
    grid: Optional[str] = None
    threads: Optional[int] = None


STATE = CliState()


@app.callback()
def _root_callback(
    config: Optional[Path] = typer.Option(None, "--config", help="JSON run config"),
    out: Optional[str] = typer.Option(None, "--out", help="Output directory (overrides KILLSPEC_OUT)"),
    no_cache: bool = typer.Option(False, "--no-cache", help="Recompute every stage"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Seed of the orbit search (u64)"),
    grid: Optional[str] = typer.Option(None, "--grid", help="Grid points per axis, M[,M...]"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker cap inside stages"),
    log_level: str = typer.Option("INFO", "--log-level", help="DEBUG, INFO, WARNING or ERROR"),
):
    logging.basicConfig(
        level=log_level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False, rich_tracebacks=False)],
        force=True,
    )
    STATE.config = config
    STATE.out = out
    STATE.no_cache = no_cache
    STATE.seed = seed
    STATE.grid = grid
    STATE.threads = threads


@contextmanager
def _reported_errors() -> Iterator[None]:
    """Map lab errors to their exit codes"""
    try:
        yield
    except LabError as exc:
        err_console.print(f"[red]error:[/red] {exc.message}")
        raise typer.Exit(code=exc.exit_code)
    except typer.Exit:
        raise
    except Exception:
        err_console.print_exception()
        raise typer.Exit(code=1)


def _load_config(stages: List[str]) -> RunConfig:
    overrides = {
        'grid': parse_grid_option(STATE.grid),
        'stages': stages,
        'out_dir': STATE.out,
        'seed': STATE.seed,
        'threads': STATE.threads,
        'no_cache': STATE.no_cache,
    }
    if STATE.config is None:
        if stages != ['verify']:
            raise ConfigError("--config is required for this command")
        return config_from_dict({'model': ultrastatic_circle()}, overrides)
    return parse_config(STATE.config, overrides)


def _run(stage: str) -> SpectralLab:
    config = _load_config([stage])
    lab = SpectralLab(config)
    try:
        lab.run()
    finally:
        LabReport(console).draw(lab.results, lab.store.manifest.get('stages'))
        console.print(f"Results in [bold]{config.out_dir}[/bold]")
    return lab


@app.command("spectrum")
def spectrum(
    dump: Optional[Path] = typer.Option(None, "--dump-matrices", help="Also write P, X, q1, q2 as a binary dump"),
):
    """Solve the pencil and export the grouped spectrum"""
    with _reported_errors():
        lab = _run('spectrum')
        if dump is not None:
            lab.dump_matrices(dump)


@app.command("weyl")
def weyl():
    """Counting function and Weyl-law fit"""
    with _reported_errors():
        _run('weyl')


@app.command("orbits")
def orbits():
    """Periodic orbits of the reduced Killing flow"""
    with _reported_errors():
        _run('orbits')


@app.command("trace")
def trace():
    """Smoothed wave trace, peaks and amplitude fits"""
    with _reported_errors():
        _run('trace')


@app.command("forms")
def forms():
    """Energy and symplectic form checks, Pontryagin index"""
    with _reported_errors():
        _run('forms')


@app.command("verify")
def verify():
    """Run the acceptance suite on the built-in benchmarks"""
    with _reported_errors():
        _run('verify')


@app.command("export")
def export(
    what: str = typer.Option(..., "--what", help=f"One of: {', '.join(export_names())}"),
    fmt: str = typer.Option("csv", "--format", help="csv or json"),
    dest: Optional[Path] = typer.Option(None, "--dest", help="Target file (default <out>/<what>.<format>)"),
):
    """Rebuild an artifact from the cached stage outputs"""
    with _reported_errors():
        if STATE.out is not None:
            out_dir = STATE.out
        elif STATE.config is not None:
            out_dir = parse_config(STATE.config).out_dir
        else:
            out_dir = os.environ.get(LabSettings.OUT_ENV) or LabSettings.DEFAULT_OUT
        path = export_artifact(out_dir, what, fmt, dest)
        console.print(f"Wrote [bold]{path}[/bold]")


@app.command("version")
def version():
    """Print the package version"""
    console.print(f"killspec {__version__}")


def main():
    app()


if __name__ == "__main__":
    main()
