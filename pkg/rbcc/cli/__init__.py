"""rbcc CLI - one subcommand per experiment.

- `rbcc transient`       - cold start and OOK symbol transients
- `rbcc sweep-pump`      - output, efficiency and settling versus pump power
- `rbcc freq-response`   - small-signal modulation bandwidth
- `rbcc sweep-lambda`    - SNR, capacity and harvest versus the split ratio
- `rbcc ber`             - Monte-Carlo BER with the cavity in the loop
- `rbcc reproduce-all`   - all of the above
- `rbcc inspect`         - derived quantities and scenario checks
"""

from __future__ import annotations

import warnings
from collections.abc import Callable
from pathlib import Path

import typer

from rbcc.cli.console import Icons, console, create_progress, format_duration, print_error, print_success
from rbcc.config import get_settings
from rbcc.errors import RBCCError
from rbcc.events import (
    BER_POINT_DONE,
    EXPERIMENT_STARTED,
    RUN_COMPLETE,
    SWEEP_POINT_DONE,
    event_bus,
)
from rbcc.logging import bind_run_context, clear_run_context, configure_logging
from rbcc.output import RunManifest
from rbcc.params import ConfigBundle, apply_seed_override, default_bundle, load_config
from rbcc.version import __version__

warnings.filterwarnings("ignore", category=DeprecationWarning)
warnings.filterwarnings("ignore", category=PendingDeprecationWarning)

app = typer.Typer(
    name="rbcc",
    help=f"{Icons.BEAM} Resonant beam charging and communication simulator",
    add_completion=False,
    pretty_exceptions_show_locals=False,
    no_args_is_help=True,
)

_state = {"verbose": False}


def version_callback(value: bool):
    if value:
        console.print(f"[bold cyan]rbcc[/bold cyan] v{__version__}")
        raise typer.Exit()


@app.callback()
def main(
    version: bool = typer.Option(
        None, "--version", "-V", callback=version_callback, is_eager=True
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logs and tracebacks"),
    json_logs: bool = typer.Option(False, "--json-logs", help="JSON log lines on stderr"),
):
    """Simulate a resonant beam link carrying power and data."""
    settings = get_settings()
    _state["verbose"] = verbose
    configure_logging(
        verbose=verbose,
        json_output=json_logs or settings.json_logs,
        rich_console=console,
    )


def _resolve(config: Path | None, seed: int | None) -> ConfigBundle:
    bundle = load_config(config) if config is not None else default_bundle()
    return apply_seed_override(bundle, seed, get_settings().rng_seed)


def _with_progress(fn: Callable[[], object]) -> object:
    progress = create_progress()
    tasks: dict[str, int] = {}

    def on_point(experiment: str = "", index: int = 0, total: int = 0, **_: object) -> None:
        key = experiment or "points"
        if key not in tasks:
            tasks[key] = progress.add_task(key, total=total)
        progress.update(tasks[key], completed=index, total=total)

    def on_ber(index: int = 0, total: int = 0, **_: object) -> None:
        on_point("ber points", index, total)

    def on_started(command: str = "", **_: object) -> None:
        tasks[command] = progress.add_task(command, total=None)

    def on_complete(
        command: str = "", outputs: list[str] | None = None, duration_s: float = 0.0, **_: object
    ) -> None:
        if command in tasks:
            progress.remove_task(tasks.pop(command))
        for path in outputs or []:
            print_success(path)
        console.print(f"  [dim]{command} took {format_duration(duration_s)}[/dim]")

    unsubscribe = [
        event_bus.subscribe(SWEEP_POINT_DONE, on_point),
        event_bus.subscribe(BER_POINT_DONE, on_ber),
        event_bus.subscribe(EXPERIMENT_STARTED, on_started),
        event_bus.subscribe(RUN_COMPLETE, on_complete),
    ]
    try:
        with progress:
            return fn()
    finally:
        for unsub in unsubscribe:
            unsub()


def _run(
    command: str,
    config: Path | None,
    out: Path | None,
    seed: int | None,
    jobs: int | None,
    svg: bool,
) -> list[RunManifest]:
    from rbcc.cli.runs import COMMANDS, cmd_reproduce_all

    settings = get_settings()
    try:
        bundle = _resolve(config, seed)
        out_dir = out if out is not None else settings.out_path
        n_jobs = jobs if jobs is not None else settings.jobs
        bind_run_context(command=command, seed=bundle.sim.rng_seed)
        kwargs = {"config_path": str(config) if config else None, "svg": svg, "jobs": n_jobs}
        if command == "reproduce-all":
            manifests = _with_progress(lambda: cmd_reproduce_all(bundle, out_dir, **kwargs))
        else:
            manifests = [_with_progress(lambda: COMMANDS[command](bundle, out_dir, **kwargs))]
    except RBCCError as e:
        print_error(f"{command} failed", str(e))
        if _state["verbose"]:
            console.print_exception()
        raise typer.Exit(code=e.exit_code)
    finally:
        clear_run_context()
    return manifests


ConfigOption = typer.Option(None, "--config", "-c", help="Scenario file (key = value lines)")
OutOption = typer.Option(None, "--out", "-o", help="Output directory [env: RBCC_OUT_DIR]")
SeedOption = typer.Option(None, "--seed", min=0, help="RNG seed, overrides the file and RBCC_RNG_SEED")
JobsOption = typer.Option(None, "--jobs", "-j", min=1, help="Worker processes [env: RBCC_JOBS]")
SvgOption = typer.Option(False, "--svg", help="Also write an SVG plot per CSV")


@app.command()
def transient(
    config: Path = ConfigOption,
    out: Path = OutOption,
    seed: int = SeedOption,
    jobs: int = JobsOption,
    svg: bool = SvgOption,
):
    """Cold-start transient and OOK symbol edges (fig6_transient.csv, relaxation.json)."""
    _run("transient", config, out, seed, jobs, svg)


@app.command("sweep-pump")
def sweep_pump(
    config: Path = ConfigOption,
    out: Path = OutOption,
    seed: int = SeedOption,
    jobs: int = JobsOption,
    svg: bool = SvgOption,
):
    """Steady output, efficiency and settling time per pump power (fig7_pump_sweep.csv)."""
    _run("sweep-pump", config, out, seed, jobs, svg)


@app.command("freq-response")
def freq_response(
    config: Path = ConfigOption,
    out: Path = OutOption,
    seed: int = SeedOption,
    jobs: int = JobsOption,
    svg: bool = SvgOption,
):
    """Small-signal gain and phase versus modulation frequency (fig8_freq_response.csv)."""
    _run("freq-response", config, out, seed, jobs, svg)


@app.command("sweep-lambda")
def sweep_lambda(
    config: Path = ConfigOption,
    out: Path = OutOption,
    seed: int = SeedOption,
    jobs: int = JobsOption,
    svg: bool = SvgOption,
):
    """SNR, capacity and PV power versus the splitting ratio (fig9_lambda.csv)."""
    _run("sweep-lambda", config, out, seed, jobs, svg)


@app.command()
def ber(
    config: Path = ConfigOption,
    out: Path = OutOption,
    seed: int = SeedOption,
    jobs: int = JobsOption,
    svg: bool = SvgOption,
):
    """Monte-Carlo BER per rate and SNR with the cavity in the loop (fig10_ber.csv)."""
    _run("ber", config, out, seed, jobs, svg)


@app.command("reproduce-all")
def reproduce_all(
    config: Path = ConfigOption,
    out: Path = OutOption,
    seed: int = SeedOption,
    jobs: int = JobsOption,
    svg: bool = SvgOption,
):
    """Run every experiment in sequence."""
    _run("reproduce-all", config, out, seed, jobs, svg)


@app.command()
def inspect(
    config: Path = ConfigOption,
    seed: int = SeedOption,
    show_config: bool = typer.Option(False, "--show-config", help="Print every key in SI units"),
):
    """Derived laser quantities and scenario sanity checks."""
    from rbcc.cli.checks import run_inspect

    try:
        bundle = _resolve(config, seed)
    except RBCCError as e:
        print_error("inspect failed", str(e))
        raise typer.Exit(code=e.exit_code)
    code = run_inspect(bundle, str(config) if config else None, show_config)
    raise typer.Exit(code=code)


def cli():
    app()
