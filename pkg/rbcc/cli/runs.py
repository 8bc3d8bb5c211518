"""One function per experiment command: run it, write its files, return the manifest."""

from __future__ import annotations

import math
import time
from collections.abc import Callable
from pathlib import Path

import structlog

from rbcc.analysis import (
    frequency_response,
    relaxation_experiment,
    sweep_lambda,
    sweep_pump,
)
from rbcc.comms import ber_sweep
from rbcc.events import EXPERIMENT_STARTED, RUN_COMPLETE, event_bus
from rbcc.laser import (
    is_underdamped,
    pump_rate_from_power,
    pump_ratio,
    relaxation_frequency,
    threshold_density,
    threshold_pump_power,
)
from rbcc.output import RunManifest, write_csv, write_json, write_manifest, write_svg, write_sweep
from rbcc.params import ConfigBundle, serialize_config

logger = structlog.get_logger(__name__)

TRANSIENT_CSV = "fig6_transient.csv"
RELAXATION_JSON = "relaxation.json"
PUMP_SWEEP_CSV = "fig7_pump_sweep.csv"
FREQ_RESPONSE_CSV = "fig8_freq_response.csv"
LAMBDA_CSV = "fig9_lambda.csv"
BER_CSV = "fig10_ber.csv"


def _finish(
    command: str,
    bundle: ConfigBundle,
    config_path: str | None,
    outputs: list[Path],
    out_dir: Path,
    started: float,
) -> RunManifest:
    manifest = RunManifest(
        command=command,
        config_path=config_path,
        config_echo=serialize_config(bundle),
        seed=bundle.sim.rng_seed,
        outputs=[str(p) for p in outputs],
        duration_s=time.perf_counter() - started,
    )
    write_manifest(out_dir, manifest)
    event_bus.emit(
        RUN_COMPLETE, command=command, outputs=manifest.outputs, duration_s=manifest.duration_s
    )
    logger.info("run_complete", command=command, outputs=len(outputs), duration_s=manifest.duration_s)
    return manifest


def _start(command: str) -> float:
    event_bus.emit(EXPERIMENT_STARTED, command=command)
    logger.info("run_started", command=command)
    return time.perf_counter()


def cmd_transient(
    bundle: ConfigBundle,
    out_dir: Path,
    *,
    config_path: str | None = None,
    svg: bool = False,
    jobs: int = 1,
) -> RunManifest:
    """Cold start under bias plus the delayed OOK signal."""
    started = _start("transient")
    ts, metrics = relaxation_experiment(bundle)

    frame = ts.to_frame()
    outputs = [write_csv(out_dir / TRANSIENT_CSV, frame, bundle, "transient")]

    laser = bundle.laser
    r = pump_ratio(bundle.drive.bias_power, laser)
    payload = metrics.model_dump()
    payload.update(
        pump_ratio=r,
        threshold_density=threshold_density(laser),
        threshold_pump_power=threshold_pump_power(laser),
        pump_rate=float(pump_rate_from_power(bundle.drive.bias_power, laser)),
        underdamped=is_underdamped(r, laser),
        small_signal_freq=relaxation_frequency(r, laser) / (2.0 * math.pi) if r > 1.0 else None,
        n_steps=ts.n_steps,
        n_rejected=ts.n_rejected,
    )
    outputs.append(write_json(out_dir / RELAXATION_JSON, payload))
    if svg:
        outputs.append(
            write_svg(out_dir / "fig6_transient.svg", "t[s]", ["p_out[W]"], frame, title="transient")
        )
    return _finish("transient", bundle, config_path, outputs, out_dir, started)


def cmd_sweep_pump(
    bundle: ConfigBundle,
    out_dir: Path,
    *,
    config_path: str | None = None,
    svg: bool = False,
    jobs: int = 1,
) -> RunManifest:
    started = _start("sweep-pump")
    result = sweep_pump(None, bundle, jobs)
    outputs = write_sweep(
        out_dir, PUMP_SWEEP_CSV, result, bundle, "sweep-pump",
        svg_columns=["output_power"] if svg else None,
    )
    return _finish("sweep-pump", bundle, config_path, outputs, out_dir, started)


def cmd_freq_response(
    bundle: ConfigBundle,
    out_dir: Path,
    *,
    config_path: str | None = None,
    svg: bool = False,
    jobs: int = 1,
) -> RunManifest:
    started = _start("freq-response")
    result = frequency_response(None, None, bundle, jobs)
    outputs = write_sweep(
        out_dir, FREQ_RESPONSE_CSV, result, bundle, "freq-response",
        svg_columns=["gain"] if svg else None, log_x=True, log_y=True,
    )
    return _finish("freq-response", bundle, config_path, outputs, out_dir, started)


def cmd_sweep_lambda(
    bundle: ConfigBundle,
    out_dir: Path,
    *,
    config_path: str | None = None,
    svg: bool = False,
    jobs: int = 1,
) -> RunManifest:
    started = _start("sweep-lambda")
    result = sweep_lambda(None, bundle)
    outputs = write_sweep(
        out_dir, LAMBDA_CSV, result, bundle, "sweep-lambda",
        svg_columns=["snr"] if svg else None,
    )
    return _finish("sweep-lambda", bundle, config_path, outputs, out_dir, started)


def cmd_ber(
    bundle: ConfigBundle,
    out_dir: Path,
    *,
    config_path: str | None = None,
    svg: bool = False,
    jobs: int = 1,
) -> RunManifest:
    started = _start("ber")
    result = ber_sweep(bundle, jobs=jobs)
    outputs = write_sweep(
        out_dir, BER_CSV, result, bundle, "ber",
        svg_columns=["ber"] if svg else None, log_y=True,
    )
    return _finish("ber", bundle, config_path, outputs, out_dir, started)


COMMANDS: dict[str, Callable[..., RunManifest]] = {
    "transient": cmd_transient,
    "sweep-pump": cmd_sweep_pump,
    "freq-response": cmd_freq_response,
    "sweep-lambda": cmd_sweep_lambda,
    "ber": cmd_ber,
}


def cmd_reproduce_all(
    bundle: ConfigBundle,
    out_dir: Path,
    *,
    config_path: str | None = None,
    svg: bool = False,
    jobs: int = 1,
) -> list[RunManifest]:
    """Every experiment in turn, same bundle and output directory."""
    return [
        fn(bundle, out_dir, config_path=config_path, svg=svg, jobs=jobs)
        for fn in COMMANDS.values()
    ]
