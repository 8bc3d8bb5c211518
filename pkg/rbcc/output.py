"""Result files: CSV tables with a commented header, JSON metrics, SVG plots and the run manifest.

Everything except the manifest is a pure function of config and seed, so a
rerun writes byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
import structlog  # noqa: E402
from pydantic import BaseModel, model_validator  # noqa: E402

from rbcc.errors import OutputError  # noqa: E402
from rbcc.params import ConfigBundle, defaulted_keys, serialize_config  # noqa: E402
from rbcc.sweep import SweepResult  # noqa: E402
from rbcc.version import __version__  # noqa: E402

logger = structlog.get_logger(__name__)

FLOAT_FORMAT = "%.12g"


class RunManifest(BaseModel):
    """What one CLI command produced; enough to rerun it."""

    command: str
    config_path: str | None
    config_echo: str
    seed: int
    version: str = __version__
    outputs: list[str]
    duration_s: float

    @model_validator(mode="after")
    def _outputs_exist(self) -> RunManifest:
        missing = [p for p in self.outputs if not Path(p).is_file()]
        if missing:
            raise OutputError(f"listed outputs missing: {', '.join(missing)}")
        return self


def header_lines(bundle: ConfigBundle, command: str) -> list[str]:
    """The ``#`` header every CSV carries: version, command, seed and the full config."""
    lines = [
        f"rbcc {__version__}",
        f"command: {command}",
        f"seed: {bundle.sim.rng_seed}",
        f"settle_band: {bundle.experiment.settle_band!r}",
    ]
    defaults = defaulted_keys(bundle)
    if defaults:
        lines.append(f"defaults applied: {', '.join(defaults)}")
    lines.extend(serialize_config(bundle).splitlines())
    return [f"# {line}\n" for line in lines]


def _prepare(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f"cannot create output directory {path.parent}: {e}")


def write_csv(
    path: str | Path,
    frame: pd.DataFrame,
    bundle: ConfigBundle,
    command: str,
    meta: dict[str, Any] | None = None,
) -> Path:
    """Write frame with the config header; meta entries become extra header lines."""
    path = Path(path)
    _prepare(path)
    header = header_lines(bundle, command)
    for key, value in (meta or {}).items():
        header.append(f"# meta.{key}: {_meta_text(value)}\n")
    try:
        with path.open("w", encoding="utf-8", newline="") as f:
            f.writelines(header)
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}")
    logger.info("csv_written", path=str(path), rows=len(frame))
    return path


def _meta_text(value: Any) -> str:
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return "none" if value is None else str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_json_safe(v) for v in value]
    return value


def write_json(path: str | Path, payload: BaseModel | dict[str, Any]) -> Path:
    """Write a metrics bundle as sorted, indented JSON; non-finite floats become null."""
    path = Path(path)
    _prepare(path)
    data = payload.model_dump(mode="python") if isinstance(payload, BaseModel) else payload
    try:
        path.write_text(
            json.dumps(_json_safe(data), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}")
    return path


def write_svg(
    path: str | Path,
    x: str,
    ys: list[str],
    frame: pd.DataFrame,
    *,
    title: str = "",
    group: str | None = None,
    log_x: bool = False,
    log_y: bool = False,
) -> Path:
    """Line plot of frame columns ys against x, one line per group value if given."""
    path = Path(path)
    _prepare(path)
    plt.rcParams["svg.hashsalt"] = "rbcc"

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    try:
        if group is None:
            for y in ys:
                ax.plot(frame[x], frame[y], label=y)
        else:
            for key, rows in frame.groupby(group, sort=False):
                for y in ys:
                    ax.plot(rows[x], rows[y], marker="o", label=f"{y} ({group}={key:g})")
        ax.set_xlabel(x)
        if log_x:
            ax.set_xscale("log")
        if log_y:
            ax.set_yscale("log")
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}")
    finally:
        plt.close(fig)
    return path


def write_sweep(
    out_dir: Path,
    filename: str,
    result: SweepResult,
    bundle: ConfigBundle,
    command: str,
    *,
    svg_columns: list[str] | None = None,
    log_x: bool = False,
    log_y: bool = False,
) -> list[Path]:
    """CSV of a sweep plus, when svg_columns is given, its plot next to it."""
    frame = result.to_frame()
    written = [write_csv(out_dir / filename, frame, bundle, command, result.meta)]
    if svg_columns:
        headers = {name: f"{name}[{result.units[name]}]" for name in result.columns}
        written.append(
            write_svg(
                (out_dir / filename).with_suffix(".svg"),
                headers[result.axis],
                [headers[c] for c in svg_columns],
                frame,
                title=result.name,
                group=headers[result.group] if result.group else None,
                log_x=log_x,
                log_y=log_y,
            )
        )
    return written


def write_manifest(out_dir: Path, manifest: RunManifest) -> Path:
    path = out_dir / f"{manifest.command}_manifest.json"
    return write_json(path, manifest)
