"""rbcc inspect: resolved scenario, derived laser quantities and sanity checks."""

from __future__ import annotations

import math
import platform

from rich import box
from rich.panel import Panel
from rich.table import Table

from rbcc.cli.console import console, create_summary_table, format_si
from rbcc.errors import BelowThresholdError
from rbcc.laser import (
    is_underdamped,
    pump_ratio,
    relaxation_frequency,
    slowest_time_constant,
    small_signal_poles,
    threshold_density,
    threshold_pump_power,
)
from rbcc.params import ConfigBundle, config_items, defaulted_keys
from rbcc.version import __version__


def _check_threshold(bundle: ConfigBundle) -> tuple[bool, str]:
    """Bias above the lasing threshold."""
    p_th = threshold_pump_power(bundle.laser)
    bias = bundle.drive.bias_power
    return bias > p_th, f"bias {format_si(bias, 'W')} vs threshold {format_si(p_th, 'W')}"


def _check_ringing(bundle: ConfigBundle) -> tuple[bool | None, str]:
    """Relaxation oscillations at the bias; None when informational only."""
    r = pump_ratio(bundle.drive.bias_power, bundle.laser)
    if r <= 1.0:
        return None, "below threshold"
    if is_underdamped(r, bundle.laser):
        f = relaxation_frequency(r, bundle.laser) / (2.0 * math.pi)
        return True, f"underdamped, rings near {format_si(f, 'Hz')}"
    return None, "overdamped: cold start rises without ringing"


def _check_sampling(bundle: ConfigBundle) -> tuple[bool, str]:
    """sample_dt resolves the fastest small-signal time scale."""
    r = pump_ratio(bundle.drive.bias_power, bundle.laser)
    if r <= 1.0:
        return True, "no lasing dynamics to resolve"
    fastest = max(abs(p) for p in small_signal_poles(r, bundle.laser))
    per_cycle = 2.0 * math.pi / (fastest * bundle.sim.sample_dt)
    return per_cycle >= 8.0, f"{per_cycle:.3g} samples per fastest time scale"


def _check_horizon(bundle: ConfigBundle) -> tuple[bool, str]:
    """t_end covers several slow time constants."""
    r = pump_ratio(bundle.drive.bias_power, bundle.laser)
    if r == 1.0:
        return False, "bias exactly at threshold"
    tau = slowest_time_constant(r, bundle.laser)
    ratio = bundle.sim.t_end / tau
    return ratio >= 10.0, f"t_end = {ratio:.3g} slow time constants"


def run_inspect(bundle: ConfigBundle, config_path: str | None = None, show_config: bool = False) -> int:
    """Print derived quantities and checks for a scenario.

    Returns 0 if all critical checks pass, 1 otherwise.
    """
    laser = bundle.laser
    console.print()
    console.print(f"  [bold cyan]rbcc inspect[/bold cyan] v{__version__}")
    console.print(f"  [dim]{config_path or 'built-in defaults'} · Python {platform.python_version()}[/dim]")
    console.print()

    derived = create_summary_table()
    r = pump_ratio(bundle.drive.bias_power, laser)
    derived.add_row("Threshold density", f"{threshold_density(laser):.4g} m^-3")
    derived.add_row("Threshold pump", format_si(threshold_pump_power(laser), "W"))
    derived.add_row("Pump ratio at bias", f"{r:.4g}")
    try:
        derived.add_row("Relaxation freq", format_si(relaxation_frequency(r, laser) / (2.0 * math.pi), "Hz"))
        poles = small_signal_poles(r, laser)
        derived.add_row("Small-signal poles", ", ".join(f"{p:.4g}" for p in poles))
    except BelowThresholdError:
        derived.add_row("Relaxation freq", "n/a (below threshold)")
    console.print(Panel(derived, title="[bold]Derived[/bold]", border_style="bright_black"))

    checks: list[tuple[str, bool | None, str]] = []
    ok, detail = _check_threshold(bundle)
    checks.append(("Above threshold", ok, detail))
    ok_or_none, detail = _check_ringing(bundle)
    checks.append(("Ringing", ok_or_none, detail))
    ok, detail = _check_sampling(bundle)
    checks.append(("Sampling", ok, detail))
    ok, detail = _check_horizon(bundle)
    checks.append(("Horizon", ok, detail))

    table = Table(box=box.SIMPLE, padding=(0, 2), show_header=True)
    table.add_column("Check", style="white", min_width=16)
    table.add_column("Status", min_width=6)
    table.add_column("Details", style="dim")

    failures = 0
    for name, passed, detail in checks:
        if passed is True:
            icon = "[green]✓ pass[/green]"
        elif passed is None:
            icon = "[dim]· info[/dim]"
        else:
            icon = "[red]✗ FAIL[/red]"
            failures += 1
        table.add_row(name, icon, detail)
    console.print(Panel(table, title="[bold]Checks[/bold]", border_style="bright_black"))

    defaults = defaulted_keys(bundle)
    if defaults:
        console.print(f"  [yellow]→[/yellow] defaults applied: [cyan]{', '.join(defaults)}[/cyan]")

    if show_config:
        cfg = create_summary_table()
        for key, value in config_items(bundle):
            cfg.add_row(key, value)
        console.print(Panel(cfg, title="[bold]Configuration (SI)[/bold]", border_style="bright_black"))

    console.print()
    if failures:
        console.print(f"  [red]✗[/red] {failures} check(s) failed")
    else:
        console.print("  [green]✓[/green] scenario looks runnable")
    console.print()
    return 1 if failures else 0
