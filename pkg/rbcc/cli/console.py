"""Console utilities and theming for the rbcc CLI."""

from rich import box
from rich.console import Console
from rich.markup import escape
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table
from rich.theme import Theme

# Custom theme for consistent styling
THEME = Theme(
    {
        "info": "cyan",
        "success": "green",
        "warning": "yellow",
        "error": "red",
        "dim": "dim",
        "highlight": "bold cyan",
        "muted": "bright_black",
        "accent": "magenta",
    }
)

# Global console instance, on stderr so piped stdout stays clean
console = Console(theme=THEME, stderr=True)


class Icons:
    """Consistent icons across the CLI."""

    SUCCESS = "✓"
    ERROR = "✗"
    BEAM = "◎"


def print_success(message: str):
    console.print(f"[success]{Icons.SUCCESS}[/success] {message}")


def print_error(message: str, detail: str | None = None):
    """Print an error message."""
    console.print(f"[error]{Icons.ERROR}[/error] {message}")
    if detail:
        console.print(f"  [dim]{escape(detail)}[/dim]")


def format_duration(seconds: float) -> str:
    """Format duration in a human-readable way."""
    if seconds < 1:
        return f"{int(seconds * 1000)}ms"
    elif seconds < 60:
        return f"{seconds:.1f}s"
    else:
        mins = int(seconds // 60)
        secs = int(seconds % 60)
        return f"{mins}m {secs}s"


def format_si(value: float, unit: str) -> str:
    """3 significant digits with an SI prefix, e.g. 1.23 MHz."""
    if value == 0 or value != value or abs(value) == float("inf"):
        return f"{value:g} {unit}"
    prefixes = [(1e9, "G"), (1e6, "M"), (1e3, "k"), (1.0, ""), (1e-3, "m"), (1e-6, "µ"), (1e-9, "n")]
    for scale, prefix in prefixes:
        if abs(value) >= scale:
            return f"{value / scale:.3g} {prefix}{unit}"
    return f"{value:.3g} {unit}"


def create_progress() -> Progress:
    """Progress bar for sweep points and BER batches."""
    return Progress(
        TextColumn("[info]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    )


def create_summary_table(title: str | None = None) -> Table:
    """Two-column key/value table used by inspect and run summaries."""
    table = Table(box=box.SIMPLE, padding=(0, 2), show_header=False, title=title)
    table.add_column("Key", style="cyan", min_width=20)
    table.add_column("Value", style="white")
    return table
