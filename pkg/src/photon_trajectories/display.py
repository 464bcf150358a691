"""Rich console output for experiment reports."""

import inspect
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .config import Settings
from .profiles import BUILTIN_PROFILES
from .runner import RunResult


class ReportDisplay:
    """Renders settings, profile listings and experiment reports."""

    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console()

    def show_settings(self, settings: Settings, config_file: str) -> None:
        table = Table(title="photon-trajectories - Configuration")
        table.add_column("Setting", style="cyan")
        table.add_column("Value", style="green")
        table.add_row("Settings File", config_file)
        for section_name, section in settings.model_dump().items():
            for key, value in section.items():
                table.add_row(f"{section_name}.{key}", str(value))
        self.console.print(table)

    def show_profiles(self) -> None:
        table = Table(title="Built-in photon profiles")
        table.add_column("Name", style="cyan")
        table.add_column("Parameters", style="magenta")
        table.add_column("Description", style="green")
        for name, factory in BUILTIN_PROFILES.items():
            params = [p for p in inspect.signature(factory).parameters if p != "threshold"]
            doc = (inspect.getdoc(factory) or "").splitlines()
            table.add_row(name, ", ".join(params) or "-", doc[0] if doc else "")
        self.console.print(table)

    def show_count_table(self, rows: List[Dict[str, Any]]) -> None:
        table = Table(title="Count-number probabilities")
        columns = [c for c in rows[0] if c != "t"] if rows else []
        table.add_column("t", style="cyan", justify="right")
        for col in columns:
            table.add_column(col, style="green", justify="right")
        for row in rows:
            table.add_row(f"{row['t']:.4g}", *(f"{row[c]:.6e}" for c in columns))
        self.console.print(table)

    def show_convergence(self, report: Dict[str, Any]) -> None:
        table = Table(title=f"Discrete → continuum convergence (t = {report['t_end']:g})")
        table.add_column("tau", style="cyan", justify="right")
        table.add_column("steps", style="magenta", justify="right")
        table.add_column("error", style="green", justify="right")
        for row in report["rows"]:
            table.add_row(f"{row['tau']:.4g}", str(row["steps"]), f"{row['error']:.4e}")
        self.console.print(table)
        self.console.print(f"[bold]Fitted order:[/bold] {report['fitted_order']:.3f}")

    def show_oracle(self, rows: List[Dict[str, Any]], limit: int = 25) -> None:
        table = Table(title="Two-level atom oracle")
        for col, style in (("t", "cyan"), ("excitation", "green"), ("no_count", "green"), ("one_count", "green")):
            table.add_column(col, style=style, justify="right")
        stride = max(1, len(rows) // limit)
        for row in rows[::stride]:
            table.add_row(f"{row['t']:.4g}", f"{row['excitation']:.8f}",
                          f"{row['no_count']:.8f}", f"{row['one_count']:.8f}")
        self.console.print(table)

    def show_result(self, result: RunResult) -> None:
        """Summary panel for a finished run plus the kind-specific table."""
        report = result.report
        lines = [
            f"[bold]Experiment:[/bold] {result.kind.value}",
            f"[bold]Output:[/bold] {result.out_dir}",
            f"[bold]Files:[/bold] {len(result.files)} + manifest",
            f"[bold]Wall time:[/bold] {result.wall_time:.2f}s",
        ]
        for key in ("trajectories", "n_trajectories", "steps", "max_trace_drift",
                    "max_normalization_residual", "fitted_order", "min_eigenvalue"):
            if key in report:
                lines.append(f"[bold]{key}:[/bold] {report[key]}")
        if "count_histogram" in report:
            lines.append(f"[bold]Count histogram:[/bold] {report['count_histogram']}")
        if "population_max" in report:
            peaks = ", ".join(f"{p:.6f}" for p in report["population_max"])
            lines.append(f"[bold]Peak populations:[/bold] {peaks}")
        self.console.print(Panel("\n".join(lines), title="Run summary", border_style="blue"))

        if result.kind.value == "counting-stats":
            self.show_count_table(report["rows"])
        elif result.kind.value == "convergence":
            self.show_convergence(report)
        elif result.kind.value == "oracle":
            self.show_oracle(report["rows"])
