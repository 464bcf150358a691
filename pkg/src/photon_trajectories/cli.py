"""Command-line interface for photon-trajectories."""

import sys
from typing import Optional, Tuple

import click
from rich import print as rprint
from rich.console import Console

from .config import get_config, get_config_manager, set_config_file
from .errors import PhotonTrajectoryError, ConfigurationError, InvalidArgumentError, exit_code_for
from .export import dumps
from .oracles import TwoLevelAtomSpec, oracle_table
from .profiles import make_profile
from .runner import ExperimentKind, RunConfig, apply_overrides, load_run_config, run
from .display import ReportDisplay
from .utils import make_progress, setup_logging


console = Console()
err_console = Console(stderr=True)


def _fail(e: PhotonTrajectoryError) -> None:
    err_console.print(f"[red]✗ {type(e).__name__}: {e}[/red]")
    for line in getattr(e, "diagnostics", []):
        err_console.print(f"[red]  {line}[/red]")
    residual = getattr(e, "residual", None)
    if residual is not None:
        err_console.print(f"[dim]  residual: {residual:.3e}[/dim]")
    sys.exit(exit_code_for(e))


def run_options(func):
    """Options shared by the experiment commands."""
    func = click.option("--renormalize/--no-renormalize", default=None,
                        help="Renormalize the hierarchy after every step")(func)
    func = click.option("--threads", type=int, envvar="PHOTON_TRAJ_THREADS",
                        help="Worker threads for trajectory batches")(func)
    func = click.option("--out-dir", "-o", envvar="PHOTON_TRAJ_OUT_DIR", help="Output directory")(func)
    func = click.option("--seed", type=int, help="Base seed (overrides the config)")(func)
    func = click.argument("config_path", type=click.Path(dir_okay=False))(func)
    return func


def _execute(config_path: str, seed: Optional[int], out_dir: Optional[str], threads: Optional[int],
             renormalize: Optional[bool], force_kind: Optional[ExperimentKind] = None) -> None:
    try:
        config: RunConfig = load_run_config(config_path)
        config = apply_overrides(config, seed=seed, out_dir=out_dir, threads=threads,
                                 renormalize=renormalize, kind=force_kind)
        rprint(f"[blue]Running {config.kind.value} experiment from {config_path}...[/blue]")

        if get_config().output.show_progress and config.trajectories > 1:
            with make_progress(err_console) as progress:
                task = progress.add_task("Simulating...", total=config.trajectories)

                def update_progress(message, current, total):
                    progress.update(task, completed=current, total=total, description=message)

                result = run(config, progress_callback=update_progress)
        else:
            result = run(config)

        ReportDisplay(console).show_result(result)
        rprint(f"[green]✓ Wrote {len(result.files)} data file(s) and manifest to {result.out_dir}[/green]")
    except PhotonTrajectoryError as e:
        _fail(e)


@click.group()
@click.option("--config", "-c", help="Path to settings file")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@click.pass_context
def main(ctx, config, verbose):
    """photon-trajectories - quantum trajectories driven by a single photon."""
    ctx.ensure_object(dict)

    if config:
        ctx.obj["config_file"] = config
        set_config_file(config)

    try:
        app_config = get_config()
    except PhotonTrajectoryError as e:
        _fail(e)
    log_level = "DEBUG" if verbose else app_config.logging.level
    setup_logging(level=log_level, log_file=app_config.logging.file)


@main.command("run")
@run_options
def run_command(config_path, seed, out_dir, threads, renormalize):
    """Run the experiment described in CONFIG_PATH."""
    _execute(config_path, seed, out_dir, threads, renormalize)


@main.command()
@run_options
def convergence(config_path, seed, out_dir, threads, renormalize):
    """Discrete-to-continuum convergence report for CONFIG_PATH."""
    _execute(config_path, seed, out_dir, threads, renormalize, force_kind=ExperimentKind.CONVERGENCE)


@main.command("counting-stats")
@run_options
def counting_stats(config_path, seed, out_dir, threads, renormalize):
    """Count-number probabilities for CONFIG_PATH."""
    _execute(config_path, seed, out_dir, threads, renormalize, force_kind=ExperimentKind.COUNTING_STATS)


def _parse_params(params: Tuple[str, ...]) -> dict:
    parsed = {}
    for item in params:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise InvalidArgumentError(f"profile parameter '{item}' must look like key=value")
        try:
            parsed[key.strip()] = float(value)
        except ValueError:
            raise InvalidArgumentError(f"profile parameter '{key}' must be numeric, got '{value}'") from None
    return parsed


@main.group()
def oracle():
    """Analytic reference results."""


@oracle.command()
@click.option("--gamma", type=float, default=1.0, show_default=True, help="Decay rate of the atom")
@click.option("--profile", "profile_name", default="matched_exponential", show_default=True,
              help="Photon profile name")
@click.option("--param", "params", multiple=True, help="Profile parameter as key=value (repeatable)")
@click.option("--t-end", type=float, default=10.0, show_default=True, help="Last time of the table")
@click.option("--points", type=int, default=101, show_default=True, help="Number of time points")
@click.option("--out", "out_file", type=click.Path(dir_okay=False), help="Write JSON here instead of stdout")
def tla(gamma, profile_name, params, t_end, points, out_file):
    """Two-level atom excitation and counting probabilities as JSON."""
    try:
        parsed = _parse_params(params)
        if profile_name == "matched_exponential" and "gamma_p" not in parsed:
            parsed["gamma_p"] = gamma
        if points < 1 or t_end < 0:
            raise InvalidArgumentError("need points >= 1 and t_end >= 0")
        spec = TwoLevelAtomSpec(gamma, make_profile(profile_name, **parsed))
        step = t_end / (points - 1) if points > 1 else 0.0
        rows = oracle_table(spec, [i * step for i in range(points)])
        payload = dumps({"gamma": gamma, "profile": profile_name, "params": parsed, "rows": rows})
        if out_file:
            with open(out_file, "w", encoding="utf-8") as f:
                f.write(payload + "\n")
            rprint(f"[green]✓ Wrote {len(rows)} rows to {out_file}[/green]")
        else:
            click.echo(payload)
    except PhotonTrajectoryError as e:
        _fail(e)


@main.command()
def info():
    """Show application information and configuration."""
    try:
        ReportDisplay(console).show_settings(get_config(), get_config_manager().config_file)
    except ConfigurationError as e:
        _fail(e)


@main.command()
def profiles():
    """List built-in photon profiles."""
    ReportDisplay(console).show_profiles()


if __name__ == "__main__":
    main()
