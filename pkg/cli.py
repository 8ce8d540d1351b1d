#!/usr/bin/env python3
"""Command-line interface for the contact bench."""
import argparse
import sys
from pathlib import Path
from typing import Optional

from pydantic import ValidationError
from rich.console import Console
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn

from exceptions import BenchError, ConfigError, SimulationDivergenceError
from logging_utils import setup_logging
from main import display_comparison, display_metrics, load_scenario, load_settings
from models.schemas import Scenario
from orchestration.ablation import AblationToggle, run_ablation
from orchestration.orchestrator import run_scenario
from utils.file_utils import load_run_logs, resolve_log_dir
from utils.metrics import compute_metrics
from utils.plots import emit_plots

# Initialize console
console = Console()

EXIT_SUCCESS = 0
EXIT_TASK_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_DIVERGENCE = 3


def _out_dir(args, scenario: Scenario, settings) -> Path:
    if args.out_dir:
        return Path(args.out_dir)
    return Path(settings.get("output", {}).get("root", "runs")) / scenario.name


def _setup_logging(args, settings, out_dir: Optional[Path]):
    log_settings = settings.get("logging", {})
    log_file = str(out_dir / "logs" / "bench.log") if out_dir is not None else None
    return setup_logging(
        log_level=args.log_level or log_settings.get("level", "INFO"),
        log_file=log_file,
        console_output=not args.quiet,
    )


def run_command(args) -> int:
    """
    Run one scenario end to end.

    Args:
        args: Command-line arguments
    """
    settings = load_settings()
    scenario = load_scenario(args.scenario, args.seed_override, defaults=settings.get("scenario_defaults"))
    out_dir = _out_dir(args, scenario, settings)
    _setup_logging(args, settings, out_dir)

    if args.quiet:
        result = run_scenario(scenario, out_dir)
    else:
        with Progress(
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TimeElapsedColumn(),
            console=console
        ) as progress:
            task = progress.add_task(f"Running {scenario.name}...", total=1.0)
            result = run_scenario(scenario, out_dir, lambda fraction: progress.update(task, completed=fraction))
            progress.update(task, completed=1.0)

    if not args.quiet:
        display_metrics(result.metrics)
        console.print(f"Logs written to [bold]{out_dir}[/]")
    return result.exit_code


def ablate_command(args) -> int:
    """Run paired scenarios that differ in one estimator or feedback toggle."""
    settings = load_settings()
    scenario = load_scenario(args.scenario, args.seed_override, defaults=settings.get("scenario_defaults"))
    out_dir = _out_dir(args, scenario, settings) / f"ablation_{args.toggle}"
    _setup_logging(args, settings, out_dir)
    result = run_ablation(scenario, AblationToggle(args.toggle), out_dir, max_workers=args.workers)
    if not args.quiet:
        display_comparison(result.table, f"Contact-direction velocity error: {scenario.name}")
        for label, metrics in result.runs:
            console.print(f"[cyan]{label}[/]")
            display_metrics(metrics)
    return result.exit_code


def _scenario_for_logs(args, settings, log_dir: Path) -> Scenario:
    paths = resolve_log_dir(log_dir)
    if args.scenario:
        return load_scenario(args.scenario, args.seed_override, defaults=settings.get("scenario_defaults"))
    if not paths.scenario_json.exists():
        raise ConfigError(f"No scenario snapshot in {paths.root}; pass --scenario")
    try:
        return Scenario.model_validate_json(paths.scenario_json.read_text())
    except ValidationError as e:
        raise ConfigError(f"Invalid scenario snapshot in {paths.root}: {str(e)}")


def metrics_command(args) -> int:
    """Recompute run metrics from logged CSVs without re-running."""
    settings = load_settings()
    log_dir = Path(args.log_dir)
    _setup_logging(args, settings, None)
    scenario = _scenario_for_logs(args, settings, log_dir)
    metrics = compute_metrics(load_run_logs(log_dir), scenario)
    if not args.quiet:
        display_metrics(metrics)
    return EXIT_SUCCESS if metrics.success else EXIT_TASK_FAILURE


def plots_command(args) -> int:
    """Emit the plot-ready CSV panels of a finished run."""
    settings = load_settings()
    log_dir = Path(args.log_dir)
    _setup_logging(args, settings, None)
    scenario = _scenario_for_logs(args, settings, log_dir)
    written = emit_plots(log_dir, scenario.impedance.reference_force, scenario.camera.fx, scenario.camera.fy)
    if not args.quiet:
        for name, path in written.items():
            console.print(f"[green]{name}[/]: {path}")
    return EXIT_SUCCESS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Contact bench - deterministic aerial contact-inspection testbench",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter
    )
    parser.add_argument("--seed-override", type=int, default=None, help="Replace the scenario seed")
    parser.add_argument("--out-dir", type=str, default=None, help="Output directory (default runs/<scenario>)")
    parser.add_argument("--quiet", action="store_true", help="Suppress console logs and progress")
    parser.add_argument(
        "--log-level",
        type=str,
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Logging level (default from settings.yaml)"
    )
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    run_parser = subparsers.add_parser("run", help="Run a scenario")
    run_parser.add_argument("scenario", type=str, help="Scenario file or preset name")
    run_parser.set_defaults(func=run_command)

    ablate_parser = subparsers.add_parser("ablate", help="Run a paired ablation")
    ablate_parser.add_argument("scenario", type=str, help="Scenario file or preset name")
    ablate_parser.add_argument(
        "--toggle",
        type=str,
        choices=[t.value for t in AblationToggle],
        default=AblationToggle.CONTACT_FACTOR.value,
        help="Option that differs between the paired runs"
    )
    ablate_parser.add_argument("--workers", type=int, default=2, help="Worker processes")
    ablate_parser.set_defaults(func=ablate_command)

    metrics_parser = subparsers.add_parser("metrics", help="Recompute metrics from a run's logs")
    metrics_parser.add_argument("log_dir", type=str, help="Run directory or its logs/ directory")
    metrics_parser.add_argument("--scenario", type=str, default=None, help="Scenario used for the run")
    metrics_parser.set_defaults(func=metrics_command)

    plots_parser = subparsers.add_parser("plots", help="Emit plot-ready CSV panels from a run's logs")
    plots_parser.add_argument("log_dir", type=str, help="Run directory or its logs/ directory")
    plots_parser.add_argument("--scenario", type=str, default=None, help="Scenario used for the run")
    plots_parser.set_defaults(func=plots_command)
    return parser


def main(argv=None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not hasattr(args, "func"):
        parser.print_help()
        return EXIT_SUCCESS

    try:
        return args.func(args)
    except ConfigError as e:
        console.print(f"[bold red]Configuration error:[/] {str(e)}")
        return EXIT_CONFIG_ERROR
    except SimulationDivergenceError as e:
        console.print(f"[bold red]Simulation diverged:[/] {str(e)}")
        return EXIT_DIVERGENCE
    except BenchError as e:
        console.print(f"[bold red]Error:[/] {str(e)}")
        return EXIT_TASK_FAILURE


if __name__ == "__main__":
    sys.exit(main())
