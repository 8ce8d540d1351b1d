#!/usr/bin/env python3
"""Contact bench - configuration loading and result display."""
import copy
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd
import yaml
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel

from exceptions import ConfigError
from models.schemas import RunMetrics, Scenario
from utils.metrics import comparison_rich_table, metrics_table

# Initialize rich console
console = Console()

CONFIG_DIR = Path(__file__).parent / "config"
SCENARIO_DIR = CONFIG_DIR / "scenarios"
MAX_EXTENDS_DEPTH = 8


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except (yaml.YAMLError, OSError) as e:
        raise ConfigError(f"Failed to load configuration {path}: {str(e)}")
    if not isinstance(data, dict) or not data:
        raise ConfigError(f"{path} is empty or not a mapping")
    return data


def load_settings(config_dir: Optional[Path] = None) -> Dict[str, Any]:
    """
    Load application settings.

    Args:
        config_dir: Path to config directory

    Returns:
        Settings dictionary

    Raises:
        ConfigError: If settings.yaml can't be loaded
    """
    config_dir = config_dir or CONFIG_DIR
    return _read_yaml(Path(config_dir) / "settings.yaml")


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge `override` into a copy of `base`; nested mappings merge, everything else replaces."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def resolve_scenario_path(name_or_path: str, scenario_dir: Optional[Path] = None) -> Path:
    path = Path(name_or_path)
    if path.exists():
        return path
    candidate = Path(scenario_dir or SCENARIO_DIR) / f"{name_or_path}.yaml"
    if candidate.exists():
        return candidate
    raise ConfigError(f"Scenario '{name_or_path}' not found")


def _expand(path: Path, scenario_dir: Optional[Path], depth: int) -> Dict[str, Any]:
    if depth > MAX_EXTENDS_DEPTH:
        raise ConfigError(f"Scenario 'extends' chain deeper than {MAX_EXTENDS_DEPTH} at {path}")
    data = _read_yaml(path)
    parent = data.pop("extends", None)
    if parent is None:
        return data
    base = _expand(resolve_scenario_path(str(parent), scenario_dir or path.parent), scenario_dir, depth + 1)
    return deep_merge(base, data)


def load_scenario(name_or_path: str, seed_override: Optional[int] = None,
                  scenario_dir: Optional[Path] = None,
                  defaults: Optional[Dict[str, Any]] = None) -> Scenario:
    """
    Load, merge and validate a scenario file.

    Args:
        name_or_path: Scenario file path or preset name
        seed_override: Replaces the scenario seed when given
        scenario_dir: Directory searched for presets and `extends` parents
        defaults: Application-wide scenario defaults merged beneath the file

    Returns:
        The validated scenario

    Raises:
        ConfigError: On unreadable files, unknown keys or invalid values
    """
    data = _expand(resolve_scenario_path(name_or_path, scenario_dir), scenario_dir, 0)
    data = deep_merge(defaults or {}, data)
    if seed_override is not None:
        data["seed"] = seed_override
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid scenario '{name_or_path}': {str(e)}")


def display_metrics(metrics: RunMetrics) -> None:
    """
    Display run metrics in a rich formatted output.

    Args:
        metrics: Metrics of one run
    """
    console.print(metrics_table(metrics))
    if metrics.success:
        console.print(Panel("Contact reached and force held", title="Result", border_style="green"))
    else:
        console.print(Panel(metrics.failure_reason or "run failed", title="Result", border_style="red"))


def display_comparison(table: pd.DataFrame, title: str) -> None:
    console.print(comparison_rich_table(table, title))


if __name__ == "__main__":
    from cli import main
    sys.exit(main())
