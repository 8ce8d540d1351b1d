"""File utilities for run logs: directory layout, CSV streams and metrics tables."""
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence

import pandas as pd

from logging_utils import get_logger
from models.schemas import RunMetrics

logger = get_logger()

LOG_STREAMS = ("truth", "control", "estimator", "ft", "solver", "phases")
FLOAT_FORMAT = "%.9g"
TIME_DECIMALS = 6


@dataclass(frozen=True)
class RunPaths:
    root: Path
    logs: Path
    plots: Path

    @property
    def metrics_csv(self) -> Path:
        return self.root / "metrics.csv"

    @property
    def metrics_json(self) -> Path:
        return self.root / "metrics.json"

    @property
    def scenario_json(self) -> Path:
        return self.root / "scenario.json"

    @property
    def log_file(self) -> Path:
        return self.logs / "bench.log"

    def stream(self, name: str) -> Path:
        return self.logs / f"{name}.csv"


def ensure_run_dirs(out_dir: os.PathLike) -> RunPaths:
    """Create `<out_dir>/logs` and `<out_dir>/plots` if missing."""
    root = Path(out_dir)
    paths = RunPaths(root=root, logs=root / "logs", plots=root / "plots")
    for directory in (paths.root, paths.logs, paths.plots):
        directory.mkdir(parents=True, exist_ok=True)
        logger.debug(f"Ensured directory: {directory}")
    return paths


def resolve_log_dir(path: os.PathLike) -> RunPaths:
    """Accept either a run root or its logs/ directory."""
    path = Path(path)
    root = path.parent if path.name == "logs" else path
    return RunPaths(root=root, logs=root / "logs", plots=root / "plots")


def write_table(rows: Sequence[Dict[str, object]], path: os.PathLike,
                columns: Optional[Iterable[str]] = None) -> pd.DataFrame:
    """
    Write rows as CSV with timestamps rounded to microseconds.

    Args:
        rows: One dict per record
        path: Output file
        columns: Column order; defaults to the keys of the first row

    Returns:
        The written frame
    """
    frame = pd.DataFrame(list(rows), columns=list(columns) if columns is not None else None)
    if "t" in frame.columns:
        frame["t"] = frame["t"].astype(float).round(TIME_DECIMALS)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return frame


def read_table(path: os.PathLike) -> Optional[pd.DataFrame]:
    path = Path(path)
    if not path.exists():
        logger.warning(f"Log stream {path} does not exist")
        return None
    try:
        return pd.read_csv(path)
    except (pd.errors.EmptyDataError, OSError) as e:
        logger.error(f"Failed to read {path}: {str(e)}")
        return None


@dataclass
class RunLogs:
    """The CSV streams of one run; a stream that was not written is None."""
    truth: Optional[pd.DataFrame] = None
    control: Optional[pd.DataFrame] = None
    estimator: Optional[pd.DataFrame] = None
    ft: Optional[pd.DataFrame] = None
    solver: Optional[pd.DataFrame] = None
    phases: Optional[pd.DataFrame] = None


def load_run_logs(log_dir: os.PathLike) -> RunLogs:
    paths = resolve_log_dir(log_dir)
    frames = {name: read_table(paths.stream(name)) for name in LOG_STREAMS}
    loaded = [name for name, frame in frames.items() if frame is not None]
    logger.info(f"Loaded {len(loaded)} log streams from {paths.logs}: {', '.join(loaded)}")
    return RunLogs(**frames)


def write_metrics(metrics: RunMetrics, paths: RunPaths) -> pd.DataFrame:
    """Write the scalar summary as CSV (4 decimals) and the full metrics as JSON."""
    frame = pd.DataFrame([metrics.summary_row()])
    frame.to_csv(paths.metrics_csv, index=False, float_format="%.4f")
    paths.metrics_json.write_text(metrics.model_dump_json(indent=2))
    logger.info(f"Metrics written to {paths.metrics_csv}")
    return frame


def write_comparison(table: pd.DataFrame, path: os.PathLike) -> None:
    table.to_csv(path, index=False, float_format="%.4f")
    logger.info(f"Comparison table written to {path}")
