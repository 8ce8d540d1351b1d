"""Plot-ready CSV panels built from run logs. Nothing is rendered here."""
import os
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from logging_utils import get_logger
from utils.file_utils import RunLogs, load_run_logs, resolve_log_dir, write_table

logger = get_logger()

FORCE_FILTER_CUTOFF_HZ = 5.0

# Panel name -> column schema, in file order
PANEL_COLUMNS: Dict[str, List[str]] = {
    "force": ["t", "F_measured", "F_filtered", "F_reference"],
    "velocity": ["t", "truth_x", "truth_y", "truth_z", "estimate_x", "estimate_y", "estimate_z",
                 "baseline_x", "baseline_y", "baseline_z"],
    "alignment": ["t", "alignment_error_m"],
    "scaling": ["t", "scaling_error_px"],
    "attitude": ["t", "roll_deg", "pitch_deg", "yaw_deg"],
    "phases": ["t", "phase"],
}


def low_pass(times: np.ndarray, values: np.ndarray, cutoff_hz: float) -> np.ndarray:
    """First-order low-pass filter over an irregularly sampled series."""
    tau = 1.0 / (2.0 * np.pi * cutoff_hz)
    out = np.empty_like(values, dtype=float)
    if values.size == 0:
        return out
    out[0] = values[0]
    for k in range(1, values.size):
        dt = times[k] - times[k - 1]
        out[k] = out[k - 1] + dt / (tau + dt) * (values[k] - out[k - 1])
    return out


def force_panel(logs: RunLogs, reference_force: float, fx: float, fy: float) -> Optional[pd.DataFrame]:
    if logs.ft is None:
        return None
    t = logs.ft["t"].to_numpy(dtype=float)
    force = logs.ft["F_normal"].to_numpy(dtype=float)
    return pd.DataFrame({
        "t": t,
        "F_measured": force,
        "F_filtered": low_pass(t, force, FORCE_FILTER_CUTOFF_HZ),
        "F_reference": np.full(t.size, reference_force),
    })


def velocity_panel(logs: RunLogs, reference_force: float, fx: float, fy: float) -> Optional[pd.DataFrame]:
    if logs.truth is None:
        return None
    frame = pd.DataFrame({"t": logs.truth["t"]})
    for axis in ("x", "y", "z"):
        frame[f"truth_{axis}"] = logs.truth[f"v{axis}"].to_numpy()
    if logs.estimator is not None and not logs.estimator.empty:
        est = logs.estimator.set_index("t")
        for axis in ("x", "y", "z"):
            frame[f"estimate_{axis}"] = frame["t"].map(est[f"v{axis}"])
    else:
        for axis in ("x", "y", "z"):
            frame[f"estimate_{axis}"] = np.nan
    if logs.control is not None:
        fb = logs.control.set_index("t")
        for axis in ("x", "y", "z"):
            frame[f"baseline_{axis}"] = frame["t"].map(fb[f"fb_v{axis}"])
    else:
        for axis in ("x", "y", "z"):
            frame[f"baseline_{axis}"] = np.nan
    return frame


def alignment_panel(logs: RunLogs, reference_force: float, fx: float, fy: float) -> Optional[pd.DataFrame]:
    if logs.control is None:
        return None
    visible = logs.control.dropna(subset=["e_u", "e_v", "depth"])
    return pd.DataFrame({
        "t": visible["t"],
        "alignment_error_m": np.hypot(visible["e_u"] / fx, visible["e_v"] / fy) * visible["depth"],
    })


def scaling_panel(logs: RunLogs, reference_force: float, fx: float, fy: float) -> Optional[pd.DataFrame]:
    if logs.control is None:
        return None
    visible = logs.control.dropna(subset=["e_r"])
    return pd.DataFrame({"t": visible["t"], "scaling_error_px": visible["e_r"]})


def attitude_panel(logs: RunLogs, reference_force: float, fx: float, fy: float) -> Optional[pd.DataFrame]:
    if logs.truth is None:
        return None
    return logs.truth[["t", "roll_deg", "pitch_deg", "yaw_deg"]].copy()


def phase_panel(logs: RunLogs, reference_force: float, fx: float, fy: float) -> Optional[pd.DataFrame]:
    if logs.phases is None:
        return None
    return logs.phases[["t", "phase"]].copy()


PANELS: Dict[str, Callable[..., Optional[pd.DataFrame]]] = {
    "force": force_panel,
    "velocity": velocity_panel,
    "alignment": alignment_panel,
    "scaling": scaling_panel,
    "attitude": attitude_panel,
    "phases": phase_panel,
}


def emit_plots(log_dir: os.PathLike, reference_force: float = 5.0, fx: float = 300.0,
               fy: float = 300.0) -> Dict[str, str]:
    """
    Write one tidy CSV per figure panel under `<run>/plots`.

    Args:
        log_dir: Run root or its logs/ directory
        reference_force: Force reference drawn in the force panel [N]
        fx: Horizontal focal length used to convert pixel errors [px]
        fy: Vertical focal length [px]

    Returns:
        Mapping of written panel names to file paths; missing streams are skipped
    """
    paths = resolve_log_dir(log_dir)
    paths.plots.mkdir(parents=True, exist_ok=True)
    logs = load_run_logs(paths.logs)
    written: Dict[str, str] = {}
    for name, builder in PANELS.items():
        frame = builder(logs, reference_force, fx, fy)
        if frame is None:
            logger.warning(f"Skipping {name} panel: required log stream missing")
            continue
        path = paths.plots / f"{name}.csv"
        write_table(frame.to_dict("records"), path, PANEL_COLUMNS[name])
        written[name] = str(path)
    logger.info(f"Wrote {len(written)} plot panels to {paths.plots}")
    return written
