"""Run metrics: contact-interval error statistics, force holding and insertion accuracy."""
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from rich.table import Table

from logging_utils import get_logger
from models.schemas import ContactStats, Phase, RunMetrics, Scenario
from utils.file_utils import RunLogs

logger = get_logger()

VELOCITY_AXES = ("x", "y", "z")


def error_stats(errors: np.ndarray) -> ContactStats:
    """RMSE of e; mean, max and population std of |e|. Empty input is not applicable."""
    errors = np.asarray(errors, dtype=float)
    errors = errors[np.isfinite(errors)]
    if errors.size == 0:
        return ContactStats()
    magnitude = np.abs(errors)
    return ContactStats(
        rmse=float(np.sqrt(np.mean(errors ** 2))),
        mean=float(np.mean(magnitude)),
        max=float(np.max(magnitude)),
        std=float(np.std(magnitude)),
        samples=int(errors.size),
    )


def align_nearest(reference: pd.DataFrame, other: pd.DataFrame, tolerance: float,
                  suffix: str = "_est") -> pd.DataFrame:
    """Pair each reference row with the nearest `other` row within `tolerance` seconds."""
    left = reference.sort_values("t")
    right = other.sort_values("t").rename(columns={c: f"{c}{suffix}" for c in other.columns if c != "t"})
    return pd.merge_asof(left, right, on="t", direction="nearest", tolerance=tolerance)


def hold_interval(control: Optional[pd.DataFrame]) -> Optional[Tuple[float, float]]:
    """From the first ForceHold tick to the end of the control log."""
    if control is None or control.empty:
        return None
    holding = control[control["phase"] == Phase.FORCE_HOLD.value]
    if holding.empty:
        return None
    return float(holding["t"].iloc[0]), float(control["t"].iloc[-1])


def velocity_estimate(logs: RunLogs) -> Optional[pd.DataFrame]:
    """Estimator velocities when available, otherwise the controller's feedback velocity."""
    if logs.estimator is not None and not logs.estimator.empty:
        return logs.estimator[["t", "vx", "vy", "vz"]]
    if logs.control is not None and "fb_vx" in logs.control.columns:
        return logs.control[["t", "fb_vx", "fb_vy", "fb_vz"]].rename(
            columns={"fb_vx": "vx", "fb_vy": "vy", "fb_vz": "vz"})
    return None


def compute_metrics(logs: RunLogs, scenario: Scenario, failure_reason: Optional[str] = None) -> RunMetrics:
    """
    Reduce the logs of one run to RunMetrics and evaluate the success predicate.

    Velocity statistics are taken along the wall normal over ForceHold ticks.
    Force statistics use the measured normal force from the first ForceHold
    tick to the end of the run.
    """
    metrics = RunMetrics(scenario=scenario.name, seed=scenario.seed, failure_reason=failure_reason)
    normal = scenario.wall.normal_vector
    period = 1.0 / scenario.timing.control_rate
    control = logs.control
    interval = hold_interval(control)

    estimate = velocity_estimate(logs)
    if logs.truth is not None and estimate is not None:
        paired = align_nearest(logs.truth[["t", "vx", "vy", "vz"]], estimate, 0.5 * period).dropna()
        errors = np.column_stack([paired[f"v{a}_est"] - paired[f"v{a}"] for a in VELOCITY_AXES])
        metrics.velocity_error_x = errors[:, 0].tolist()
        metrics.velocity_error_y = errors[:, 1].tolist()
        metrics.velocity_error_z = errors[:, 2].tolist()
        if interval is not None and control is not None:
            holding_t = control.loc[control["phase"] == Phase.FORCE_HOLD.value, "t"].to_numpy()
            mask = np.isin(np.round(paired["t"].to_numpy(), 6), np.round(holding_t, 6))
            metrics.contact_velocity_error = error_stats(errors[mask] @ normal)

    if control is not None and not control.empty:
        visible = control.dropna(subset=["e_u", "e_v", "e_r", "depth"])
        fx, fy = scenario.camera.fx, scenario.camera.fy
        metrics.alignment_error = (np.hypot(visible["e_u"] / fx, visible["e_v"] / fy)
                                   * visible["depth"]).tolist()
        metrics.scaling_error = visible["e_r"].tolist()

    if logs.phases is not None:
        metrics.phase_timeline = [(float(t), Phase(p)) for t, p in zip(logs.phases["t"], logs.phases["phase"])]

    reference = scenario.impedance.reference_force
    criteria = scenario.success
    if interval is not None and logs.ft is not None:
        start, end = interval
        metrics.contact_achieved = True
        metrics.first_contact_time = start
        held = logs.ft[logs.ft["t"] >= start]
        force_error = held["F_normal"].to_numpy() - reference
        metrics.force_error = error_stats(force_error)
        if force_error.size:
            metrics.force_hold_fraction = float(np.mean(np.abs(force_error) <= criteria.force_tolerance))
        final = held[held["t"] >= end - criteria.final_window]
        if not final.empty and end - start >= criteria.final_window:
            metrics.final_force_mean = float(final["F_normal"].mean())

    if logs.truth is not None and "wall_contact" in logs.truth.columns:
        touching = logs.truth[logs.truth["wall_contact"] > 0]
        if not touching.empty:
            row = touching.iloc[0]
            offset = np.array([row["ee_x"], row["ee_y"], row["ee_z"]]) - np.asarray(scenario.wall.hole_center)
            metrics.insertion_offset = float(np.linalg.norm(offset - (offset @ normal) * normal))
        if interval is not None:
            in_hold = logs.truth[logs.truth["t"] >= interval[0]]
            if not in_hold.empty:
                metrics.max_tilt_in_contact_deg = float(
                    np.max(np.maximum(np.abs(in_hold["roll_deg"]), np.abs(in_hold["pitch_deg"]))))

    metrics.success = bool(
        failure_reason is None
        and metrics.contact_achieved
        and metrics.insertion_offset is not None
        and metrics.insertion_offset <= scenario.wall.hole_inner_radius
        and metrics.force_hold_fraction is not None
        and metrics.force_hold_fraction >= criteria.min_hold_fraction
        and metrics.final_force_mean is not None
        and abs(metrics.final_force_mean - reference) <= criteria.final_mean_tolerance
    )
    if not metrics.success and metrics.failure_reason is None:
        metrics.failure_reason = _task_failure_reason(metrics, scenario)
    return metrics


def _task_failure_reason(metrics: RunMetrics, scenario: Scenario) -> str:
    if not metrics.contact_achieved:
        return "contact never reached"
    if metrics.insertion_offset is None or metrics.insertion_offset > scenario.wall.hole_inner_radius:
        return "insertion missed the hole"
    if metrics.force_hold_fraction is None or metrics.force_hold_fraction < scenario.success.min_hold_fraction:
        return "force not held within tolerance"
    return "final force mean off reference"


def relative_improvement(baseline: ContactStats, variant: ContactStats) -> Optional[float]:
    """Percent RMSE reduction of `variant` against `baseline`; None when not applicable."""
    if baseline.rmse is None or variant.rmse is None or baseline.rmse == 0.0:
        return None
    return 100.0 * (baseline.rmse - variant.rmse) / baseline.rmse


def comparison_table(rows, improvement_applicable: bool = True) -> pd.DataFrame:
    """
    Contact-direction velocity error table for paired runs.

    Args:
        rows: (label, RunMetrics) pairs; the first is the baseline
        improvement_applicable: False when the runs do not compare the same estimator

    Returns:
        One row per run with RMSE, mean, max, std and the improvement over the baseline
    """
    baseline = rows[0][1].contact_velocity_error
    records = []
    for label, run in rows:
        stats = run.contact_velocity_error
        records.append({
            "run": label,
            "rmse": stats.rmse,
            "mean": stats.mean,
            "max": stats.max,
            "std": stats.std,
            "samples": stats.samples,
            "improvement_pct": relative_improvement(baseline, stats) if improvement_applicable else None,
        })
    return pd.DataFrame(records, columns=["run", "rmse", "mean", "max", "std", "samples", "improvement_pct"])


def _fmt(value, digits: int = 4) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "n/a"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def metrics_table(metrics: RunMetrics) -> Table:
    table = Table(title=f"Run metrics: {metrics.scenario} (seed {metrics.seed})")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    for key, value in metrics.summary_row().items():
        if key in ("scenario", "seed"):
            continue
        table.add_row(key, _fmt(value))
    return table


def comparison_rich_table(frame: pd.DataFrame, title: str) -> Table:
    table = Table(title=title)
    table.add_column("Run", style="cyan")
    for column in ("RMSE", "mean", "max", "std"):
        table.add_column(f"{column} (m/s)", justify="right")
    table.add_column("Improvement", justify="right", style="green")
    for record in frame.to_dict("records"):
        improvement = record["improvement_pct"]
        table.add_row(
            str(record["run"]),
            _fmt(record["rmse"]), _fmt(record["mean"]), _fmt(record["max"]), _fmt(record["std"]),
            "n/a" if improvement is None or pd.isna(improvement) else f"{improvement:.2f}%",
        )
    return table
