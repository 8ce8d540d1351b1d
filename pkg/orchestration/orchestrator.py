"""Closed-loop scenario runner: simulator -> estimator -> servo -> hybrid controller -> allocation."""
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from control.hybrid import ControlInputs, ControlOutput, HybridController
from estimation.estimator import ContactAwareEstimator, EstimatorOutput
from estimation.state import CameraExtrinsic, NavState
from exceptions import EstimatorFailure, LostTargetError, SimulationDivergenceError
from logging_utils import get_logger
from models.schemas import EstimatorStatus, RunMetrics, Scenario, VelocitySource
from simulation.simulator import SensorFrame, VehicleSimulator, spawn_streams
from simulation.sensors import CircleObservation, FtSample
from utils.file_utils import RunLogs, RunPaths, ensure_run_dirs, load_run_logs, write_metrics, write_table
from utils.metrics import compute_metrics

logger = get_logger()

ProgressCallback = Callable[[float], None]

TRUTH_COLUMNS = ["t", "px", "py", "pz", "vx", "vy", "vz", "roll_deg", "pitch_deg", "yaw_deg",
                 "ee_x", "ee_y", "ee_z", "wall_contact"]
CONTROL_COLUMNS = (["t", "phase", "lambda", "depth", "e_u", "e_v", "e_r", "target_lost", "contact",
                    "F_measured", "F_f"]
                   + [f"tau_vs_{i}" for i in range(6)] + [f"tau_b_{i}" for i in range(6)]
                   + [f"rotor_{i}" for i in range(6)] + ["saturated", "fb_vx", "fb_vy", "fb_vz"])
ESTIMATOR_COLUMNS = ["t", "status", "px", "py", "pz", "vx", "vy", "vz", "contact_active", "contact_weight"]
FT_COLUMNS = ["t", "fx", "fy", "fz", "tx", "ty", "tz", "F_normal"]
SOLVER_COLUMNS = ["t", "iterations", "initial_cost", "final_cost", "converged", "monotone"]
PHASE_COLUMNS = ["t", "phase"]


@dataclass
class RunResult:
    metrics: RunMetrics
    paths: Optional[RunPaths]
    diverged: bool = False
    wall_time: float = 0.0

    @property
    def exit_code(self) -> int:
        if self.diverged:
            return 3
        return 0 if self.metrics.success else 1


def truth_nav_state(frame_state) -> NavState:
    return NavState(frame_state.time, frame_state.position, frame_state.velocity, frame_state.orientation)


class ScenarioRunner:
    """
    Runs one scenario deterministically and records its log streams.

    The estimator always runs when enabled. With ground-truth velocity feedback
    it runs in shadow mode, so toggling estimator options never changes the
    closed loop or the sensor streams.
    """

    def __init__(self, scenario: Scenario, out_dir: Optional[Path] = None):
        self.scenario = scenario
        self.paths = ensure_run_dirs(out_dir) if out_dir is not None else None
        if self.paths is not None:
            self.paths.scenario_json.write_text(scenario.model_dump_json(indent=2))
        self.streams = spawn_streams(scenario.seed)
        self.sim = VehicleSimulator(scenario, self.streams)
        self.controller = HybridController(scenario)
        self.estimator: Optional[ContactAwareEstimator] = None
        if scenario.estimator.enabled:
            extrinsic = CameraExtrinsic.from_transform(self.sim.camera.extrinsic)
            self.estimator = ContactAwareEstimator(scenario, extrinsic, self.streams["estimator_init"])
        self.control_steps = scenario.timing.period_steps(scenario.timing.control_rate)
        self.velocity_bounds = np.asarray(scenario.velocity_noise_bounds, dtype=float)

        self.rows: Dict[str, List[Dict[str, object]]] = {
            "truth": [], "control": [], "estimator": [], "ft": [], "solver": [], "phases": []}
        self._pending_circle: Optional[CircleObservation] = None
        self._latest_ft: Optional[FtSample] = None
        self._last_gyro: Optional[np.ndarray] = None
        self._estimator_seeded = False

    # ------------------------------------------------------------- feedback --

    def _estimator_feedback(self):
        """Velocity, attitude and rate from the estimator; None until it is running."""
        if self.estimator is None or self.estimator.status is not EstimatorStatus.RUNNING:
            return None
        nav = self.estimator.latest()
        if nav is None or self._last_gyro is None:
            return None
        return nav.velocity, nav.rotation, self._last_gyro - nav.gyro_bias

    def _feedback(self, state):
        noise = self.streams["velocity_noise"].uniform(-1.0, 1.0, 3) * self.velocity_bounds
        if self.scenario.velocity_source is VelocitySource.ESTIMATOR:
            estimated = self._estimator_feedback()
            if estimated is not None:
                return estimated
        return state.velocity + noise, state.orientation.as_matrix(), state.angular_velocity

    # --------------------------------------------------------------- sensors --

    def _feed_estimator(self, frame: SensorFrame) -> None:
        if self.estimator is None:
            return
        if frame.imu is not None:
            self.estimator.add_imu(frame.imu)
            self._last_gyro = np.asarray(frame.imu.angular_rate)
        if frame.ft is not None:
            self.estimator.add_ft(frame.ft)
        if frame.camera is None:
            return
        if not self._estimator_seeded and frame.camera.timestamp >= self.scenario.estimator.start_time:
            self.estimator.initialize(truth_nav_state(frame.state))
            self._estimator_seeded = True
        output = self.estimator.estimator_step(frame.camera)
        self._record_solver(output)
        if output.status is EstimatorStatus.FAILED:
            raise EstimatorFailure(f"Estimator failed at t={frame.camera.timestamp:.3f}s")

    def _record_solver(self, output: EstimatorOutput) -> None:
        solve = output.solve
        if solve is None:
            return
        history = solve.cost_history
        monotone = all(b <= a for a, b in zip(history, history[1:]))
        if not monotone:
            logger.warning(f"Non-monotone LM cost history at t={output.timestamp:.3f}s")
        self.rows["solver"].append({
            "t": output.timestamp, "iterations": solve.iterations, "initial_cost": solve.initial_cost,
            "final_cost": solve.final_cost, "converged": int(solve.converged), "monotone": int(monotone)})

    # -------------------------------------------------------------- logging --

    def _record_tick(self, frame: SensorFrame, output: ControlOutput, feedback_velocity: np.ndarray) -> None:
        state = frame.state
        roll, pitch, yaw = np.rad2deg(state.orientation.as_euler())
        ee = self.sim.end_effector_position()
        self.rows["truth"].append({
            "t": state.time, "px": state.position[0], "py": state.position[1], "pz": state.position[2],
            "vx": state.velocity[0], "vy": state.velocity[1], "vz": state.velocity[2],
            "roll_deg": roll, "pitch_deg": pitch, "yaw_deg": yaw,
            "ee_x": ee[0], "ee_y": ee[1], "ee_z": ee[2], "wall_contact": int(state.in_contact)})

        error = output.feature_error
        row = {
            "t": state.time, "phase": output.phase.value, "lambda": output.lam,
            "depth": output.depth if output.depth is not None else np.nan,
            "e_u": error[0] if error is not None else np.nan,
            "e_v": error[1] if error is not None else np.nan,
            "e_r": error[2] if error is not None else np.nan,
            "target_lost": int(output.target_lost), "contact": int(output.contact),
            "F_measured": output.force_measured, "F_f": output.force_command,
            "saturated": int(output.allocation.saturated),
            "fb_vx": feedback_velocity[0], "fb_vy": feedback_velocity[1], "fb_vz": feedback_velocity[2],
        }
        for i in range(6):
            row[f"tau_vs_{i}"] = output.command.motion[i]
            row[f"tau_b_{i}"] = output.command.total[i]
            row[f"rotor_{i}"] = output.allocation.rotor_speeds[i]
        self.rows["control"].append(row)

        if self.estimator is not None and self.estimator.status is EstimatorStatus.RUNNING:
            nav = self.estimator.latest()
            if nav is not None:
                self.rows["estimator"].append({
                    "t": state.time, "status": self.estimator.status.value,
                    "px": nav.position[0], "py": nav.position[1], "pz": nav.position[2],
                    "vx": nav.velocity[0], "vy": nav.velocity[1], "vz": nav.velocity[2],
                    "contact_active": int(self.estimator.in_contact),
                    "contact_weight": self.estimator.window.contact_factors[-1].weight
                    if self.estimator.window.contact_factors else 0.0})

    def _record_ft(self, sample: FtSample, rotation: np.ndarray) -> None:
        normal_sensor = rotation.T @ self.scenario.wall.normal_vector
        self.rows["ft"].append({
            "t": sample.timestamp, "fx": sample.force[0], "fy": sample.force[1], "fz": sample.force[2],
            "tx": sample.torque[0], "ty": sample.torque[1], "tz": sample.torque[2],
            "F_normal": float(np.asarray(sample.force) @ normal_sensor)})

    def write_logs(self) -> RunLogs:
        """Write every stream (possibly partial) and return them as frames."""
        columns = {"truth": TRUTH_COLUMNS, "control": CONTROL_COLUMNS, "estimator": ESTIMATOR_COLUMNS,
                   "ft": FT_COLUMNS, "solver": SOLVER_COLUMNS, "phases": PHASE_COLUMNS}
        frames = {}
        for name, rows in self.rows.items():
            if self.paths is None:
                frame = pd.DataFrame(rows, columns=columns[name])
                if "t" in frame.columns:
                    frame["t"] = frame["t"].astype(float).round(6)
                frames[name] = frame
            else:
                frames[name] = write_table(rows, self.paths.stream(name), columns[name])
        return RunLogs(**frames)

    # ------------------------------------------------------------------ run --

    def run(self, progress: Optional[ProgressCallback] = None) -> RunResult:
        """
        Execute the closed loop for the scenario duration.

        Returns:
            Metrics and output locations. Divergence, estimator failure and a
            lost target end the run early; the logs recorded so far are kept.
        """
        scenario = self.scenario
        started = time.perf_counter()
        total_steps = int(round(scenario.duration / self.sim.dt))
        logger.info(f"Running scenario '{scenario.name}' (seed {scenario.seed}) for {scenario.duration:.1f}s")
        rotor_speeds = self.sim.state.rotor_speeds
        phase = None
        failure: Optional[str] = None
        diverged = False

        try:
            for _ in range(total_steps):
                frame = self.sim.step(rotor_speeds)
                if frame.camera is not None:
                    self._pending_circle = frame.camera.circle
                if frame.ft is not None:
                    self._latest_ft = frame.ft
                    self._record_ft(frame.ft, frame.state.orientation.as_matrix())
                self._feed_estimator(frame)

                if self.sim.step_index % self.control_steps != 0:
                    continue
                velocity, rotation, rate = self._feedback(frame.state)
                output = self.controller.tick(ControlInputs(
                    timestamp=frame.state.time, velocity_world=velocity, rotation=rotation,
                    angular_velocity=rate, circle=self._pending_circle, ft=self._latest_ft))
                self._pending_circle = None
                self._latest_ft = None
                rotor_speeds = output.allocation.rotor_speeds
                if output.phase is not phase:
                    phase = output.phase
                    self.rows["phases"].append({"t": frame.state.time, "phase": phase.value})
                self._record_tick(frame, output, velocity)
                if progress is not None:
                    progress(frame.state.time / scenario.duration)
        except SimulationDivergenceError as e:
            logger.error(f"Run diverged: {str(e)}")
            failure, diverged = f"simulation diverged: {str(e)}", True
        except LostTargetError as e:
            logger.error(f"Run aborted: {str(e)}")
            failure = f"lost target: {str(e)}"
        except EstimatorFailure as e:
            logger.error(f"Run aborted: {str(e)}")
            failure, diverged = f"estimator failure: {str(e)}", True
        finally:
            logs = self.write_logs()
        if self.paths is not None:
            # Metrics come from the files on disk so the metrics subcommand reproduces them
            logs = load_run_logs(self.paths.logs)

        metrics = compute_metrics(logs, scenario, failure)
        if self.paths is not None:
            write_metrics(metrics, self.paths)
        wall_time = time.perf_counter() - started
        logger.info(f"Scenario '{scenario.name}' finished in {wall_time:.1f}s: "
                    f"{'success' if metrics.success else 'failure'}"
                    f"{'' if metrics.success else f' ({metrics.failure_reason})'}")
        return RunResult(metrics=metrics, paths=self.paths, diverged=diverged, wall_time=wall_time)


def run_scenario(scenario: Scenario, out_dir: Optional[Path] = None,
                 progress: Optional[ProgressCallback] = None) -> RunResult:
    return ScenarioRunner(scenario, out_dir).run(progress)
