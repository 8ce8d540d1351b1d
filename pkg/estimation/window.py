"""Sliding-window factor graph: dense Levenberg-Marquardt solve and Schur-complement marginalization."""
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh

from estimation.factors import (ContactFactor, ImuFactor, Intrinsics, LinearizedFactor, MarginalPrior,
                                PriorFactor, StereoFactor, VisualFactor)
from estimation.preintegration import Preintegrated
from estimation.state import (EXTRINSIC_KEY, CameraExtrinsic, Landmark, NavState,
                              VariableKey, key_dim, landmark_key, state_key)
from logging_utils import get_logger
from models.schemas import CameraNoise, EstimatorConfig

logger = get_logger()

MIN_PIXEL_SIGMA = 0.1
MIN_INVERSE_DEPTH = 1e-3
EIGEN_THRESHOLD = 1e-10
MAX_REJECTIONS = 10


@dataclass
class SolveResult:
    iterations: int
    initial_cost: float
    final_cost: float
    cost_history: List[float]
    converged: bool
    covariance: Optional[np.ndarray] = None
    aborted: bool = False


@dataclass
class LinearSystem:
    ordering: List[VariableKey]
    offsets: Dict[VariableKey, int]
    hessian: np.ndarray
    gradient: np.ndarray
    cost: float


def huber(squared_norm: float, delta: float) -> Tuple[float, float]:
    """Robust cost rho(s) and IRLS weight for a whitened residual of squared norm s."""
    if squared_norm <= delta * delta:
        return squared_norm, 1.0
    norm = np.sqrt(squared_norm)
    return 2.0 * delta * norm - delta * delta, delta / norm


class FactorGraphWindow:
    """
    Keyframes, landmarks, camera extrinsic and the factors connecting them.

    Keyframes are identified by increasing integer ids and kept in insertion
    order. Exactly one preintegration links each adjacent keyframe pair.
    """

    def __init__(self, config: EstimatorConfig, intrinsics: Intrinsics, extrinsic: CameraExtrinsic,
                 camera_noise: Optional[CameraNoise] = None):
        self.config = config
        self.intrinsics = intrinsics
        self.extrinsic = extrinsic
        noise = camera_noise or CameraNoise()
        self.pixel_sigma = max(noise.landmark_pixel_sigma, MIN_PIXEL_SIGMA)
        self.disparity_sigma = max(noise.disparity_sigma, MIN_PIXEL_SIGMA)
        self.keyframes: "OrderedDict[int, NavState]" = OrderedDict()
        self.imu_factors: Dict[Tuple[int, int], ImuFactor] = {}
        self.landmarks: Dict[int, Landmark] = {}
        self.contact_factors: List[ContactFactor] = []
        self.prior: Optional[MarginalPrior] = None

    # ---------------------------------------------------------- structure --

    def __len__(self) -> int:
        return len(self.keyframes)

    @property
    def keyframe_ids(self) -> List[int]:
        return list(self.keyframes.keys())

    @property
    def newest_id(self) -> int:
        return next(reversed(self.keyframes))

    @property
    def newest(self) -> NavState:
        return self.keyframes[self.newest_id]

    def add_keyframe(self, keyframe_id: int, state: NavState, preint: Optional[Preintegrated] = None) -> None:
        if self.keyframes:
            if preint is None:
                raise ValueError("a preintegration is required between consecutive keyframes")
            self.imu_factors[(self.newest_id, keyframe_id)] = ImuFactor(self.newest_id, keyframe_id, preint)
        self.keyframes[keyframe_id] = state

    def add_contact_factor(self, factor: ContactFactor) -> None:
        if factor.k_id not in self.keyframes or factor.k1_id not in self.keyframes:
            raise ValueError("contact factors must reference in-window keyframes")
        self.contact_factors.append(factor)

    def active_landmarks(self) -> List[Landmark]:
        return [lm for lm in self.landmarks.values()
                if lm.anchor_id in self.keyframes and lm.ready()]

    def ordering(self) -> List[VariableKey]:
        keys = [state_key(k) for k in self.keyframes]
        if self.extrinsic.estimated:
            keys.append(EXTRINSIC_KEY)
        keys.extend(landmark_key(lm.landmark_id) for lm in sorted(self.active_landmarks(),
                                                                key=lambda lm: lm.landmark_id))
        return keys

    def values(self) -> Dict[VariableKey, object]:
        values: Dict[VariableKey, object] = {state_key(k): s for k, s in self.keyframes.items()}
        values[EXTRINSIC_KEY] = self.extrinsic
        for lm in self.landmarks.values():
            values[landmark_key(lm.landmark_id)] = lm.inverse_depth
        return values

    def set_values(self, values: Dict[VariableKey, object]) -> None:
        for k in self.keyframes:
            self.keyframes[k] = values[state_key(k)]
        self.extrinsic = values[EXTRINSIC_KEY]
        for lm in self.landmarks.values():
            lm.inverse_depth = float(values[landmark_key(lm.landmark_id)])

    def factors(self) -> list:
        """Every factor currently in the problem, in a fixed order."""
        factors: list = []
        if self.prior is not None:
            factors.append(PriorFactor(self.prior))
        factors.extend(self.imu_factors[pair] for pair in sorted(self.imu_factors))
        for lm in sorted(self.active_landmarks(), key=lambda lm: lm.landmark_id):
            factors.extend(self.landmark_factors(lm))
        factors.extend(self.contact_factors)
        return factors

    def landmark_factors(self, lm: Landmark) -> list:
        factors = []
        anchor_pixel = lm.anchor_pixel
        for kf_id in sorted(lm.observations):
            if kf_id not in self.keyframes:
                continue
            u, v, disparity = lm.observations[kf_id]
            if kf_id != lm.anchor_id:
                factors.append(VisualFactor(lm.landmark_id, lm.anchor_id, kf_id, anchor_pixel, (u, v),
                                            self.intrinsics, self.pixel_sigma, self.config.min_depth))
            if disparity is not None:
                factors.append(StereoFactor(lm.landmark_id, lm.anchor_id, kf_id, anchor_pixel, disparity,
                                            self.intrinsics, self.disparity_sigma, self.config.min_depth))
        return factors

    # -------------------------------------------------------- linearization --

    def retract(self, values: Dict[VariableKey, object], ordering: List[VariableKey],
                offsets: Dict[VariableKey, int], step: np.ndarray) -> Dict[VariableKey, object]:
        updated = dict(values)
        for key in ordering:
            start = offsets[key]
            delta = step[start:start + key_dim(key)]
            value = values[key]
            if key[0] == "x":
                updated[key] = value.boxplus(delta).with_clamped_biases(
                    self.config.accel_bias_bound, self.config.gyro_bias_bound)
            elif key[0] == "c":
                updated[key] = value.boxplus(delta)
            else:
                updated[key] = max(float(value) + float(delta[0]), MIN_INVERSE_DEPTH)
        return updated

    def evaluate(self, values: Dict[VariableKey, object], factors=None) -> Tuple[float, List[LinearizedFactor]]:
        """Total robust cost 0.5 * sum(rho) and the linearized factors at `values`."""
        cost = 0.0
        linearized = []
        for factor in factors if factors is not None else self.factors():
            lin = factor.linearize(values)
            if lin is None:
                continue
            squared = float(lin.residual @ lin.residual)
            if lin.robust:
                rho, _ = huber(squared, self.config.huber_scale)
            else:
                rho = squared
            cost += 0.5 * rho
            linearized.append(lin)
        return cost, linearized

    def build_system(self, values: Dict[VariableKey, object], ordering: List[VariableKey],
                     factors=None) -> LinearSystem:
        """Dense Gauss-Newton system H dx = -b with Huber IRLS weights on visual factors."""
        offsets: Dict[VariableKey, int] = {}
        size = 0
        for key in ordering:
            offsets[key] = size
            size += key_dim(key)
        hessian = np.zeros((size, size))
        gradient = np.zeros(size)
        cost, linearized = self.evaluate(values, factors)
        for lin in linearized:
            weight = huber(float(lin.residual @ lin.residual), self.config.huber_scale)[1] if lin.robust else 1.0
            blocks = [(offsets[k], jac) for k, jac in lin.jacobians.items() if k in offsets]
            for start_a, jac_a in blocks:
                end_a = start_a + jac_a.shape[1]
                gradient[start_a:end_a] += weight * jac_a.T @ lin.residual
                for start_b, jac_b in blocks:
                    end_b = start_b + jac_b.shape[1]
                    hessian[start_a:end_a, start_b:end_b] += weight * jac_a.T @ jac_b
        return LinearSystem(ordering, offsets, hessian, gradient, cost)

    def linearize(self) -> LinearSystem:
        """Full system at the current values over the current ordering."""
        return self.build_system(self.values(), self.ordering())

    # ------------------------------------------------------- marginalization --

    def marginalize_oldest(self) -> bool:
        """
        Fold the oldest keyframe and the landmarks anchored at it into the prior.

        Returns:
            True when a keyframe was marginalized, False below the window size
        """
        if len(self.keyframes) < self.config.window_size:
            return False

        oldest = next(iter(self.keyframes))
        oldest_key = state_key(oldest)
        dropped_landmarks = [lm for lm in self.landmarks.values() if lm.anchor_id == oldest]
        active_ids = {lm.landmark_id for lm in self.active_landmarks()}
        dropped_keys = {oldest_key} | {landmark_key(lm.landmark_id) for lm in dropped_landmarks
                                       if lm.landmark_id in active_ids}

        connected = []
        for factor in self.factors():
            if dropped_keys & set(factor.keys):
                connected.append(factor)

        values = self.values()
        involved: List[VariableKey] = []
        full_order = self.ordering()
        for key in full_order:
            if any(key in f.keys for f in connected):
                involved.append(key)
        marg_keys = [k for k in involved if k in dropped_keys]
        keep_keys = [k for k in involved if k not in dropped_keys]

        system = self.build_system(values, marg_keys + keep_keys, connected)
        m = sum(key_dim(k) for k in marg_keys)
        h_mm = system.hessian[:m, :m]
        h_mr = system.hessian[:m, m:]
        h_rr = system.hessian[m:, m:]
        b_m = system.gradient[:m]
        b_r = system.gradient[m:]

        h_mm = 0.5 * (h_mm + h_mm.T)
        eigval, eigvec = eigh(h_mm)
        inv_val = np.where(eigval > EIGEN_THRESHOLD * max(1.0, eigval.max(initial=0.0)), 1.0 / eigval, 0.0)
        h_mm_inv = (eigvec * inv_val) @ eigvec.T
        schur = h_rr - h_mr.T @ h_mm_inv @ h_mr
        grad = b_r - h_mr.T @ h_mm_inv @ b_m

        schur = 0.5 * (schur + schur.T)
        s_val, s_vec = eigh(schur)
        keep = s_val > EIGEN_THRESHOLD * max(1.0, s_val.max(initial=0.0))
        sqrt_val = np.sqrt(s_val[keep])
        jacobian = (s_vec[:, keep] * sqrt_val).T
        residual = (s_vec[:, keep].T @ grad) / sqrt_val

        self.prior = MarginalPrior(keep_keys, {k: values[k] for k in keep_keys}, jacobian, residual)

        del self.keyframes[oldest]
        self.imu_factors = {pair: f for pair, f in self.imu_factors.items() if oldest not in pair}
        self.contact_factors = [f for f in self.contact_factors if oldest not in (f.k_id, f.k1_id)]
        for lm in dropped_landmarks:
            del self.landmarks[lm.landmark_id]
        for lm in self.landmarks.values():
            lm.observations.pop(oldest, None)
        logger.debug(f"Marginalized keyframe {oldest} with {len(dropped_landmarks)} landmarks; "
                     f"prior over {len(keep_keys)} variables, rank {int(keep.sum())}")
        return True


def _marginal_covariance(system: LinearSystem, key: VariableKey) -> Optional[np.ndarray]:
    start = system.offsets[key]
    dim = key_dim(key)
    try:
        factor = cho_factor(system.hessian, lower=True)
    except LinAlgError:
        return None
    rhs = np.zeros((system.hessian.shape[0], dim))
    rhs[start:start + dim] = np.eye(dim)
    return cho_solve(factor, rhs)[start:start + dim]


def solve_window(window: FactorGraphWindow) -> SolveResult:
    """
    Levenberg-Marquardt over the window's local coordinates.

    Steps are accepted only when they decrease the total cost, so the final cost
    never exceeds the initial one. A singular damped system or a non-finite
    trial cost counts as a rejected step and raises the damping.

    Args:
        window: The window to optimize; its values are updated in place

    Returns:
        Cost history, convergence flag and the marginal covariance of the newest keyframe
    """
    config = window.config
    ordering = window.ordering()
    values = window.values()
    system = window.build_system(values, ordering)
    initial_cost = system.cost
    history = [initial_cost]
    if not np.isfinite(initial_cost):
        logger.warning("Window cost is not finite at the initial values; skipping solve")
        return SolveResult(0, initial_cost, initial_cost, history, False, aborted=True)

    diag = np.diag(system.hessian)
    mu = 1e-4 * max(float(diag.max(initial=1.0)), 1.0)
    nu = 2.0
    converged = False
    iterations = 0

    while iterations < config.max_iterations and not converged:
        iterations += 1
        accepted = False
        for _ in range(MAX_REJECTIONS):
            scaling = np.maximum(np.diag(system.hessian), 1e-9)
            damped = system.hessian + mu * np.diag(scaling)
            try:
                step = -cho_solve(cho_factor(damped, lower=True), system.gradient)
            except (LinAlgError, ValueError):
                mu *= nu
                nu *= 2.0
                continue
            if not np.all(np.isfinite(step)):
                mu *= nu
                nu *= 2.0
                continue
            if np.linalg.norm(step) < config.step_tol:
                converged = True
                break

            trial = window.retract(values, ordering, system.offsets, step)
            trial_cost, _ = window.evaluate(trial)
            if np.isfinite(trial_cost) and trial_cost < system.cost:
                predicted = -(system.gradient @ step) - 0.5 * step @ system.hessian @ step
                rho = (system.cost - trial_cost) / predicted if predicted > 0 else 0.0
                mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                nu = 2.0
                previous = system.cost
                values = trial
                system = window.build_system(values, ordering)
                history.append(system.cost)
                accepted = True
                if (previous - system.cost) / max(previous, 1e-300) < config.relative_cost_tol:
                    converged = True
                break
            mu *= nu
            nu *= 2.0
        if not accepted and not converged:
            break

    window.set_values(values)
    covariance = _marginal_covariance(system, state_key(window.newest_id)) if window.keyframes else None
    logger.debug(f"LM finished after {iterations} iterations: cost {initial_cost:.4g} -> {system.cost:.4g}")
    return SolveResult(iterations, initial_cost, system.cost, history, converged, covariance)
