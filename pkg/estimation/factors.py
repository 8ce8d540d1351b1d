"""Residuals, analytic Jacobians and whitened factors of the sliding-window problem.

Residual functions return raw (unweighted) residuals with Jacobians with
respect to the right-perturbation local coordinates of each argument. Factor
classes wrap them with their information and map Jacobians to window
variable keys.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cholesky

from estimation.preintegration import GRAVITY_WORLD, Preintegrated
from estimation.state import (BA, BG, EXTRINSIC_KEY, STATE_DIM, CameraExtrinsic, NavState, P, R, V,
                              VariableKey, key_dim, landmark_key, state_key)
from exceptions import EstimatorError
from geometry.rotations import quat_log, right_jacobian, right_jacobian_inv, skew
from models.schemas import CameraSettings

DEFAULT_MIN_DEPTH = 1e-3


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    baseline: float

    @classmethod
    def from_settings(cls, settings: CameraSettings) -> "Intrinsics":
        return cls(settings.fx, settings.fy, settings.cx, settings.cy, settings.stereo_baseline)

    def bearing(self, u: float, v: float) -> np.ndarray:
        return np.array([(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0])


@dataclass
class ResidualBlock:
    residual: np.ndarray
    jacobians: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class LinearizedFactor:
    """Whitened residual and Jacobians keyed by window variable."""
    residual: np.ndarray
    jacobians: Dict[VariableKey, np.ndarray]
    robust: bool = False


def _state_block(rows: int) -> np.ndarray:
    return np.zeros((rows, STATE_DIM))


# ---------------------------------------------------------------- visual ----

def _camera_point(x_i: NavState, x_j: NavState, ext: CameraExtrinsic, inverse_depth: float,
                  anchor_pixel, intr: Intrinsics):
    """Transform the anchored landmark into the observer camera; returns P_cj and its Jacobians."""
    r_i, r_j = x_i.rotation, x_j.rotation
    r_bc, t_bc = ext.rotation_matrix, ext.translation
    f_i = intr.bearing(*anchor_pixel)
    p_ci = f_i / inverse_depth
    p_bi = r_bc @ p_ci + t_bc
    p_w = r_i @ p_bi + x_i.position
    p_bj = r_j.T @ (p_w - x_j.position)
    p_cj = r_bc.T @ (p_bj - t_bc)

    a = r_bc.T @ r_j.T
    d_xi = np.zeros((3, STATE_DIM))
    d_xi[:, P] = a
    d_xi[:, R] = -a @ r_i @ skew(p_bi)
    d_xj = np.zeros((3, STATE_DIM))
    d_xj[:, P] = -a
    d_xj[:, R] = r_bc.T @ skew(p_bj)
    rel = r_j.T @ r_i
    d_gamma = (a @ r_i @ r_bc @ (-p_ci / inverse_depth)).reshape(3, 1)
    d_ext = np.zeros((3, 6))
    d_ext[:, 0:3] = r_bc.T @ (rel - np.eye(3))
    d_ext[:, 3:6] = -r_bc.T @ rel @ r_bc @ skew(p_ci) + skew(p_cj)
    return p_cj, {"xi": d_xi, "xj": d_xj, "gamma": d_gamma, "ext": d_ext}


def visual_residual(x_i: NavState, x_j: NavState, ext: CameraExtrinsic, inverse_depth: float,
                    anchor_pixel, pixel, intr: Intrinsics,
                    min_depth: float = DEFAULT_MIN_DEPTH) -> Optional[ResidualBlock]:
    """
    Reprojection residual of an inverse-depth landmark anchored at x_i and seen from x_j.

    Returns:
        Residual (2,) [px] with Jacobians keyed "xi", "xj", "ext", "gamma",
        or None when the point depth in the observer camera is below `min_depth`
    """
    if inverse_depth <= 0.0:
        return None
    p_cj, d_point = _camera_point(x_i, x_j, ext, inverse_depth, anchor_pixel, intr)
    x, y, z = p_cj
    if z <= min_depth:
        return None
    residual = np.array([intr.fx * x / z + intr.cx - pixel[0],
                         intr.fy * y / z + intr.cy - pixel[1]])
    d_proj = np.array([[intr.fx / z, 0.0, -intr.fx * x / z ** 2],
                       [0.0, intr.fy / z, -intr.fy * y / z ** 2]])
    return ResidualBlock(residual, {name: d_proj @ jac for name, jac in d_point.items()})


def stereo_residual(x_i: NavState, x_j: NavState, ext: CameraExtrinsic, inverse_depth: float,
                    anchor_pixel, disparity: float, intr: Intrinsics,
                    min_depth: float = DEFAULT_MIN_DEPTH) -> Optional[ResidualBlock]:
    """Disparity residual fx*b/z - disparity [px] in the observer camera; gated like the reprojection."""
    if inverse_depth <= 0.0:
        return None
    p_cj, d_point = _camera_point(x_i, x_j, ext, inverse_depth, anchor_pixel, intr)
    z = p_cj[2]
    if z <= min_depth:
        return None
    scale = intr.fx * intr.baseline
    residual = np.array([scale / z - disparity])
    d_z = np.array([[0.0, 0.0, -scale / z ** 2]])
    return ResidualBlock(residual, {name: d_z @ jac for name, jac in d_point.items()})


# ------------------------------------------------------------------- imu ----

def imu_residual(x_i: NavState, x_j: NavState, preint: Preintegrated,
                 gravity: np.ndarray = GRAVITY_WORLD) -> ResidualBlock:
    """
    Preintegration residual [r_p, r_v, r_theta, r_ba, r_bg] between consecutive keyframes.

    The deltas are corrected to the biases of x_i to first order.
    """
    t = preint.dt
    r_i_t = x_i.rotation.T
    dbg = x_i.gyro_bias - preint.gyro_bias
    dp, dv, dq = preint.corrected(x_i.accel_bias, x_i.gyro_bias)

    pos_term = x_j.position - x_i.position - x_i.velocity * t - 0.5 * gravity * t * t
    vel_term = x_j.velocity - x_i.velocity - gravity * t
    err_rot = (dq.inverse() * x_i.orientation.inverse() * x_j.orientation)
    r_theta = quat_log(err_rot)
    residual = np.concatenate((
        r_i_t @ pos_term - dp,
        r_i_t @ vel_term - dv,
        r_theta,
        x_j.accel_bias - x_i.accel_bias,
        x_j.gyro_bias - x_i.gyro_bias,
    ))

    jr_inv = right_jacobian_inv(r_theta)
    e_mat = err_rot.as_matrix()
    phi = preint.jac_q_bg @ dbg
    eye = np.eye(3)

    j_i = _state_block(15)
    j_i[0:3, P] = -r_i_t
    j_i[0:3, V] = -r_i_t * t
    j_i[0:3, R] = skew(r_i_t @ pos_term)
    j_i[0:3, BA] = -preint.jac_p_ba
    j_i[0:3, BG] = -preint.jac_p_bg
    j_i[3:6, V] = -r_i_t
    j_i[3:6, R] = skew(r_i_t @ vel_term)
    j_i[3:6, BA] = -preint.jac_v_ba
    j_i[3:6, BG] = -preint.jac_v_bg
    j_i[6:9, R] = -jr_inv @ x_j.rotation.T @ x_i.rotation
    j_i[6:9, BG] = -jr_inv @ e_mat.T @ right_jacobian(phi) @ preint.jac_q_bg
    j_i[9:12, BA] = -eye
    j_i[12:15, BG] = -eye

    j_j = _state_block(15)
    j_j[0:3, P] = r_i_t
    j_j[3:6, V] = r_i_t
    j_j[6:9, R] = jr_inv
    j_j[9:12, BA] = eye
    j_j[12:15, BG] = eye
    return ResidualBlock(residual, {"xi": j_i, "xj": j_j})


# --------------------------------------------------------------- contact ----

def contact_residual(x_k: NavState, x_k1: NavState, normal: np.ndarray) -> ResidualBlock:
    """[n.(p_k1 - p_k), n.v_k]: no motion along the wall normal while in contact."""
    n = np.asarray(normal, dtype=float)
    residual = np.array([n @ (x_k1.position - x_k.position), n @ x_k.velocity])
    j_k = _state_block(2)
    j_k[0, P] = -n
    j_k[1, V] = n
    j_k1 = _state_block(2)
    j_k1[0, P] = n
    return ResidualBlock(residual, {"xi": j_k, "xj": j_k1})


def contact_information(force_window: Sequence[float], alpha: float, variance_floor: float) -> np.ndarray:
    """
    Isotropic 2x2 information of the contact residual from recent normal forces.

    A steadier force gives a smaller variance and therefore a stiffer constraint.

    Raises:
        EstimatorError: If fewer than two force samples are given
    """
    forces = np.asarray(force_window, dtype=float)
    if forces.size < 2:
        raise EstimatorError(f"Contact information needs at least 2 force samples, got {forces.size}")
    variance = float(np.var(forces))
    covariance = alpha * max(variance, variance_floor)
    return np.eye(2) / covariance


# ----------------------------------------------------------------- prior ----

@dataclass
class MarginalPrior:
    """Linear prior r_p + H_p * (x [-] x_lin) over the listed variables."""
    keys: List[VariableKey]
    linearization: Dict[VariableKey, object]
    jacobian: np.ndarray
    residual: np.ndarray

    @property
    def dim(self) -> int:
        return sum(key_dim(k) for k in self.keys)

    @property
    def information(self) -> np.ndarray:
        return self.jacobian.T @ self.jacobian

    @classmethod
    def from_sigmas(cls, key: VariableKey, value, sigmas: np.ndarray) -> "MarginalPrior":
        sigmas = np.asarray(sigmas, dtype=float)
        return cls([key], {key: value}, np.diag(1.0 / sigmas), np.zeros(sigmas.size))


def _local(value, lin) -> Tuple[np.ndarray, np.ndarray]:
    """Local coordinates of value around lin and their derivative w.r.t. a right perturbation of value."""
    if isinstance(value, NavState):
        delta = value.boxminus(lin)
        jac = np.eye(STATE_DIM)
        jac[R, R] = right_jacobian_inv(delta[R])
        return delta, jac
    if isinstance(value, CameraExtrinsic):
        delta = value.boxminus(lin)
        jac = np.eye(6)
        jac[3:6, 3:6] = right_jacobian_inv(delta[3:6])
        return delta, jac
    return np.array([float(value) - float(lin)]), np.eye(1)


def prior_residual(prior: MarginalPrior, values: Dict[VariableKey, object]) -> ResidualBlock:
    """Evaluate the prior; Jacobians are keyed by variable key."""
    deltas = []
    blocks = []
    for key in prior.keys:
        delta, jac = _local(values[key], prior.linearization[key])
        deltas.append(delta)
        blocks.append(jac)
    residual = prior.residual + prior.jacobian @ np.concatenate(deltas)
    jacobians = {}
    col = 0
    for key, jac in zip(prior.keys, blocks):
        dim = jac.shape[0]
        jacobians[key] = prior.jacobian[:, col:col + dim] @ jac
        col += dim
    return ResidualBlock(residual, jacobians)


# --------------------------------------------------------------- factors ----

def sqrt_information(information: np.ndarray) -> np.ndarray:
    """Upper factor U with U^T U = information."""
    return cholesky(0.5 * (information + information.T), lower=False)


def _whiten(block: ResidualBlock, sqrt_info: np.ndarray, mapping: Dict[str, VariableKey],
            robust: bool) -> LinearizedFactor:
    jacobians: Dict[VariableKey, np.ndarray] = {}
    for name, jac in block.jacobians.items():
        key = mapping.get(name)
        if key is None:
            continue
        weighted = sqrt_info @ jac
        jacobians[key] = jacobians[key] + weighted if key in jacobians else weighted
    return LinearizedFactor(sqrt_info @ block.residual, jacobians, robust)


class ImuFactor:
    def __init__(self, i_id: int, j_id: int, preint: Preintegrated, gravity: np.ndarray = GRAVITY_WORLD):
        self.i_id = i_id
        self.j_id = j_id
        self.preint = preint
        self.gravity = gravity
        cov = np.zeros((15, 15))
        cov[:9, :9] = preint.covariance
        cov[9:, 9:] = preint.bias_walk_covariance
        self.sqrt_info = sqrt_information(np.linalg.inv(cov + 1e-12 * np.eye(15)))

    @property
    def keys(self) -> Tuple[VariableKey, ...]:
        return state_key(self.i_id), state_key(self.j_id)

    def linearize(self, values) -> LinearizedFactor:
        block = imu_residual(values[state_key(self.i_id)], values[state_key(self.j_id)],
                             self.preint, self.gravity)
        return _whiten(block, self.sqrt_info, {"xi": state_key(self.i_id), "xj": state_key(self.j_id)}, False)


@dataclass
class ContactFactor:
    """
    Contact consistency between keyframes k and k1, weighted by force steadiness.

    The position row is divided by the keyframe spacing so both rows are velocities.
    """
    k_id: int
    k1_id: int
    normal: np.ndarray
    information: np.ndarray
    force_window: Tuple[float, ...]
    dt: float

    @property
    def keys(self) -> Tuple[VariableKey, ...]:
        return state_key(self.k_id), state_key(self.k1_id)

    @property
    def weight(self) -> float:
        return float(self.information[0, 0])

    def linearize(self, values) -> LinearizedFactor:
        block = contact_residual(values[state_key(self.k_id)], values[state_key(self.k1_id)], self.normal)
        scale = np.diag([1.0 / self.dt, 1.0])
        sqrt_info = sqrt_information(self.information) @ scale
        return _whiten(block, sqrt_info, {"xi": state_key(self.k_id), "xj": state_key(self.k1_id)}, False)


class VisualFactor:
    def __init__(self, landmark_id: int, anchor_id: int, observer_id: int, anchor_pixel, pixel,
                 intr: Intrinsics, sigma: float, min_depth: float = DEFAULT_MIN_DEPTH):
        self.landmark_id = landmark_id
        self.anchor_id = anchor_id
        self.observer_id = observer_id
        self.anchor_pixel = anchor_pixel
        self.pixel = pixel
        self.intr = intr
        self.sqrt_info = np.eye(2) / sigma
        self.min_depth = min_depth

    @property
    def keys(self) -> Tuple[VariableKey, ...]:
        return (state_key(self.anchor_id), state_key(self.observer_id),
                landmark_key(self.landmark_id), EXTRINSIC_KEY)

    def _mapping(self) -> Dict[str, VariableKey]:
        return {"xi": state_key(self.anchor_id), "xj": state_key(self.observer_id),
                "gamma": landmark_key(self.landmark_id), "ext": EXTRINSIC_KEY}

    def linearize(self, values) -> Optional[LinearizedFactor]:
        block = visual_residual(values[state_key(self.anchor_id)], values[state_key(self.observer_id)],
                                values[EXTRINSIC_KEY], values[landmark_key(self.landmark_id)],
                                self.anchor_pixel, self.pixel, self.intr, self.min_depth)
        if block is None:
            return None
        return _whiten(block, self.sqrt_info, self._mapping(), True)


class StereoFactor(VisualFactor):
    def __init__(self, landmark_id: int, anchor_id: int, observer_id: int, anchor_pixel, disparity: float,
                 intr: Intrinsics, sigma: float, min_depth: float = DEFAULT_MIN_DEPTH):
        super().__init__(landmark_id, anchor_id, observer_id, anchor_pixel, None, intr, sigma, min_depth)
        self.disparity = disparity
        self.sqrt_info = np.eye(1) / sigma

    def linearize(self, values) -> Optional[LinearizedFactor]:
        block = stereo_residual(values[state_key(self.anchor_id)], values[state_key(self.observer_id)],
                                values[EXTRINSIC_KEY], values[landmark_key(self.landmark_id)],
                                self.anchor_pixel, self.disparity, self.intr, self.min_depth)
        if block is None:
            return None
        return _whiten(block, self.sqrt_info, self._mapping(), True)


class PriorFactor:
    def __init__(self, prior: MarginalPrior):
        self.prior = prior

    @property
    def keys(self) -> Tuple[VariableKey, ...]:
        return tuple(self.prior.keys)

    def linearize(self, values) -> LinearizedFactor:
        block = prior_residual(self.prior, values)
        return LinearizedFactor(block.residual, dict(block.jacobians), False)
