"""Radar ego-velocity measurement model and the EKF correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .propagation import ImuSample
from .so3 import quat_to_rot, skew
from .state import ATT, BG, ERROR_DIM, TD, VEL, NominalState, inject_error

CHI2_GATE_3DOF = float(chi2.ppf(0.997, 3))


class UpdateSkipped(RuntimeError):
    """The correction was not applied; ``reason`` names why."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True)
class Extrinsics:
    """Fixed IMU-to-radar calibration: ``R_RI`` rotates IMU vectors into the radar frame."""

    R_RI: np.ndarray = field(default_factory=lambda: np.eye(3))
    p_IR: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.R_RI, dtype=float).reshape(3, 3)
        if not (np.allclose(R.T @ R, np.eye(3), atol=1e-9) and abs(np.linalg.det(R) - 1.0) < 1e-9):
            raise ValueError("R_RI is not a rotation matrix")
        object.__setattr__(self, "R_RI", R)
        object.__setattr__(self, "p_IR", np.asarray(self.p_IR, dtype=float).reshape(3))


def predict_ego_velocity(x_hat: NominalState, u: ImuSample, ext: Extrinsics) -> np.ndarray:
    """Radar-frame ego-velocity implied by the state and the gyro reading ``u``."""
    R = quat_to_rot(x_hat.q_GI)
    w = u.gyro - x_hat.b_g
    return ext.R_RI @ (R.T @ x_hat.v_GI + np.cross(w, ext.p_IR))


def compute_residual(v_meas, v_pred) -> np.ndarray:
    return np.asarray(v_meas, dtype=float) - np.asarray(v_pred, dtype=float)


def compute_H(x_hat: NominalState, u: ImuSample, ext: Extrinsics, gravity) -> np.ndarray:
    """3x16 measurement Jacobian, including the time-offset column.

    The offset column differentiates the prediction through the attitude
    and velocity rates at the correction time; the gyro reading itself is
    treated as constant.
    """
    R = quat_to_rot(x_hat.q_GI)
    H = np.zeros((3, ERROR_DIM))
    H_q = ext.R_RI @ skew(R.T @ x_hat.v_GI)
    H_v = ext.R_RI @ R.T
    H[:, ATT] = H_q
    H[:, BG] = ext.R_RI @ skew(ext.p_IR)
    H[:, VEL] = H_v
    w = u.gyro - x_hat.b_g
    a = u.accel - x_hat.b_a
    H[:, TD] = H_q @ w + H_v @ (R @ a + np.asarray(gravity, dtype=float))
    return H


def kalman_update(
    x_hat: NominalState,
    P: np.ndarray,
    r: np.ndarray,
    H: np.ndarray,
    R_meas: np.ndarray,
    joseph: bool = True,
    gate: float | None = None,
) -> tuple[NominalState, np.ndarray, float]:
    """EKF correction; returns the posterior state, covariance and the NIS.

    ``joseph=False`` uses the plain ``(I - KH) P`` form. With ``gate`` set,
    innovations whose normalized squared value exceeds it are rejected.

    Raises
    ------
    UpdateSkipped
        Singular innovation covariance, or a gated innovation.
    """
    S = H @ P @ H.T + R_meas
    S = 0.5 * (S + S.T)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise UpdateSkipped("singular", "innovation covariance is not positive definite")
    z = np.linalg.solve(L, r)
    nis = float(z @ z)
    if gate is not None and nis > gate:
        raise UpdateSkipped("gated", f"NIS {nis:.2f} > {gate:.2f}")
    # K = P H^T S^-1 via the Cholesky factor.
    K = np.linalg.solve(L.T, np.linalg.solve(L, H @ P)).T
    dx = K @ r
    IKH = np.eye(ERROR_DIM) - K @ H
    if joseph:
        P_new = IKH @ P @ IKH.T + K @ R_meas @ K.T
    else:
        P_new = IKH @ P
    P_new = 0.5 * (P_new + P_new.T)
    return inject_error(x_hat, dx), P_new, nis

