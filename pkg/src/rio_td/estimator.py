"""The radar-inertial ES-EKF with online time-offset estimation."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .ego_velocity import EgoVelocityError, RadarScan, ransac_estimate
from .propagation import ImuSample, propagate_interval
from .state import TD, NominalState
from .update import (
    CHI2_GATE_3DOF,
    UpdateSkipped,
    compute_H,
    compute_residual,
    kalman_update,
    predict_ego_velocity,
)

log = logging.getLogger(__name__)


@dataclass
class UpdateRecord:
    stamp: float  # filter time at which the correction was applied
    scan_stamp: float
    t_d: float
    t_d_sigma: float
    residual: np.ndarray
    n_inliers: int
    nis: float


class RadarInertialFilter:
    """Error-state EKF over (attitude, gyro bias, velocity, accel bias, position, t_d).

    The filter only knows how to advance across one bracketed IMU interval
    and how to apply one radar scan; scheduling lives in
    :mod:`rio_td.temporal`.
    """

    def __init__(self, state: NominalState, cfg: RunConfig, P: np.ndarray | None = None, rng=None):
        self.cfg = cfg
        self.noise = cfg.noise
        self.ext = cfg.extrinsics
        self.ransac_cfg = cfg.ransac
        self._g = self.noise.gravity
        self._qc = self.noise.continuous_cov()
        self._x = state.to_vector()
        self.stamp = state.stamp
        self.P = cfg.initial_covariance() if P is None else np.array(P, dtype=float)
        self.rng = np.random.default_rng() if rng is None else rng
        self.updates: list[UpdateRecord] = []
        self.skipped: list[tuple[float, str]] = []
        self.poses: list[tuple[float, np.ndarray]] = []
        self.n_propagations = 0
        self.estimate_td = cfg.fixed_td is None

    @property
    def state(self) -> NominalState:
        return NominalState.from_vector(self._x, self.stamp)

    @state.setter
    def state(self, x: NominalState) -> None:
        self._x = x.to_vector()
        self.stamp = x.stamp

    @property
    def t_d(self) -> float:
        return float(self._x[16])

    @property
    def t_d_sigma(self) -> float:
        return float(np.sqrt(max(self.P[TD, TD], 0.0)))

    def propagate(self, u0: ImuSample, u1: ImuSample, t_end: float) -> None:
        """Advance from the current stamp to ``t_end`` inside ``[u0.stamp, u1.stamp]``."""
        if t_end <= self.stamp:
            return
        self._x, self.P = propagate_interval(
            self._x, self.P,
            u0.gyro, u0.accel, u0.stamp,
            u1.gyro, u1.accel, u1.stamp,
            self.stamp, t_end, self._g, self._qc,
        )
        self.stamp = t_end
        self.n_propagations += 1

    def skip(self, scan_stamp: float, reason: str) -> None:
        log.info("radar scan %.6f skipped: %s", scan_stamp, reason)
        self.skipped.append((scan_stamp, reason))

    def radar_update(self, scan: RadarScan, u_corr: ImuSample) -> UpdateRecord | None:
        """Correct with one scan; ``u_corr`` is the IMU reading at the correction time.

        Returns ``None`` (and records the reason) if the scan was not used.
        """
        try:
            est = ransac_estimate(scan, self.ransac_cfg, self.rng)
        except EgoVelocityError as exc:
            self.skip(scan.stamp, f"ego-velocity: {exc}")
            return None

        x_hat = self.state
        H = compute_H(x_hat, u_corr, self.ext, self._g)
        if not self.estimate_td:
            H[:, TD] = 0.0
        elif est.stationary and self.cfg.td_freeze_stationary:
            # A zero ego-velocity carries no information on the offset.
            H[:, TD] = 0.0
        r = compute_residual(est.v_R, predict_ego_velocity(x_hat, u_corr, self.ext))
        if self.cfg.meas_noise_mode == "fixed":
            R_meas = self.cfg.meas_noise_sigma**2 * np.eye(3)
        else:
            R_meas = est.meas_cov
        gate = CHI2_GATE_3DOF if self.cfg.chi2_gate else None
        try:
            x_new, self.P, nis = kalman_update(
                x_hat, self.P, r, H, R_meas,
                joseph=self.cfg.covariance_update == "joseph", gate=gate,
            )
        except UpdateSkipped as exc:
            self.skip(scan.stamp, str(exc))
            return None
        self._x = x_new.to_vector()
        rec = UpdateRecord(self.stamp, scan.stamp, self.t_d, self.t_d_sigma, r, est.n_inliers, nis)
        self.updates.append(rec)
        self.poses.append((self.stamp, self._x.copy()))
        return rec
