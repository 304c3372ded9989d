"""Synthetic ground truth, IMU and Doppler-radar streams with a known time offset."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .ego_velocity import RadarScan
from .propagation import ImuSample
from .so3 import quats_multiply, quats_to_rots


@dataclass
class Trajectory:
    """Pose sequence; ``v`` may be ``None`` when velocities are unknown."""

    stamps: np.ndarray  # (N,)
    q: np.ndarray  # (N, 4) q_GI
    p: np.ndarray  # (N, 3)
    v: np.ndarray | None = None  # (N, 3)

    def __post_init__(self):
        self.stamps = np.asarray(self.stamps, dtype=float).reshape(-1)
        self.q = np.asarray(self.q, dtype=float).reshape(-1, 4)
        self.p = np.asarray(self.p, dtype=float).reshape(-1, 3)
        if self.v is not None:
            self.v = np.asarray(self.v, dtype=float).reshape(-1, 3)
        if not (len(self.q) == len(self.p) == len(self.stamps)):
            raise ValueError("trajectory arrays have different lengths")
        if np.any(np.diff(self.stamps) <= 0):
            raise ValueError("trajectory stamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.stamps)

    def subset(self, idx) -> "Trajectory":
        return Trajectory(self.stamps[idx], self.q[idx], self.p[idx], None if self.v is None else self.v[idx])


@dataclass
class Kinematics:
    """Closed-form truth at a set of times (global frame unless noted)."""

    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    q: np.ndarray
    omega: np.ndarray  # body-frame angular rate


def _axis_quats(axis: int, angle: np.ndarray) -> np.ndarray:
    q = np.zeros((len(angle), 4))
    q[:, 0] = np.cos(0.5 * angle)
    q[:, 1 + axis] = np.sin(0.5 * angle)
    return q


def _sines(t, amp, w, phase=0.0):
    """Value, first and second derivative of ``amp * sin(w t + phase)``."""
    s, c = np.sin(w * t + phase), np.cos(w * t + phase)
    return amp * s, amp * w * c, -amp * w * w * s


class TruthModel:
    """Analytic trajectory; evaluate it at any time with :meth:`at`."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg

    def _position(self, t):
        A = self.cfg.traj_amplitude
        w = 2.0 * np.pi * self.cfg.traj_frequency
        kind = self.cfg.trajectory
        if kind == "circle":
            s, c = np.sin(w * t), np.cos(w * t)
            p = np.stack([A * c, A * s, 0 * t], axis=1)
            v = np.stack([-A * w * s, A * w * c, 0 * t], axis=1)
            a = np.stack([-A * w * w * c, -A * w * w * s, 0 * t], axis=1)
            return p, v, a
        if kind == "figure8":
            axes = [_sines(t, A, w), _sines(t, 0.5 * A, 2.0 * w), _sines(t, 0.1 * A, 1.5 * w)]
        else:  # sinusoid
            axes = [_sines(t, A, w), _sines(t, 0.5 * A, 1.3 * w, 0.4), _sines(t, 0.1 * A, 0.7 * w)]
        return tuple(np.stack([ax[k] for ax in axes], axis=1) for k in range(3))

    def _euler(self, t):
        """Roll, pitch, yaw and their rates."""
        if self.cfg.trajectory == "circle":
            w = 2.0 * np.pi * self.cfg.traj_frequency
            zero = np.zeros_like(t)
            return (zero, zero, w * t + 0.5 * np.pi), (zero, zero, np.full_like(t, w))
        a = self.cfg.traj_rot_amplitude
        w = 2.0 * np.pi * self.cfg.traj_rot_frequency
        roll, droll, _ = _sines(t, a, w)
        pitch, dpitch, _ = _sines(t, a, 0.7 * w, 0.5)
        yaw, dyaw, _ = _sines(t, 2.0 * a, 0.3 * w)
        return (roll, pitch, yaw), (droll, dpitch, dyaw)

    def at(self, t) -> Kinematics:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        p, v, a = self._position(t)
        (r, pt, y), (dr, dp, dy) = self._euler(t)
        q = quats_multiply(quats_multiply(_axis_quats(2, y), _axis_quats(1, pt)), _axis_quats(0, r))
        # ZYX Euler rates to body rates.
        sr, cr = np.sin(r), np.cos(r)
        sp, cp = np.sin(pt), np.cos(pt)
        omega = np.stack(
            [dr - dy * sp, dp * cr + dy * cp * sr, -dp * sr + dy * cp * cr], axis=1
        )
        return Kinematics(t, p, v, a, q, omega)


def generate_truth(cfg: RunConfig, rate: float | None = None) -> tuple[Trajectory, TruthModel]:
    """Ground truth sampled at ``rate`` (default: the IMU rate) plus the analytic model."""
    model = TruthModel(cfg)
    rate = cfg.imu_rate if rate is None else rate
    n = int(round(cfg.duration * rate))
    k = model.at(np.arange(n) / rate)
    return Trajectory(k.t, k.q, k.p, k.v), model


def _bias_walk(rng, b0, sigma_w, dt, n):
    steps = rng.standard_normal((n, 3)) * (sigma_w * np.sqrt(dt))
    steps[0] = 0.0
    return np.asarray(b0, dtype=float) + np.cumsum(steps, axis=0)


def synth_imu(model: TruthModel, cfg: RunConfig, rng) -> tuple[list[ImuSample], np.ndarray]:
    """IMU samples on the true clock, plus the true gyro bias per sample."""
    n = int(round(cfg.duration * cfg.imu_rate))
    dt = 1.0 / cfg.imu_rate
    k = model.at(np.arange(n) * dt)
    g = np.asarray(cfg.gravity, dtype=float)
    R = quats_to_rots(k.q)
    b_g = _bias_walk(rng, cfg.sim_bias_g, cfg.sigma_wg, dt, n)
    b_a = _bias_walk(rng, cfg.sim_bias_a, cfg.sigma_wa, dt, n)
    gyro = k.omega + b_g + rng.standard_normal((n, 3)) * (cfg.sigma_g * np.sqrt(cfg.imu_rate))
    accel = (
        np.einsum("nji,nj->ni", R, k.a - g)
        + b_a
        + rng.standard_normal((n, 3)) * (cfg.sigma_a * np.sqrt(cfg.imu_rate))
    )
    samples = [ImuSample(float(k.t[i]), gyro[i], accel[i]) for i in range(n)]
    return samples, b_g


def true_ego_velocity(model: TruthModel, cfg: RunConfig, t) -> np.ndarray:
    """Radar-frame ego-velocity at true epochs ``t``, shape (N, 3)."""
    k = model.at(t)
    ext = cfg.extrinsics
    R = quats_to_rots(k.q)
    v_I = np.einsum("nji,nj->ni", R, k.v) + np.cross(k.omega, ext.p_IR)
    return v_I @ ext.R_RI.T


def synth_radar(model: TruthModel, cfg: RunConfig, rng) -> list[RadarScan]:
    """Doppler scans stamped on the radar clock (``t_true - injected_t_d``)."""
    n_scans = int(round(cfg.duration * cfg.radar_rate))
    t_true = np.arange(n_scans) / cfg.radar_rate
    v_R = true_ego_velocity(model, cfg, t_true)
    m = cfg.landmarks_per_scan
    n_out = int(round(cfg.outlier_ratio * m))
    az_max = np.deg2rad(cfg.fov_azimuth_deg)
    el_max = np.deg2rad(cfg.fov_elevation_deg)
    scans = []
    for j in range(n_scans):
        az = rng.uniform(-az_max, az_max, m)
        el = rng.uniform(-el_max, el_max, m)
        rng_m = rng.uniform(cfg.range_min, cfg.range_max, m)
        u = np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1)
        doppler = -u @ v_R[j] + rng.normal(0.0, cfg.radar_doppler_sigma, m)
        if n_out:
            idx = rng.choice(m, n_out, replace=False)
            doppler[idx] += rng.choice([-1.0, 1.0], n_out) * rng.uniform(1.0, 3.0, n_out)
        stamp = float(t_true[j] - cfg.injected_t_d)
        scans.append(RadarScan(stamp, u * rng_m[:, None], doppler))
    return scans


@dataclass
class SimulatedData:
    imu: list[ImuSample]
    radar: list[RadarScan]
    truth: Trajectory
    model: TruthModel
    gyro_bias: np.ndarray


def simulate(cfg: RunConfig) -> SimulatedData:
    """Generate one full dataset; identical configs give identical data."""
    seq = np.random.SeedSequence(cfg.seed)
    imu_rng, radar_rng = (np.random.default_rng(s) for s in seq.spawn(2))
    truth, model = generate_truth(cfg)
    imu, b_g = synth_imu(model, cfg, imu_rng)
    radar = synth_radar(model, cfg, radar_rng)
    return SimulatedData(imu, radar, truth, model, b_g)
