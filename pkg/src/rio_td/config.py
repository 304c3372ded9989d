"""Run configuration shared by the simulator, the filter and the CLI."""

from dataclasses import dataclass, fields, replace
from typing import Optional, Tuple

import numpy as np

from .ego_velocity import RansacConfig
from .so3 import quat_to_rot
from .state import NoiseParams, initial_covariance
from .update import Extrinsics

Vec3 = Tuple[float, float, float]
Vec4 = Tuple[float, float, float, float]


@dataclass(frozen=True)
class RunConfig:
    # simulation
    duration: float = 60.0
    imu_rate: float = 200.0
    radar_rate: float = 10.0
    injected_t_d: float = -0.15
    trajectory: str = "figure8"
    traj_amplitude: float = 5.0
    traj_frequency: float = 0.05
    traj_rot_amplitude: float = 0.3
    traj_rot_frequency: float = 0.3
    radar_doppler_sigma: float = 0.03
    outlier_ratio: float = 0.1
    landmarks_per_scan: int = 50
    fov_azimuth_deg: float = 60.0
    fov_elevation_deg: float = 15.0
    range_min: float = 1.0
    range_max: float = 30.0
    sim_bias_g: Vec3 = (0.0, 0.0, 0.0)
    sim_bias_a: Vec3 = (0.0, 0.0, 0.0)
    seed: int = 0
    # noise model (simulator and filter)
    sigma_g: float = 1e-3
    sigma_wg: float = 1e-5
    sigma_a: float = 1e-2
    sigma_wa: float = 1e-4
    sigma_td: float = 3e-3
    gravity: Vec3 = (0.0, 0.0, -9.81)
    # extrinsics
    extrinsic_q_RI: Vec4 = (1.0, 0.0, 0.0, 0.0)
    extrinsic_p_IR: Vec3 = (0.1, 0.0, 0.05)
    # ego-velocity
    ransac_iterations: int = 100
    ransac_inlier_threshold: float = 0.1
    ransac_min_inlier_ratio: float = 0.3
    ransac_min_points: int = 8
    ransac_max_condition: float = 1e3
    min_range: float = 0.25
    stationary_ratio: float = 0.8
    # filter
    t_d_init: float = 0.0
    fixed_td: Optional[float] = None
    p0_att: float = 1e-2
    p0_bg: float = 1e-4
    p0_vel: float = 1e-2
    p0_ba: float = 1e-4
    p0_pos: float = 0.0
    p0_td: float = 0.05**2
    meas_noise_mode: str = "lsq"
    meas_noise_sigma: float = 0.05
    covariance_update: str = "joseph"
    chi2_gate: bool = False
    td_freeze_stationary: bool = True
    buffer_horizon: float = 2.0
    stale_tolerance: float = 0.01
    propagation_lag: float = 0.5
    # Monte-Carlo
    workers: int = 1

    def __post_init__(self):
        if self.imu_rate < 10 * self.radar_rate:
            raise ValueError("imu_rate must be at least 10x radar_rate")
        if not 0.0 <= self.outlier_ratio <= 0.5:
            raise ValueError("outlier_ratio must lie in [0, 0.5]")
        if self.trajectory not in ("figure8", "sinusoid", "circle"):
            raise ValueError(f"unknown trajectory {self.trajectory!r}")
        if self.meas_noise_mode not in ("lsq", "fixed"):
            raise ValueError("meas_noise_mode must be 'lsq' or 'fixed'")
        if self.covariance_update not in ("joseph", "standard"):
            raise ValueError("covariance_update must be 'joseph' or 'standard'")
        if self.duration <= 0 or self.imu_rate <= 0 or self.radar_rate <= 0:
            raise ValueError("duration and rates must be positive")
        if self.buffer_horizon < abs(self.t_d_init) + 1.0:
            raise ValueError("buffer_horizon must exceed |t_d_init| + 1 s")
        g = float(np.linalg.norm(self.gravity))
        if not 9.7 <= g <= 9.9:
            raise ValueError(f"|gravity| = {g:.3f} outside [9.7, 9.9]")
        self.noise  # validates sigmas

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    @property
    def noise(self) -> NoiseParams:
        return NoiseParams(
            self.sigma_g, self.sigma_wg, self.sigma_a, self.sigma_wa,
            0.0 if self.fixed_td is not None else self.sigma_td,
            tuple(self.gravity),
        )

    @property
    def extrinsics(self) -> Extrinsics:
        q = np.asarray(self.extrinsic_q_RI, dtype=float)
        return Extrinsics(quat_to_rot(q / np.linalg.norm(q)), np.asarray(self.extrinsic_p_IR))

    @property
    def ransac(self) -> RansacConfig:
        return RansacConfig(
            iterations=self.ransac_iterations,
            inlier_threshold=self.ransac_inlier_threshold,
            min_inlier_ratio=self.ransac_min_inlier_ratio,
            min_points=self.ransac_min_points,
            min_range=self.min_range,
            max_condition=self.ransac_max_condition,
            stationary_ratio=self.stationary_ratio,
        )

    def initial_covariance(self) -> np.ndarray:
        td = 0.0 if self.fixed_td is not None else self.p0_td
        return initial_covariance(self.p0_att, self.p0_bg, self.p0_vel, self.p0_ba, self.p0_pos, td)

    @property
    def initial_td(self) -> float:
        return self.t_d_init if self.fixed_td is None else self.fixed_td


FIELD_HELP = {
    "duration": "simulated duration [s]",
    "imu_rate": "IMU rate [Hz]",
    "radar_rate": "radar scan rate [Hz]",
    "injected_t_d": "true time offset applied to radar stamps [s]",
    "trajectory": "figure8 | sinusoid | circle",
    "traj_amplitude": "position amplitude / circle radius [m]",
    "traj_frequency": "position frequency [Hz]",
    "traj_rot_amplitude": "roll/pitch amplitude [rad] (yaw uses twice this)",
    "traj_rot_frequency": "attitude oscillation frequency [Hz]",
    "radar_doppler_sigma": "Doppler noise std [m/s]",
    "outlier_ratio": "fraction of moving-target points per scan",
    "landmarks_per_scan": "points per radar scan",
    "fov_azimuth_deg": "half-width of the radar azimuth field of view [deg]",
    "fov_elevation_deg": "half-width of the radar elevation field of view [deg]",
    "range_min": "minimum simulated point range [m]",
    "range_max": "maximum simulated point range [m]",
    "sim_bias_g": "true initial gyro bias [rad/s]",
    "sim_bias_a": "true initial accelerometer bias [m/s^2]",
    "seed": "master random seed",
    "sigma_g": "gyro white noise [rad/s/sqrt(Hz)]",
    "sigma_wg": "gyro bias random walk [rad/s^2/sqrt(Hz)]",
    "sigma_a": "accelerometer white noise [m/s^2/sqrt(Hz)]",
    "sigma_wa": "accelerometer bias random walk [m/s^3/sqrt(Hz)]",
    "sigma_td": "time-offset random walk [s/sqrt(s)]",
    "gravity": "gravity in the global frame [m/s^2]",
    "extrinsic_q_RI": "IMU-to-radar rotation quaternion (w,x,y,z)",
    "extrinsic_p_IR": "radar position in the IMU frame [m]",
    "ransac_iterations": "RANSAC minimal-sample iterations",
    "ransac_inlier_threshold": "Doppler inlier threshold [m/s]",
    "ransac_min_inlier_ratio": "minimum consensus fraction",
    "ransac_min_points": "minimum usable points per scan",
    "ransac_max_condition": "direction-matrix condition limit",
    "min_range": "points closer than this are discarded [m]",
    "stationary_ratio": "zero-Doppler fraction that declares standstill",
    "t_d_init": "initial time-offset estimate [s]",
    "fixed_td": "freeze the time offset at this value (none = estimate online)",
    "p0_att": "initial attitude variance [rad^2]",
    "p0_bg": "initial gyro-bias variance [(rad/s)^2]",
    "p0_vel": "initial velocity variance [(m/s)^2]",
    "p0_ba": "initial accel-bias variance [(m/s^2)^2]",
    "p0_pos": "initial position variance [m^2]",
    "p0_td": "initial time-offset variance [s^2]",
    "meas_noise_mode": "lsq (RANSAC-LSQ covariance) | fixed (meas_noise_sigma^2 I)",
    "meas_noise_sigma": "fixed ego-velocity noise std [m/s]",
    "covariance_update": "joseph | standard",
    "chi2_gate": "reject updates above the 3-dof 0.997 chi-square quantile",
    "td_freeze_stationary": "zero the time-offset Jacobian on stationary scans",
    "buffer_horizon": "sensor buffer retention [s]",
    "stale_tolerance": "late scans within this are applied at filter time [s]",
    "propagation_lag": "replay keeps the filter this far behind the newest IMU [s]",
    "workers": "parallel Monte-Carlo worker processes",
}

assert set(FIELD_HELP) == {f.name for f in fields(RunConfig)}
