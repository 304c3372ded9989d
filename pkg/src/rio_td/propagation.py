"""IMU propagation: RK4 on the nominal state, first-order covariance propagation."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

from .so3 import omega_matrix, quat_normalize, quat_to_rot, skew
from .state import NominalState


class ImuSample(NamedTuple):
    stamp: float
    gyro: np.ndarray  # rad/s, IMU frame
    accel: np.ndarray  # m/s^2, specific force in the IMU frame


def make_imu(stamp, gyro, accel) -> ImuSample:
    return ImuSample(float(stamp), np.asarray(gyro, dtype=float), np.asarray(accel, dtype=float))


def interpolate_imu(u0: ImuSample, u1: ImuSample, t: float) -> ImuSample:
    """Linear interpolation of raw IMU readings at time ``t``."""
    span = u1.stamp - u0.stamp
    a = 0.0 if span <= 0.0 else (t - u0.stamp) / span
    return ImuSample(
        float(t),
        u0.gyro + a * (u1.gyro - u0.gyro),
        u0.accel + a * (u1.accel - u0.accel),
    )


@njit(cache=True)
def _xdot(x, w_m, a_m, g):
    q = x[0:4]
    w = w_m - x[4:7]
    a = a_m - x[10:13]
    out = np.zeros(17)
    out[0:4] = 0.5 * (omega_matrix(w) @ q)
    out[7:10] = quat_to_rot(q) @ a + g
    out[13:16] = x[7:10]
    return out


@njit(cache=True)
def _lerp_weight(t0, t1, t):
    if t1 > t0:
        return (t - t0) / (t1 - t0)
    return 0.0


@njit(cache=True)
def _rk4(x, w0, a0, t0, w1, a1, t1, t_start, dt, g):
    ta = _lerp_weight(t0, t1, t_start)
    tm = _lerp_weight(t0, t1, t_start + 0.5 * dt)
    tb = _lerp_weight(t0, t1, t_start + dt)
    wa = w0 + ta * (w1 - w0)
    aa = a0 + ta * (a1 - a0)
    wm = w0 + tm * (w1 - w0)
    am = a0 + tm * (a1 - a0)
    wb = w0 + tb * (w1 - w0)
    ab = a0 + tb * (a1 - a0)
    k1 = _xdot(x, wa, aa, g)
    k2 = _xdot(x + 0.5 * dt * k1, wm, am, g)
    k3 = _xdot(x + 0.5 * dt * k2, wm, am, g)
    k4 = _xdot(x + dt * k3, wb, ab, g)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out[0:4] = quat_normalize(out[0:4])
    return out


@njit(cache=True)
def _compute_F(q, b_g, b_a, w_m, a_m):
    F = np.zeros((16, 16))
    R = quat_to_rot(q)
    F[0:3, 0:3] = -skew(w_m - b_g)
    for i in range(3):
        F[i, 3 + i] = -1.0
        F[12 + i, 6 + i] = 1.0
    F[6:9, 0:3] = -(R @ skew(a_m - b_a))
    F[6:9, 9:12] = -R
    return F


@njit(cache=True)
def _compute_G(q):
    G = np.zeros((16, 13))
    R = quat_to_rot(q)
    for i in range(3):
        G[i, i] = -1.0
        G[3 + i, 3 + i] = 1.0
        G[9 + i, 9 + i] = 1.0
    G[6:9, 6:9] = -R
    G[15, 12] = 1.0
    return G


@njit(cache=True)
def propagate_covariance(P, F, G, qc_diag, dt):
    """One covariance step with a second-order transition matrix.

    ``Phi = I + F dt + (F dt)^2 / 2`` and the discrete noise is the
    trapezoidal rule ``(Phi G Qc G^T Phi^T + G Qc G^T) dt / 2``.
    """
    Fdt = F * dt
    Phi = np.eye(16) + Fdt + 0.5 * (Fdt @ Fdt)
    GQG = (G * qc_diag) @ G.T
    Qd = 0.5 * dt * (Phi @ GQG @ Phi.T + GQG)
    Pn = Phi @ P @ Phi.T + Qd
    return 0.5 * (Pn + Pn.T)


@njit(cache=True)
def propagate_interval(x, P, w0, a0, t0, w1, a1, t1, t_start, t_end, g, qc_diag):
    """Advance packed state and covariance from ``t_start`` to ``t_end``.

    The IMU interval ``[t0, t1]`` must bracket the sub-interval. F and G
    are held at their value for the IMU reading interpolated at ``t_start``.
    """
    dt = t_end - t_start
    a = _lerp_weight(t0, t1, t_start)
    w_s = w0 + a * (w1 - w0)
    a_s = a0 + a * (a1 - a0)
    F = _compute_F(x[0:4], x[4:7], x[10:13], w_s, a_s)
    G = _compute_G(x[0:4])
    P_new = propagate_covariance(P, F, G, qc_diag, dt)
    x_new = _rk4(x, w0, a0, t0, w1, a1, t1, t_start, dt, g)
    return x_new, P_new


def continuous_dynamics(x_hat: NominalState, u: ImuSample, gravity) -> np.ndarray:
    """Time derivative of the packed nominal vector (see ``NominalState.to_vector``)."""
    return _xdot(x_hat.to_vector(), u.gyro, u.accel, np.asarray(gravity, dtype=float))


def rk4_step(x_hat: NominalState, u0: ImuSample, u1: ImuSample, dt: float, gravity) -> NominalState:
    """Integrate the nominal state over ``dt`` starting at ``x_hat.stamp``.

    IMU readings are linearly interpolated between ``u0`` and ``u1`` at the
    RK4 stage times.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if x_hat.stamp + dt > u1.stamp + 1e-9 and u1.stamp > u0.stamp:
        raise ValueError("step extends past the bracketing IMU interval")
    x = _rk4(
        x_hat.to_vector(),
        u0.gyro, u0.accel, u0.stamp,
        u1.gyro, u1.accel, u1.stamp,
        x_hat.stamp, dt, np.asarray(gravity, dtype=float),
    )
    return NominalState.from_vector(x, x_hat.stamp + dt)


def compute_F(x_hat: NominalState, u: ImuSample) -> np.ndarray:
    """16x16 error-state dynamics matrix."""
    return _compute_F(x_hat.q_GI, x_hat.b_g, x_hat.b_a, u.gyro, u.accel)


def compute_G(x_hat: NominalState) -> np.ndarray:
    """16x13 noise input matrix, noise ordered (n_g, n_wg, n_a, n_wa, n_d)."""
    return _compute_G(x_hat.q_GI)

