"""Nominal state, error-state layout, noise parameters and error injection."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .so3 import quat_multiply, small_angle_quat

# Error-state layout, shared by F, G, H and the covariance.
ATT = slice(0, 3)
BG = slice(3, 6)
VEL = slice(6, 9)
BA = slice(9, 12)
POS = slice(12, 15)
TD = 15
ERROR_DIM = 16
NOISE_DIM = 13

# Packed nominal vector: q(4) bg(3) v(3) ba(3) p(3) td(1).
NOMINAL_DIM = 17


def _vec3(v) -> np.ndarray:
    return np.array(v, dtype=float).reshape(3)


@dataclass
class NominalState:
    """Full filter state on the IMU time stream."""

    q_GI: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    b_g: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v_GI: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b_a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    p_GI: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t_d: float = 0.0
    stamp: float = 0.0

    def __post_init__(self):
        self.q_GI = np.array(self.q_GI, dtype=float).reshape(4)
        self.q_GI /= np.linalg.norm(self.q_GI)
        self.b_g = _vec3(self.b_g)
        self.v_GI = _vec3(self.v_GI)
        self.b_a = _vec3(self.b_a)
        self.p_GI = _vec3(self.p_GI)
        self.t_d = float(self.t_d)
        self.stamp = float(self.stamp)

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.q_GI, self.b_g, self.v_GI, self.b_a, self.p_GI, [self.t_d]]
        )

    @classmethod
    def from_vector(cls, x: np.ndarray, stamp: float) -> "NominalState":
        return cls(x[0:4], x[4:7], x[7:10], x[10:13], x[13:16], x[16], stamp)

    def copy(self) -> "NominalState":
        return replace(self)


@dataclass(frozen=True)
class NoiseParams:
    """Continuous-time noise densities and gravity.

    sigma_g [rad/s/sqrt(Hz)], sigma_wg [rad/s^2/sqrt(Hz)], sigma_a
    [m/s^2/sqrt(Hz)], sigma_wa [m/s^3/sqrt(Hz)], sigma_td [s/sqrt(s)].
    """

    sigma_g: float = 1e-3
    sigma_wg: float = 1e-5
    sigma_a: float = 1e-2
    sigma_wa: float = 1e-4
    sigma_td: float = 3e-3
    gravity_G: tuple = (0.0, 0.0, -9.81)

    def __post_init__(self):
        for name in ("sigma_g", "sigma_wg", "sigma_a", "sigma_wa", "sigma_td"):
            if not getattr(self, name) >= 0.0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def gravity(self) -> np.ndarray:
        return np.array(self.gravity_G, dtype=float)

    def continuous_cov(self) -> np.ndarray:
        """Diagonal of the 13x13 noise covariance, ordered (n_g, n_wg, n_a, n_wa, n_d)."""
        return np.concatenate(
            [
                np.full(3, self.sigma_g**2),
                np.full(3, self.sigma_wg**2),
                np.full(3, self.sigma_a**2),
                np.full(3, self.sigma_wa**2),
                [self.sigma_td**2],
            ]
        )


def initial_covariance(
    att: float = 1e-2,
    bg: float = 1e-4,
    vel: float = 1e-2,
    ba: float = 1e-4,
    pos: float = 0.0,
    td: float = 0.05**2,
) -> np.ndarray:
    """Diagonal initial covariance from per-block variances."""
    d = np.empty(ERROR_DIM)
    d[ATT] = att
    d[BG] = bg
    d[VEL] = vel
    d[BA] = ba
    d[POS] = pos
    d[TD] = td
    return np.diag(d)


@njit(cache=True)
def inject_vector(x, dx):
    """Apply an error state to a packed nominal vector."""
    out = x.copy()
    out[0:4] = quat_multiply(x[0:4], small_angle_quat(dx[0:3]))
    out[4:17] = x[4:17] + dx[3:16]
    return out


def inject_error(x_hat: NominalState, dx: np.ndarray) -> NominalState:
    """Return ``x_hat ⊞ dx``.

    Vector blocks and the time offset are additive; the attitude is
    composed on the right with the small-angle error quaternion.
    """
    dx = np.asarray(dx, dtype=float).reshape(ERROR_DIM)
    if not np.all(np.isfinite(dx)):
        raise ValueError(f"non-finite error state: {dx}")
    return NominalState.from_vector(inject_vector(x_hat.to_vector(), dx), x_hat.stamp)


def reset_error(P: np.ndarray) -> np.ndarray:
    # Reset Jacobian is taken as identity; only enforce symmetry.
    return 0.5 * (P + P.T)
