"""Quaternion and rotation primitives (Hamilton convention, scalar first).

Quaternions are float64 arrays ``(w, x, y, z)``. ``quat_to_rot(q)`` maps
vectors from the body frame into the reference frame, so for ``q_GI`` the
matrix is ``R_GI``. The attitude error is local: ``q = q_hat ⊗ dq(theta)``.

All functions are compiled with numba and expect contiguous float64 arrays.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def quat_normalize(q):
    n = np.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q / n


@njit(cache=True)
def quat_multiply(a, b):
    """Hamilton product ``a ⊗ b``, normalized."""
    aw, ax, ay, az = a[0], a[1], a[2], a[3]
    bw, bx, by, bz = b[0], b[1], b[2], b[3]
    out = np.empty(4)
    out[0] = aw * bw - ax * bx - ay * by - az * bz
    out[1] = aw * bx + ax * bw + ay * bz - az * by
    out[2] = aw * by - ax * bz + ay * bw + az * bx
    out[3] = aw * bz + ax * by - ay * bx + az * bw
    return quat_normalize(out)


@njit(cache=True)
def quat_conjugate(q):
    out = np.empty(4)
    out[0] = q[0]
    out[1] = -q[1]
    out[2] = -q[2]
    out[3] = -q[3]
    return out


@njit(cache=True)
def quat_to_rot(q):
    """Rotation matrix of a unit quaternion."""
    w, x, y, z = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3))
    R[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[0, 1] = 2.0 * (x * y - w * z)
    R[0, 2] = 2.0 * (x * z + w * y)
    R[1, 0] = 2.0 * (x * y + w * z)
    R[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[1, 2] = 2.0 * (y * z - w * x)
    R[2, 0] = 2.0 * (x * z - w * y)
    R[2, 1] = 2.0 * (y * z + w * x)
    R[2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


@njit(cache=True)
def rot_to_quat(R):
    """Inverse of :func:`quat_to_rot`, returning ``w >= 0``."""
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    q = np.empty(4)
    if tr > 0.0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q[0] = 0.25 * s
        q[1] = (R[2, 1] - R[1, 2]) / s
        q[2] = (R[0, 2] - R[2, 0]) / s
        q[3] = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q[0] = (R[2, 1] - R[1, 2]) / s
        q[1] = 0.25 * s
        q[2] = (R[0, 1] + R[1, 0]) / s
        q[3] = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q[0] = (R[0, 2] - R[2, 0]) / s
        q[1] = (R[0, 1] + R[1, 0]) / s
        q[2] = 0.25 * s
        q[3] = (R[1, 2] + R[2, 1]) / s
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q[0] = (R[1, 0] - R[0, 1]) / s
        q[1] = (R[0, 2] + R[2, 0]) / s
        q[2] = (R[1, 2] + R[2, 1]) / s
        q[3] = 0.25 * s
    if q[0] < 0.0:
        q = -q
    return quat_normalize(q)


@njit(cache=True)
def skew(v):
    """Cross-product matrix: ``skew(v) @ w == np.cross(v, w)``."""
    S = np.zeros((3, 3))
    S[0, 1] = -v[2]
    S[0, 2] = v[1]
    S[1, 0] = v[2]
    S[1, 2] = -v[0]
    S[2, 0] = -v[1]
    S[2, 1] = v[0]
    return S


@njit(cache=True)
def omega_matrix(w):
    """4x4 matrix with ``q_dot = 0.5 * omega_matrix(w) @ q`` for body rate ``w``."""
    O = np.zeros((4, 4))
    O[0, 1] = -w[0]
    O[0, 2] = -w[1]
    O[0, 3] = -w[2]
    O[1, 0] = w[0]
    O[2, 0] = w[1]
    O[3, 0] = w[2]
    O[1, 2] = w[2]
    O[1, 3] = -w[1]
    O[2, 1] = -w[2]
    O[2, 3] = w[0]
    O[3, 1] = w[1]
    O[3, 2] = -w[0]
    return O


@njit(cache=True)
def small_angle_quat(theta):
    """Normalized first-order error quaternion ``[1, theta/2]``."""
    q = np.empty(4)
    q[0] = 1.0
    q[1] = 0.5 * theta[0]
    q[2] = 0.5 * theta[1]
    q[3] = 0.5 * theta[2]
    return quat_normalize(q)


@njit(cache=True)
def quat_exp(rotvec):
    """Exact exponential map from a rotation vector (axis * angle)."""
    angle = np.sqrt(rotvec[0] ** 2 + rotvec[1] ** 2 + rotvec[2] ** 2)
    q = np.empty(4)
    if angle < 1e-12:
        q[0] = 1.0
        q[1] = 0.5 * rotvec[0]
        q[2] = 0.5 * rotvec[1]
        q[3] = 0.5 * rotvec[2]
        return quat_normalize(q)
    half = 0.5 * angle
    s = np.sin(half) / angle
    q[0] = np.cos(half)
    q[1] = s * rotvec[0]
    q[2] = s * rotvec[1]
    q[3] = s * rotvec[2]
    return q


def rotation_angle(R):
    """Geodesic angle of a rotation matrix in radians (clamped acos)."""
    c = (np.trace(R) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def quats_to_rots(q):
    """Vectorized :func:`quat_to_rot` for an ``(N, 4)`` array."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((len(q), 3, 3))
    R[:, 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[:, 0, 1] = 2.0 * (x * y - w * z)
    R[:, 0, 2] = 2.0 * (x * z + w * y)
    R[:, 1, 0] = 2.0 * (x * y + w * z)
    R[:, 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[:, 1, 2] = 2.0 * (y * z - w * x)
    R[:, 2, 0] = 2.0 * (x * z - w * y)
    R[:, 2, 1] = 2.0 * (y * z + w * x)
    R[:, 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


def quats_multiply(a, b):
    """Vectorized Hamilton product of ``(N, 4)`` arrays (broadcasting allowed)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    out = np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )
    return out / np.linalg.norm(out, axis=-1, keepdims=True)
