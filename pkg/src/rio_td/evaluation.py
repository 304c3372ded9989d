"""Trajectory accuracy: origin alignment, APE/RPE RMSE and motion intensity."""

from __future__ import annotations

import numpy as np

from .propagation import ImuSample
from .simulator import Trajectory
from .so3 import quats_multiply, quats_to_rots, rot_to_quat


class AssociationError(ValueError):
    pass


class EmptyMetricError(ValueError):
    pass


def associate(est: Trajectory, ref: Trajectory, tol: float = 0.01) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-stamp matching; returns index arrays into ``est`` and ``ref``."""
    if len(est) == 0 or len(ref) == 0:
        raise AssociationError("empty trajectory")
    j = np.clip(np.searchsorted(ref.stamps, est.stamps), 1, len(ref) - 1) if len(ref) > 1 else np.zeros(len(est), int)
    if len(ref) > 1:
        left = j - 1
        pick_left = np.abs(est.stamps - ref.stamps[left]) <= np.abs(ref.stamps[j] - est.stamps)
        j = np.where(pick_left, left, j)
    ok = np.abs(ref.stamps[j] - est.stamps) <= tol
    i = np.flatnonzero(ok)
    if len(i) == 0:
        raise AssociationError("no timestamps overlap within tolerance")
    return i, j[ok]


def origin_align(est: Trajectory, ref: Trajectory, tol: float = 0.01) -> Trajectory:
    """Rigidly move ``est`` so its first associated pose equals the reference's."""
    i, j = associate(est, ref, tol)
    if np.array_equal(est.q[i[0]], ref.q[j[0]]) and np.array_equal(est.p[i[0]], ref.p[j[0]]):
        # exact identity; the general path would add rounding noise
        return Trajectory(est.stamps.copy(), est.q.copy(), est.p.copy(), None if est.v is None else est.v.copy())
    R_e = quats_to_rots(est.q[i[:1]])[0]
    R_r = quats_to_rots(ref.q[j[:1]])[0]
    R_a = R_r @ R_e.T
    t_a = ref.p[j[0]] - R_a @ est.p[i[0]]
    q_a = rot_to_quat(R_a)
    q = quats_multiply(q_a[None, :], est.q)
    q[i[0]] = ref.q[j[0]]
    p = est.p @ R_a.T + t_a
    p[i[0]] = ref.p[j[0]]
    v = None if est.v is None else est.v @ R_a.T
    return Trajectory(est.stamps.copy(), q, p, v)


def _conj(q: np.ndarray) -> np.ndarray:
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def _rot_angles(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Geodesic angle between paired unit quaternions.

    Same value as ``acos((trace(R1^T R2) - 1) / 2)``, computed from the chord
    ``|q1 - q2| = 2 sin(angle / 4)`` so it is exact at zero, where the trace
    form loses half the significant digits.
    """
    s = np.where(np.sum(q1 * q2, axis=1) < 0.0, -1.0, 1.0)[:, None]
    chord = np.linalg.norm(q1 - s * q2, axis=1)
    return 4.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))


def ape_rmse(est: Trajectory, ref: Trajectory, tol: float = 0.01) -> dict:
    """Absolute pose error RMSE: translation [m] and geodesic rotation [deg]."""
    i, j = associate(est, ref, tol)
    dp = est.p[i] - ref.p[j]
    ang = _rot_angles(ref.q[j], est.q[i])
    return {
        "trans_m": float(np.sqrt(np.mean(np.sum(dp**2, axis=1)))),
        "rot_deg": float(np.rad2deg(np.sqrt(np.mean(ang**2)))),
    }


def _pairs_by_distance(p: np.ndarray, interval: float) -> list[tuple[int, int]]:
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(p, axis=0), axis=1))])
    pairs = []
    i = 0
    while True:
        j = int(np.searchsorted(arc, arc[i] + interval, side="left"))
        if j >= len(arc):
            break
        pairs.append((i, j))
        i = j
    return pairs


def rpe_rmse(est: Trajectory, ref: Trajectory, interval_m: float = 10.0, tol: float = 0.01) -> dict:
    """Relative pose error over disjoint stretches of ``interval_m`` reference path.

    Raises
    ------
    EmptyMetricError
        The associated reference path is shorter than one interval.
    """
    i, j = associate(est, ref, tol)
    pr, qr = ref.p[j], ref.q[j]
    pe, qe = est.p[i], est.q[i]
    pairs = _pairs_by_distance(pr, interval_m)
    if not pairs:
        raise EmptyMetricError(f"reference path shorter than {interval_m} m")
    a = np.array([k for k, _ in pairs])
    b = np.array([k for _, k in pairs])
    Rr, Re = quats_to_rots(qr), quats_to_rots(qe)
    # relative motions T_a^-1 T_b
    dR_r = np.einsum("nji,njk->nik", Rr[a], Rr[b])
    dt_r = np.einsum("nji,nj->ni", Rr[a], pr[b] - pr[a])
    dt_e = np.einsum("nji,nj->ni", Re[a], pe[b] - pe[a])
    # E = (T_ref)^-1 T_est
    E_t = np.einsum("nji,nj->ni", dR_r, dt_e - dt_r)
    dq_r = quats_multiply(_conj(qr[a]), qr[b])
    dq_e = quats_multiply(_conj(qe[a]), qe[b])
    E_ang = _rot_angles(dq_r, dq_e)
    return {
        "trans_m": float(np.sqrt(np.mean(np.sum(E_t**2, axis=1)))),
        "rot_deg": float(np.rad2deg(np.sqrt(np.mean(E_ang**2)))),
        "n_pairs": len(pairs),
    }


def delta_omega(imu: list[ImuSample], t: float, window: float = 0.11) -> float:
    """Norm of the mean gyro reading over ``[t - window, t]`` [rad/s]."""
    stamps = np.array([u.stamp for u in imu])
    if len(stamps) == 0 or stamps[0] > t - window or stamps[-1] < t:
        raise ValueError(f"IMU data does not cover [{t - window}, {t}]")
    sel = (stamps >= t - window) & (stamps <= t)
    if sel.sum() < 2:
        raise ValueError("fewer than two IMU samples in the window")
    g = np.array([imu[k].gyro for k in np.flatnonzero(sel)])
    return float(np.linalg.norm(g.mean(axis=0)))
