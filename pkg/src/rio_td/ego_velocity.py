"""Radar ego-velocity from a single Doppler scan: 3-point RANSAC + least squares."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

SIGMA_FLOOR = 0.01  # m/s
EIGEN_FLOOR = 1e-6  # (m/s)^2


class EgoVelocityError(RuntimeError):
    """Base class for ego-velocity estimation failures."""


class TooFewPointsError(EgoVelocityError):
    pass


class DegenerateGeometryError(EgoVelocityError):
    pass


class NoConsensusError(EgoVelocityError):
    pass


class RadarScan(NamedTuple):
    stamp: float
    points: np.ndarray  # (N, 3) positions in the radar frame, m
    doppler: np.ndarray  # (N,) radial velocities, m/s


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 100
    inlier_threshold: float = 0.1
    min_inlier_ratio: float = 0.3
    min_points: int = 8
    min_range: float = 0.25
    max_condition: float = 1e3
    stationary_ratio: float = 0.8


@dataclass
class EgoVelocityEstimate:
    v_R: np.ndarray
    inlier_indices: np.ndarray
    meas_cov: np.ndarray
    stationary: bool = False

    @property
    def n_inliers(self) -> int:
        return len(self.inlier_indices)


def doppler_predict(v_R, p) -> float:
    """Doppler of a static point at ``p`` seen from a radar moving at ``v_R``."""
    p = np.asarray(p, dtype=float)
    r = np.linalg.norm(p)
    if r == 0.0:
        raise ValueError("zero-norm point has no line-of-sight direction")
    return float(-np.dot(v_R, p) / r)


@njit(cache=True)
def _cond_from_gram(a00, a01, a02, a11, a12, a22):
    """Condition number of A from the entries of the Gram matrix A^T A."""
    p1 = a01 * a01 + a02 * a02 + a12 * a12
    q = (a00 + a11 + a22) / 3.0
    if p1 == 0.0:
        lo = min(a00, min(a11, a22))
        hi = max(a00, max(a11, a22))
    else:
        b00, b11, b22 = a00 - q, a11 - q, a22 - q
        p = np.sqrt((b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * p1) / 6.0)
        det = (
            b00 * (b11 * b22 - a12 * a12)
            - a01 * (a01 * b22 - a12 * a02)
            + a02 * (a01 * a12 - b11 * a02)
        )
        r = min(max(det / (2.0 * p * p * p), -1.0), 1.0)
        phi = np.arccos(r) / 3.0
        hi = q + 2.0 * p * np.cos(phi)
        lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    if lo <= 0.0:
        return np.inf
    return np.sqrt(hi / lo)


@njit(cache=True)
def _gram_condition(A):
    g = A.T @ A
    return _cond_from_gram(g[0, 0], g[0, 1], g[0, 2], g[1, 1], g[1, 2], g[2, 2])


@njit(cache=True)
def _minimal_solutions(U, dop, idx, max_condition, need):
    """Exact 3-point solutions for the first ``need`` valid rows of ``idx``.

    Rows with repeated indices or ill-conditioned directions are skipped.
    Returns the solutions found so far, shape (<= need, 3).
    """
    out = np.empty((need, 3))
    k = 0
    for r in range(idx.shape[0]):
        if k == need:
            break
        i, j, l = idx[r, 0], idx[r, 1], idx[r, 2]
        if i == j or i == l or j == l:
            continue
        A = np.empty((3, 3))
        A[0] = -U[i]
        A[1] = -U[j]
        A[2] = -U[l]
        if _gram_condition(A) > max_condition:
            continue
        # Cramer's rule on the 3x3 system A v = b.
        c0 = A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1]
        c1 = A[1, 2] * A[2, 0] - A[1, 0] * A[2, 2]
        c2 = A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0]
        det = A[0, 0] * c0 + A[0, 1] * c1 + A[0, 2] * c2
        bi, bj, bl = dop[i], dop[j], dop[l]
        out[k, 0] = (bi * c0 + bj * (A[0, 2] * A[2, 1] - A[0, 1] * A[2, 2]) + bl * (A[0, 1] * A[1, 2] - A[0, 2] * A[1, 1])) / det
        out[k, 1] = (bi * c1 + bj * (A[0, 0] * A[2, 2] - A[0, 2] * A[2, 0]) + bl * (A[0, 2] * A[1, 0] - A[0, 0] * A[1, 2])) / det
        out[k, 2] = (bi * c2 + bj * (A[0, 1] * A[2, 0] - A[0, 0] * A[2, 1]) + bl * (A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])) / det
        k += 1
    return out[:k]


def direction_condition(A: np.ndarray) -> float:
    """Condition number of an (n, 3) direction matrix."""
    return float(_gram_condition(np.ascontiguousarray(A, dtype=np.float64)))


def _directions(points: np.ndarray) -> np.ndarray:
    return points / np.linalg.norm(points, axis=1, keepdims=True)


def _floored_cov(sigma2: float, AtA: np.ndarray) -> np.ndarray:
    cov = sigma2 * np.linalg.inv(AtA)
    cov = 0.5 * (cov + cov.T)
    w, V = np.linalg.eigh(cov)
    return (V * np.maximum(w, EIGEN_FLOOR)) @ V.T


def lsq_solve(points, doppler, max_condition: float = 1e3):
    """Least-squares ego-velocity and its covariance.

    Minimizes ``sum (v_d + u_i . v)^2`` over unit directions ``u_i``. The
    covariance is ``sigma^2 (A^T A)^-1`` with ``sigma^2`` the unbiased
    residual variance, floored at ``SIGMA_FLOOR**2``.

    Raises
    ------
    TooFewPointsError
        Fewer than three points.
    DegenerateGeometryError
        Directions do not span 3D (condition number above ``max_condition``).
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    doppler = np.asarray(doppler, dtype=float).reshape(-1)
    n = len(points)
    if n < 3:
        raise TooFewPointsError(f"need at least 3 points, got {n}")
    A = -_directions(points)
    if direction_condition(A) > max_condition:
        raise DegenerateGeometryError("point directions do not span 3D")
    v, *_ = np.linalg.lstsq(A, doppler, rcond=None)
    res = doppler - A @ v
    sigma2 = float(res @ res) / (n - 3) if n > 3 else 0.0
    sigma2 = max(sigma2, SIGMA_FLOOR**2)
    return v, _floored_cov(sigma2, A.T @ A)


def _sample_minimal(U, doppler, n_samples, rng, max_condition):
    """Draw ``n_samples`` non-degenerate 3-point sets and solve each exactly."""
    n = len(U)
    parts = []
    need = n_samples
    for _ in range(100):
        idx = rng.integers(0, n, size=(2 * need, 3))
        V = _minimal_solutions(U, doppler, idx, max_condition, need)
        parts.append(V)
        need -= len(V)
        if need == 0:
            return np.concatenate(parts)
    raise DegenerateGeometryError("could not draw a non-degenerate 3-point sample")


def ransac_estimate(scan: RadarScan, cfg: RansacConfig = RansacConfig(), rng=None) -> EgoVelocityEstimate:
    """Robust ego-velocity of one scan.

    Points closer than ``cfg.min_range`` are discarded first. When most
    Doppler readings are near zero the platform is reported stationary.
    Returned ``inlier_indices`` refer to the original scan rows.
    """
    rng = np.random.default_rng() if rng is None else rng
    points = np.asarray(scan.points, dtype=float).reshape(-1, 3)
    doppler = np.asarray(scan.doppler, dtype=float).reshape(-1)
    keep = np.flatnonzero(np.linalg.norm(points, axis=1) > cfg.min_range)
    n = len(keep)
    if n < max(3, cfg.min_points):
        raise TooFewPointsError(f"{n} usable points, need {max(3, cfg.min_points)}")
    pts, dop = points[keep], doppler[keep]
    U = _directions(pts)
    thr = cfg.inlier_threshold

    still = np.abs(dop) < thr
    if still.sum() >= cfg.stationary_ratio * n:
        A = -U[still]
        if len(A) >= 3 and direction_condition(A) <= cfg.max_condition:
            return EgoVelocityEstimate(
                np.zeros(3), keep[still], _floored_cov(SIGMA_FLOOR**2, A.T @ A), stationary=True
            )

    V = _sample_minimal(U, dop, cfg.iterations, rng, cfg.max_condition)
    # (n, iterations) residual table; ties go to the earliest sample.
    res = np.abs(dop[:, None] + U @ V.T)
    counts = (res < thr).sum(axis=0)
    inliers = res[:, int(np.argmax(counts))] < thr
    if inliers.sum() < max(3, cfg.min_inlier_ratio * n):
        raise NoConsensusError(f"best consensus {inliers.sum()}/{n} below minimum ratio")

    for _ in range(10):
        v, cov = lsq_solve(pts[inliers], dop[inliers], cfg.max_condition)
        refined = np.abs(dop + U @ v) < thr
        if np.array_equal(refined, inliers):
            break
        if refined.sum() < max(3, cfg.min_inlier_ratio * n):
            break
        inliers = refined
    # The reported set always satisfies the threshold against the reported v.
    inliers = inliers & (np.abs(dop + U @ v) < thr)
    if inliers.sum() < 3:
        raise NoConsensusError("consensus collapsed during refinement")
    return EgoVelocityEstimate(v, keep[inliers], cov)
