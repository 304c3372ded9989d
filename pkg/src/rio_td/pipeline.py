"""End-to-end runs: dataset replay through the filter, evaluation, Monte-Carlo."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .ego_velocity import RadarScan
from .estimator import RadarInertialFilter
from .evaluation import EmptyMetricError, ape_rmse, origin_align, rpe_rmse
from .propagation import ImuSample
from .simulator import Trajectory, simulate
from .so3 import quat_normalize
from .state import NominalState
from .temporal import SensorBuffer, step

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    trajectory: Trajectory
    filter: RadarInertialFilter

    @property
    def updates(self):
        return self.filter.updates

    # Reported at the last applied update, matching the estimate log.
    @property
    def td_final(self) -> float:
        return self.updates[-1].t_d if self.updates else self.filter.t_d

    @property
    def td_sigma(self) -> float:
        return self.updates[-1].t_d_sigma if self.updates else self.filter.t_d_sigma


def initial_state_from_truth(truth: Trajectory | None, t0: float, t_d: float) -> NominalState:
    """Filter start state: truth pose/velocity interpolated at ``t0``, zero biases."""
    if truth is None:
        log.warning("no ground truth; starting at the origin, at rest, level")
        return NominalState(t_d=t_d, stamp=t0)
    k = int(np.clip(np.searchsorted(truth.stamps, t0), 0, len(truth) - 1))
    if k > 0 and truth.stamps[k] != t0:
        a = (t0 - truth.stamps[k - 1]) / (truth.stamps[k] - truth.stamps[k - 1])
        q0, q1 = truth.q[k - 1], truth.q[k]
        if np.dot(q0, q1) < 0:
            q1 = -q1
        q = quat_normalize((1 - a) * q0 + a * q1)
        p = (1 - a) * truth.p[k - 1] + a * truth.p[k]
        v = None if truth.v is None else (1 - a) * truth.v[k - 1] + a * truth.v[k]
    else:
        q, p = truth.q[k], truth.p[k]
        v = None if truth.v is None else truth.v[k]
    return NominalState(q, np.zeros(3), np.zeros(3) if v is None else v, np.zeros(3), p, t_d, t0)


def make_filter(cfg: RunConfig, imu: list[ImuSample], truth: Trajectory | None, seed=None) -> RadarInertialFilter:
    x0 = initial_state_from_truth(truth, imu[0].stamp, cfg.initial_td)
    return RadarInertialFilter(x0, cfg, rng=np.random.default_rng(seed))


def replay(filt: RadarInertialFilter, imu: list[ImuSample], radar: list[RadarScan]) -> None:
    """Feed both streams in arrival order, as a live system would see them."""
    cfg = filt.cfg
    buf = SensorBuffer(cfg.buffer_horizon)
    k = 0
    for scan in radar:
        while k < len(imu) and imu[k].stamp <= scan.stamp:
            buf.push_imu(imu[k])
            k += 1
        buf.push_radar(scan)
        if len(buf):
            step(buf, filt, until=buf.newest_imu - cfg.propagation_lag)
    while k < len(imu):
        buf.push_imu(imu[k])
        k += 1
    step(buf, filt)
    while buf.pending_radar():
        scan = buf.pop_radar()
        filt.skip(scan.stamp, "no IMU coverage at correction time")


def run_filter(cfg: RunConfig, imu, radar, truth=None, seed=None) -> RunResult:
    filt = make_filter(cfg, imu, truth, seed)
    replay(filt, imu, radar)
    return RunResult(poses_to_trajectory(filt.poses), filt)


def poses_to_trajectory(poses) -> Trajectory:
    """One row per distinct update time; a later update at the same stamp wins."""
    rows: dict[float, np.ndarray] = {}
    for t, x in poses:
        rows[t] = x
    ts = np.array(sorted(rows))
    xs = np.array([rows[t] for t in ts]).reshape(-1, 17)
    return Trajectory(ts, xs[:, 0:4], xs[:, 13:16], xs[:, 7:10])


def evaluate(est: Trajectory, truth: Trajectory, interval_m: float = 10.0) -> dict:
    """APE/RPE after origin alignment; RPE is NaN if the path is too short."""
    aligned = origin_align(est, truth)
    ape = ape_rmse(aligned, truth)
    try:
        rpe = rpe_rmse(aligned, truth, interval_m)
    except EmptyMetricError as exc:
        log.warning("RPE unavailable: %s", exc)
        rpe = {"trans_m": float("nan"), "rot_deg": float("nan")}
    return {
        "ape_trans_m": ape["trans_m"],
        "ape_rot_deg": ape["rot_deg"],
        "rpe_trans_m": rpe["trans_m"],
        "rpe_rot_deg": rpe["rot_deg"],
    }


def trial_seeds(master_seed: int, trials: int) -> list[int]:
    seq = np.random.SeedSequence(master_seed)
    return [int(s.generate_state(1)[0]) for s in seq.spawn(trials)]


def run_trial(cfg: RunConfig, seed: int, name: str = "") -> dict:
    """Simulate with ``seed``, filter, evaluate; returns one metrics row."""
    tcfg = cfg.with_(seed=seed)
    data = simulate(tcfg)
    res = run_filter(tcfg, data.imu, data.radar, data.truth, seed=seed)
    row = {"sequence": name or f"seed_{seed}", **evaluate(res.trajectory, data.truth)}
    row["td_final_s"] = res.td_final
    row["td_sigma_s"] = res.td_sigma
    return row


def _trial_job(args):
    cfg, seed, name = args
    try:
        return run_trial(cfg, seed, name)
    except Exception as exc:  # recorded, aggregated over successes
        log.error("trial %s failed: %s", name, exc)
        return {"sequence": name, "error": f"{type(exc).__name__}: {exc}"}


def montecarlo(cfg: RunConfig, trials: int, master_seed: int | None = None) -> list[dict]:
    """Independent seeded trials; results are ordered by trial index."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = trial_seeds(cfg.seed if master_seed is None else master_seed, trials)
    jobs = [(cfg, s, f"trial_{k:03d}") for k, s in enumerate(seeds)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            return list(ex.map(_trial_job, jobs))
    return [_trial_job(j) for j in jobs]


def aggregate(rows: list[dict]) -> dict:
    ok = [r for r in rows if "error" not in r]
    keys = ["ape_trans_m", "ape_rot_deg", "rpe_trans_m", "rpe_rot_deg", "td_final_s", "td_sigma_s"]
    out = {"n_success": len(ok), "n_failed": len(rows) - len(ok)}
    for k in keys:
        vals = np.array([r[k] for r in ok], dtype=float)
        vals = vals[~np.isnan(vals)]
        out[f"{k}_mean"] = float(np.mean(vals)) if len(vals) else float("nan")
        out[f"{k}_std"] = float(np.std(vals)) if len(vals) else float("nan")
    return out
