"""Sensor buffering and the propagate/update schedule on the IMU time stream.

A radar scan stamped ``t`` is applied at ``t' = t + t_d_hat``. The filter
is propagated up to ``t'`` (possibly ending inside an IMU interval), the
scan is fused, and propagation resumes from there.
"""

from __future__ import annotations

import threading
from bisect import bisect_right
from dataclasses import dataclass, field

from .ego_velocity import RadarScan
from .estimator import RadarInertialFilter
from .propagation import ImuSample, interpolate_imu


def correction_time(scan_stamp: float, t_d_hat: float) -> float:
    return scan_stamp + t_d_hat


@dataclass
class Event:
    kind: str  # "propagate" | "update" | "skip"
    t0: float
    t1: float = float("nan")
    scan_stamp: float = float("nan")
    reason: str = ""


class SensorBuffer:
    """Time-ordered IMU and radar queues shared between an ingest and a filter thread."""

    def __init__(self, horizon: float = 2.0):
        self.horizon = horizon
        self._imu: list[ImuSample] = []
        self._imu_t: list[float] = []
        self._radar: list[RadarScan] = []
        self._lock = threading.RLock()

    def push_imu(self, u: ImuSample) -> None:
        with self._lock:
            if self._imu_t and u.stamp <= self._imu_t[-1]:
                raise ValueError(f"IMU stamp {u.stamp} not after {self._imu_t[-1]}")
            self._imu.append(u)
            self._imu_t.append(u.stamp)

    def push_radar(self, scan: RadarScan) -> None:
        with self._lock:
            if self._radar and scan.stamp <= self._radar[-1].stamp:
                raise ValueError(f"radar stamp {scan.stamp} not after {self._radar[-1].stamp}")
            self._radar.append(scan)

    @property
    def newest_imu(self) -> float:
        with self._lock:
            return self._imu_t[-1] if self._imu_t else float("-inf")

    def peek_radar(self) -> RadarScan | None:
        with self._lock:
            return self._radar[0] if self._radar else None

    def pop_radar(self) -> RadarScan:
        with self._lock:
            return self._radar.pop(0)

    def pending_radar(self) -> int:
        with self._lock:
            return len(self._radar)

    def imu_at(self, t: float) -> ImuSample:
        """IMU reading interpolated at ``t`` (clamped to the buffered span)."""
        with self._lock:
            i = bisect_right(self._imu_t, t) - 1
            if i < 0:
                return self._imu[0]
            if i >= len(self._imu) - 1:
                return self._imu[-1]
            return interpolate_imu(self._imu[i], self._imu[i + 1], t)

    def bracket(self, t: float) -> int:
        """Index of the last sample with stamp <= t."""
        with self._lock:
            return bisect_right(self._imu_t, t) - 1

    def imu(self, i: int) -> ImuSample:
        with self._lock:
            return self._imu[i]

    def __len__(self) -> int:
        return len(self._imu)

    def evict(self, keep_from: float) -> None:
        """Drop IMU samples older than the horizon, never past ``keep_from``'s bracket."""
        with self._lock:
            cutoff = min(self._imu_t[-1] - self.horizon, keep_from) if self._imu_t else keep_from
            k = bisect_right(self._imu_t, cutoff) - 1
            if k > 0:
                del self._imu[:k]
                del self._imu_t[:k]


def propagate_to(buffer: SensorBuffer, filt: RadarInertialFilter, t: float) -> bool:
    """Propagate ``filt`` to time ``t`` using buffered IMU; False if nothing moved."""
    if t <= filt.stamp:
        return False
    i = buffer.bracket(filt.stamp)
    if i < 0:
        raise ValueError(f"no IMU sample at or before filter time {filt.stamp}")
    n = len(buffer)
    while filt.stamp < t and i + 1 < n:
        u0, u1 = buffer.imu(i), buffer.imu(i + 1)
        t_end = min(u1.stamp, t)
        filt.propagate(u0, u1, t_end)
        if t_end >= u1.stamp:
            i += 1
    return True


def step(buffer: SensorBuffer, filt: RadarInertialFilter, until: float | None = None) -> list[Event]:
    """Drain what the buffer allows and return the event trace.

    Pending scans are handled in arrival order. A scan whose correction
    time is not yet covered by IMU data stays queued. A scan that maps
    before the filter time by at most ``stale_tolerance`` is applied at the
    filter time; older ones are dropped as stale. Afterwards the filter is
    propagated to ``until`` (default: the newest IMU stamp).
    """
    events: list[Event] = []
    tol = filt.cfg.stale_tolerance
    while True:
        scan = buffer.peek_radar()
        if scan is None:
            break
        t_corr = correction_time(scan.stamp, filt.t_d)
        if t_corr > buffer.newest_imu:
            break
        buffer.pop_radar()
        if t_corr < filt.stamp:
            if filt.stamp - t_corr > tol:
                filt.skip(scan.stamp, "stale")
                events.append(Event("skip", filt.stamp, scan_stamp=scan.stamp, reason="stale"))
                continue
        else:
            t0 = filt.stamp
            if propagate_to(buffer, filt, t_corr):
                events.append(Event("propagate", t0, filt.stamp))
        rec = filt.radar_update(scan, buffer.imu_at(t_corr))
        if rec is None:
            events.append(Event("skip", filt.stamp, scan_stamp=scan.stamp, reason=filt.skipped[-1][1]))
        else:
            events.append(Event("update", filt.stamp, scan_stamp=scan.stamp))

    target = buffer.newest_imu if until is None else min(until, buffer.newest_imu)
    t0 = filt.stamp
    if propagate_to(buffer, filt, target):
        events.append(Event("propagate", t0, filt.stamp))
    buffer.evict(filt.stamp)
    return events
