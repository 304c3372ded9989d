"""CSV dataset/result files and the ``key = value`` run configuration."""

from __future__ import annotations

import logging
import typing
from dataclasses import fields
from pathlib import Path

import numpy as np

from .config import FIELD_HELP, RunConfig
from .ego_velocity import RadarScan
from .propagation import ImuSample
from .simulator import Trajectory

log = logging.getLogger(__name__)

IMU_HEADER = "t,wx,wy,wz,ax,ay,az"
RADAR_HEADER = "t,scan_id,px,py,pz,doppler"
TRUTH_HEADER = "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz"
TRUTH_HEADER_NOVEL = "t,px,py,pz,qw,qx,qy,qz"
ESTIMATE_LOG_HEADER = "t,td_hat,td_sigma,r_x,r_y,r_z,n_inliers"
METRICS_HEADER = "sequence,ape_trans_m,ape_rot_deg,rpe_trans_m,rpe_rot_deg,td_final_s,td_sigma_s"


class ParseError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = str(path)
        self.line = line


class ConfigError(ValueError):
    pass


def fmt(x: float) -> str:
    # shortest string that reads back to the same double
    return repr(float(x))


def _metric(x) -> str:
    return "" if x is None or np.isnan(x) else fmt(x)


def _write_rows(path, header: str, rows) -> None:
    with open(path, "w", newline="") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(row) + "\n")


def _read_rows(path, header: str | tuple[str, ...], ncols: int | tuple[int, ...]):
    """Yield ``(line_no, floats)`` for each data row after checking the header."""
    headers = (header,) if isinstance(header, str) else header
    with open(path) as f:
        first = f.readline().strip()
        if first not in headers:
            raise ParseError(path, 1, f"expected header {headers[0]!r}, got {first!r}")
        allowed = (ncols,) if isinstance(ncols, int) else ncols
        for no, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) not in allowed:
                raise ParseError(path, no, f"expected {allowed[0]} fields, got {len(parts)}")
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise ParseError(path, no, str(exc)) from None
            if not all(np.isfinite(vals)):
                raise ParseError(path, no, "non-finite value")
            yield no, vals


def write_imu(path, samples: list[ImuSample]) -> None:
    _write_rows(
        path, IMU_HEADER,
        ([fmt(u.stamp), *map(fmt, u.gyro), *map(fmt, u.accel)] for u in samples),
    )


def read_imu(path) -> list[ImuSample]:
    out: list[ImuSample] = []
    last = -np.inf
    for no, v in _read_rows(path, IMU_HEADER, 7):
        if v[0] <= last:
            raise ParseError(path, no, f"timestamp {v[0]!r} not after {last!r}")
        last = v[0]
        out.append(ImuSample(v[0], np.array(v[1:4]), np.array(v[4:7])))
    return out


def write_radar(path, scans: list[RadarScan]) -> None:
    def rows():
        for sid, s in enumerate(scans):
            for p, d in zip(s.points, s.doppler):
                yield [fmt(s.stamp), str(sid), *map(fmt, p), fmt(d)]

    _write_rows(path, RADAR_HEADER, rows())


def read_radar(path) -> list[RadarScan]:
    scans: list[RadarScan] = []
    cur_id, cur_t, pts, dop = None, None, [], []
    seen: set[int] = set()

    def flush():
        if cur_id is not None:
            scans.append(RadarScan(cur_t, np.array(pts, dtype=float).reshape(-1, 3), np.array(dop)))

    for no, v in _read_rows(path, RADAR_HEADER, 6):
        sid = int(v[1])
        if sid != v[1]:
            raise ParseError(path, no, f"scan_id {v[1]!r} is not an integer")
        if sid != cur_id:
            if sid in seen or (cur_id is not None and sid < cur_id):
                raise ParseError(path, no, f"scan_id {sid} out of order")
            if cur_t is not None and v[0] <= cur_t:
                raise ParseError(path, no, f"scan stamp {v[0]!r} not after {cur_t!r}")
            flush()
            seen.add(sid)
            cur_id, cur_t, pts, dop = sid, v[0], [], []
        elif v[0] != cur_t:
            raise ParseError(path, no, f"stamp changes within scan {sid}")
        pts.append(v[2:5])
        dop.append(v[5])
    flush()
    return scans


def write_trajectory(path, traj: Trajectory) -> None:
    def rows():
        for i in range(len(traj)):
            row = [fmt(traj.stamps[i]), *map(fmt, traj.p[i]), *map(fmt, traj.q[i])]
            if traj.v is not None:
                row += list(map(fmt, traj.v[i]))
            yield row

    _write_rows(path, TRUTH_HEADER if traj.v is not None else TRUTH_HEADER_NOVEL, rows())


def read_truth(path) -> Trajectory:
    """Read a trajectory; quaternions are renormalized (warning above 1e-6 off)."""
    t, p, q, v = [], [], [], []
    last = -np.inf
    for no, row in _read_rows(path, (TRUTH_HEADER, TRUTH_HEADER_NOVEL), (8, 11)):
        if row[0] <= last:
            raise ParseError(path, no, f"timestamp {row[0]!r} not after {last!r}")
        last = row[0]
        qi = np.array(row[4:8])
        n = np.linalg.norm(qi)
        if abs(n - 1.0) > 1e-3:
            raise ParseError(path, no, f"quaternion norm {n:.6f} is not unit")
        if abs(n - 1.0) > 1e-6:
            log.warning("%s:%d: quaternion norm %.9f renormalized", path, no, n)
            qi = qi / n
        t.append(row[0])
        p.append(row[1:4])
        q.append(qi)
        if len(row) == 11:
            v.append(row[8:11])
    if v and len(v) != len(t):
        raise ParseError(path, 1, "velocity columns present on some rows only")
    return Trajectory(
        np.array(t), np.array(q).reshape(-1, 4), np.array(p).reshape(-1, 3),
        np.array(v) if v else None,
    )


def write_estimate_log(path, records) -> None:
    _write_rows(
        path, ESTIMATE_LOG_HEADER,
        ([fmt(r.stamp), fmt(r.t_d), fmt(r.t_d_sigma), *map(fmt, r.residual), str(r.n_inliers)] for r in records),
    )


def read_estimate_log(path) -> np.ndarray:
    return np.array([v for _, v in _read_rows(path, ESTIMATE_LOG_HEADER, 7)]).reshape(-1, 7)


def write_metrics(path, rows: list[dict]) -> None:
    """One row per sequence; unavailable metrics are left empty."""
    cols = METRICS_HEADER.split(",")
    _write_rows(
        path, METRICS_HEADER,
        ([str(r["sequence"])] + [_metric(r[c]) for c in cols[1:]] for r in rows),
    )


# --- configuration -------------------------------------------------------

def _field_types() -> dict[str, object]:
    hints = typing.get_type_hints(RunConfig)
    return {f.name: hints[f.name] for f in fields(RunConfig)}


def _parse_value(key: str, raw: str, tp):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union and type(None) in args:
        if raw.lower() in ("none", "null", ""):
            return None
        tp = next(a for a in args if a is not type(None))
        origin = typing.get_origin(tp)
        args = typing.get_args(tp)
    if origin is tuple:
        parts = [p for p in raw.replace("(", "").replace(")", "").split(",") if p.strip()]
        if len(parts) != len(args):
            raise ConfigError(f"{key}: expected {len(args)} comma-separated numbers, got {raw!r}")
        return tuple(float(p) for p in parts)
    if tp is bool:
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{key}: not a boolean: {raw!r}")
    if tp is int:
        return int(raw)
    if tp is float:
        return float(raw)
    return raw


def parse_config(text: str, source: str = "<config>", base: RunConfig | None = None) -> RunConfig:
    types = _field_types()
    values: dict[str, object] = {}
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}")
        if not raw:
            raise ConfigError(f"{source}:{no}: missing value for {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{no}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, raw, types[key])
        except ValueError as exc:
            raise ConfigError(f"{source}:{no}: cannot parse {key} = {raw!r}: {exc}") from None
    try:
        return (base or RunConfig()).with_(**values)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def read_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(), str(path))


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(fmt(x) for x in v)
    if isinstance(v, float):
        return fmt(v)
    return str(v)


def config_echo(cfg: RunConfig) -> str:
    """Effective configuration in the same format ``read_config`` accepts."""
    lines = ["# effective configuration"]
    for f in fields(cfg):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}  # {FIELD_HELP[f.name]}")
    return "\n".join(lines) + "\n"


def write_config(path, cfg: RunConfig) -> None:
    Path(path).write_text(config_echo(cfg))
