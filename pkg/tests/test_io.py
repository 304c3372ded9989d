import logging

import numpy as np
import pytest

from rio_td import io
from rio_td.config import RunConfig
from rio_td.ego_velocity import RadarScan
from rio_td.propagation import ImuSample
from rio_td.simulator import Trajectory


def random_imu_list(rng, n):
    t = np.cumsum(rng.uniform(1e-4, 1e-2, n))
    return [ImuSample(float(t[i]), rng.normal(size=3), rng.normal(size=3) * 10) for i in range(n)]


def random_traj(rng, n, with_v=True):
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return Trajectory(np.arange(n) * 0.1, q, rng.normal(size=(n, 3)), rng.normal(size=(n, 3)) if with_v else None)


def test_imu_empty_file(tmp_path):
    f = tmp_path / "imu.csv"
    f.write_text(io.IMU_HEADER + "\n")
    assert io.read_imu(f) == []


def test_imu_roundtrip_bitwise(tmp_path, rng):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    samples = random_imu_list(rng, 1000)
    io.write_imu(a, samples)
    back = io.read_imu(a)
    assert all(
        x.stamp == y.stamp and np.array_equal(x.gyro, y.gyro) and np.array_equal(x.accel, y.accel)
        for x, y in zip(samples, back)
    )
    io.write_imu(b, back)
    assert a.read_bytes() == b.read_bytes()


def test_imu_out_of_order(tmp_path):
    f = tmp_path / "imu.csv"
    f.write_text(io.IMU_HEADER + "\n0.0,0,0,0,0,0,9.8\n0.2,0,0,0,0,0,9.8\n0.1,0,0,0,0,0,9.8\n")
    with pytest.raises(io.ParseError) as exc:
        io.read_imu(f)
    assert exc.value.line == 4
    assert ":4:" in str(exc.value)


def test_imu_malformed_row(tmp_path):
    f = tmp_path / "imu.csv"
    f.write_text(io.IMU_HEADER + "\n0.0,0,0,0,0,0,9.8\n0.1,0,x,0,0,0,9.8\n")
    with pytest.raises(io.ParseError) as exc:
        io.read_imu(f)
    assert exc.value.line == 3
    f.write_text(io.IMU_HEADER + "\n0.0,0,0,0\n")
    with pytest.raises(io.ParseError):
        io.read_imu(f)


def test_radar_single_scan(tmp_path):
    f = tmp_path / "radar.csv"
    f.write_text(io.RADAR_HEADER + "\n1.5,0,1,0,0,-0.5\n1.5,0,0,1,0,0.1\n1.5,0,0,0,1,0.2\n")
    scans = io.read_radar(f)
    assert len(scans) == 1 and scans[0].points.shape == (3, 3)
    assert scans[0].stamp == 1.5 and np.array_equal(scans[0].doppler, [-0.5, 0.1, 0.2])


def test_radar_interleaved_ids(tmp_path):
    f = tmp_path / "radar.csv"
    f.write_text(io.RADAR_HEADER + "\n0.1,0,1,0,0,0\n0.2,1,1,0,0,0\n0.1,0,0,1,0,0\n")
    with pytest.raises(io.ParseError):
        io.read_radar(f)


def test_radar_id_regression(tmp_path):
    f = tmp_path / "radar.csv"
    f.write_text(io.RADAR_HEADER + "\n0.1,3,1,0,0,0\n0.2,2,1,0,0,0\n")
    with pytest.raises(io.ParseError):
        io.read_radar(f)


def test_radar_roundtrip(tmp_path, rng):
    scans = [RadarScan(0.1 * k + 0.05, rng.normal(size=(k + 3, 3)), rng.normal(size=k + 3)) for k in range(20)]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    io.write_radar(a, scans)
    io.write_radar(b, io.read_radar(a))
    assert a.read_bytes() == b.read_bytes()
    back = io.read_radar(a)
    assert all(np.array_equal(s.points, r.points) and np.array_equal(s.doppler, r.doppler) for s, r in zip(scans, back))


def test_truth_identity_row(tmp_path):
    f = tmp_path / "gt.csv"
    f.write_text(io.TRUTH_HEADER_NOVEL + "\n0.0,0,0,0,1,0,0,0\n")
    tr = io.read_truth(f)
    assert np.array_equal(tr.q[0], [1.0, 0, 0, 0]) and np.array_equal(tr.p[0], np.zeros(3))
    assert tr.v is None


@pytest.mark.parametrize("with_v", [True, False])
def test_truth_roundtrip_idempotent(tmp_path, rng, with_v):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    io.write_trajectory(a, random_traj(rng, 200, with_v))
    io.write_trajectory(b, io.read_truth(a))
    assert a.read_bytes() == b.read_bytes()


def test_truth_quaternion_norm(tmp_path, caplog):
    f = tmp_path / "gt.csv"
    f.write_text(io.TRUTH_HEADER_NOVEL + "\n0.0,0,0,0,1.002,0,0,0\n")
    with pytest.raises(io.ParseError):
        io.read_truth(f)
    f.write_text(io.TRUTH_HEADER_NOVEL + "\n0.0,0,0,0,1.0002,0,0,0\n")
    with caplog.at_level(logging.WARNING):
        tr = io.read_truth(f)
    assert "renormalized" in caplog.text
    assert np.linalg.norm(tr.q[0]) == pytest.approx(1.0, abs=1e-15)


def test_config_empty_is_default():
    cfg = io.parse_config("")
    assert cfg == RunConfig()
    echo = io.config_echo(cfg)
    assert io.parse_config(echo) == cfg
    assert all(f"{k} =" in echo for k in ("sigma_td", "extrinsic_q_RI", "p0_td", "meas_noise_mode"))


def test_config_initial_offset():
    cfg = io.parse_config("t_d_init = -0.3  # start far off\n")
    assert cfg.t_d_init == -0.3 and cfg.initial_td == -0.3


def test_config_errors():
    with pytest.raises(io.ConfigError, match="unknown key"):
        io.parse_config("bad_key = 1")
    with pytest.raises(io.ConfigError, match="missing value"):
        io.parse_config("seed =")
    with pytest.raises(io.ConfigError, match="duplicate"):
        io.parse_config("seed = 1\nseed = 2")
    with pytest.raises(io.ConfigError):
        io.parse_config("outlier_ratio = 0.9")
    with pytest.raises(io.ConfigError):
        io.parse_config("extrinsic_p_IR = 1, 2")


def test_config_value_types():
    cfg = io.parse_config(
        "fixed_td = -0.1\nchi2_gate = yes\nextrinsic_p_IR = 0.2, 0, -0.1\nworkers = 2\nmeas_noise_mode = fixed\n"
    )
    assert cfg.fixed_td == -0.1 and cfg.chi2_gate is True
    assert cfg.extrinsic_p_IR == (0.2, 0.0, -0.1) and cfg.workers == 2
    assert io.parse_config("fixed_td = none").fixed_td is None


def test_config_file_roundtrip(tmp_path):
    cfg = RunConfig(seed=5, injected_t_d=0.016, gravity=(0.0, 0.0, -9.80665))
    io.write_config(tmp_path / "c.cfg", cfg)
    assert io.read_config(tmp_path / "c.cfg") == cfg


def test_metrics_empty_fields(tmp_path):
    f = tmp_path / "m.csv"
    row = dict(sequence="s", ape_trans_m=0.5, ape_rot_deg=1.0, rpe_trans_m=float("nan"),
               rpe_rot_deg=float("nan"), td_final_s=-0.15, td_sigma_s=0.004)
    io.write_metrics(f, [row])
    assert f.read_text().splitlines()[1] == "s,0.5,1.0,,,-0.15,0.004"
