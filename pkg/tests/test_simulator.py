import numpy as np
import pytest

from rio_td.config import RunConfig
from rio_td.ego_velocity import RansacConfig, ransac_estimate
from rio_td.simulator import Trajectory, TruthModel, generate_truth, simulate, synth_imu, synth_radar, true_ego_velocity
from rio_td.so3 import quat_conjugate, quat_multiply, quat_to_rot
from rio_td.temporal import correction_time

NOISE_FREE = dict(sigma_g=0.0, sigma_a=0.0, sigma_wg=0.0, sigma_wa=0.0)


@pytest.mark.parametrize("kind", ["figure8", "sinusoid", "circle"])
def test_truth_derivatives_consistent(kind):
    # analytic velocity, acceleration and body rate against central differences
    m = TruthModel(RunConfig(trajectory=kind))
    t = np.linspace(1.0, 50.0, 25)
    h = 1e-5
    k, kp, km = m.at(t), m.at(t + h), m.at(t - h)
    assert np.allclose((kp.p - km.p) / (2 * h), k.v, atol=1e-8)
    assert np.allclose((kp.v - km.v) / (2 * h), k.a, atol=1e-8)
    for i in range(len(t)):
        dq = quat_multiply(quat_conjugate(km.q[i]), kp.q[i])
        w = 2.0 * dq[1:] / (2 * h) * np.sign(dq[0])
        assert np.allclose(w, k.omega[i], atol=1e-7)


def test_circle_constant_speed():
    cfg = RunConfig(trajectory="circle", traj_amplitude=4.0, traj_frequency=0.1)
    k = TruthModel(cfg).at(np.linspace(0, 60, 601))
    speed = np.linalg.norm(k.v, axis=1)
    assert np.max(np.abs(speed - 4.0 * 2 * np.pi * 0.1)) < 1e-12


def test_stationary_profile_constant_pose():
    truth, _ = generate_truth(RunConfig(duration=5.0, traj_amplitude=0.0, traj_rot_amplitude=0.0))
    assert np.all(truth.p == truth.p[0]) and np.all(truth.q == truth.q[0])


def test_stationary_accel_is_gravity_reaction():
    cfg = RunConfig(duration=2.0, traj_amplitude=0.0, traj_rot_amplitude=0.0, **NOISE_FREE)
    m = TruthModel(cfg)
    imu, _ = synth_imu(m, cfg, np.random.default_rng(0))
    R = quat_to_rot(m.at(0.0).q[0])
    expect = -R.T @ np.array(cfg.gravity)
    assert all(np.array_equal(u.accel, expect) for u in imu)
    assert all(np.array_equal(u.gyro, np.zeros(3)) for u in imu)


def test_gyro_noise_statistics():
    cfg = RunConfig(duration=500.0, sigma_g=2e-3)
    m = TruthModel(cfg)
    imu, b_g = synth_imu(m, cfg, np.random.default_rng(42))
    assert len(imu) == 100_000
    t = np.array([u.stamp for u in imu])
    err = np.array([u.gyro for u in imu]) - m.at(t).omega - b_g
    assert np.std(err, axis=0) == pytest.approx(np.full(3, cfg.sigma_g * np.sqrt(cfg.imu_rate)), rel=0.05)


def test_radar_stamps_without_offset():
    cfg = RunConfig(duration=3.0, injected_t_d=0.0)
    scans = synth_radar(TruthModel(cfg), cfg, np.random.default_rng(0))
    assert [s.stamp for s in scans] == [k / cfg.radar_rate for k in range(len(scans))]


def test_radar_stamps_lag_true_epochs():
    cfg = RunConfig(duration=3.0, injected_t_d=-0.15)
    scans = synth_radar(TruthModel(cfg), cfg, np.random.default_rng(0))
    for k, s in enumerate(scans):
        assert s.stamp - k / cfg.radar_rate == pytest.approx(0.15, abs=1e-12)


@pytest.mark.parametrize("td", [-0.15, 0.016, 0.0, -0.3])
def test_sign_convention_closure(td):
    cfg = RunConfig(duration=10.0, injected_t_d=td)
    scans = synth_radar(TruthModel(cfg), cfg, np.random.default_rng(0))
    for k, s in enumerate(scans):
        assert correction_time(s.stamp, td) == pytest.approx(k / cfg.radar_rate, abs=1e-14)


def test_noiseless_scans_invert_to_truth():
    cfg = RunConfig(duration=5.0, radar_doppler_sigma=0.0, outlier_ratio=0.0)
    m = TruthModel(cfg)
    scans = synth_radar(m, cfg, np.random.default_rng(0))
    t_true = np.array([correction_time(s.stamp, cfg.injected_t_d) for s in scans])
    v_true = true_ego_velocity(m, cfg, t_true)
    rng = np.random.default_rng(1)
    for s, v in zip(scans, v_true):
        est = ransac_estimate(s, RansacConfig(), rng)
        assert np.allclose(est.v_R, v, atol=1e-9)


def test_default_dataset_sizes():
    data = simulate(RunConfig())
    assert len(data.imu) == 12000 and len(data.radar) == 600
    assert data.imu[-1].stamp < 60.0


def test_simulation_deterministic():
    a, b = simulate(RunConfig(duration=5.0, seed=9)), simulate(RunConfig(duration=5.0, seed=9))
    assert all(np.array_equal(u.gyro, w.gyro) and np.array_equal(u.accel, w.accel) for u, w in zip(a.imu, b.imu))
    assert all(np.array_equal(s.points, r.points) and np.array_equal(s.doppler, r.doppler) for s, r in zip(a.radar, b.radar))
    c = simulate(RunConfig(duration=5.0, seed=10))
    assert not np.array_equal(a.imu[5].gyro, c.imu[5].gyro)


def test_outliers_injected():
    cfg = RunConfig(duration=1.0, radar_doppler_sigma=0.0, outlier_ratio=0.2)
    m = TruthModel(cfg)
    scans = synth_radar(m, cfg, np.random.default_rng(0))
    v = true_ego_velocity(m, cfg, np.array([correction_time(scans[3].stamp, cfg.injected_t_d)]))[0]
    s = scans[3]
    u = s.points / np.linalg.norm(s.points, axis=1, keepdims=True)
    off = np.abs(s.doppler + u @ v)
    assert np.sum(off > 0.5) == 10
    assert np.all((off < 1e-12) | ((off >= 1.0) & (off <= 3.0)))


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.tile([1.0, 0, 0, 0], (2, 1)), np.zeros((2, 3)))
