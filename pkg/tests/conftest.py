import numpy as np
import pytest
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from rio_td.propagation import make_imu
from rio_td.state import NominalState


def to_scipy(q):
    """(w,x,y,z) -> scipy Rotation (which stores x,y,z,w)."""
    q = np.asarray(q, dtype=float)
    return Rotation.from_quat(q[..., [1, 2, 3, 0]])


def from_scipy(r):
    q = r.as_quat()
    return q[..., [3, 0, 1, 2]]


def same_rotation(q1, q2, tol):
    return min(np.linalg.norm(q1 - q2), np.linalg.norm(q1 + q2)) <= tol


def random_state(rng, td_scale=0.2):
    return NominalState(
        q_GI=rng.normal(size=4),
        b_g=rng.normal(scale=0.01, size=3),
        v_GI=rng.normal(scale=2.0, size=3),
        b_a=rng.normal(scale=0.1, size=3),
        p_GI=rng.normal(scale=5.0, size=3),
        t_d=rng.uniform(-td_scale, td_scale),
        stamp=0.0,
    )


def random_imu(rng, stamp=0.0):
    return make_imu(stamp, rng.normal(scale=0.5, size=3), rng.normal(scale=2.0, size=3) + [0, 0, 9.81])


finite = st.floats(-10.0, 10.0, allow_nan=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)
unit_quat = (
    st.tuples(finite, finite, finite, finite)
    .filter(lambda t: np.linalg.norm(t) > 1e-3)
    .map(lambda t: np.array(t) / np.linalg.norm(t))
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
