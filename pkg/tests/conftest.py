import math

import numpy as np
import pytest
from hypothesis import strategies as st

from monovote.geometry import Box3D, CameraIntrinsics

ACCEPTANCE_LINES = []


@pytest.fixture
def cam():
    return CameraIntrinsics(700.0, 600.0, 180.0, 1242, 375)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def acceptance_report():
    def record(number, title, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


finite = st.floats(allow_nan=False, allow_infinity=False)
dims = st.floats(0.2, 12.0)
yaws = st.floats(-math.pi, math.pi, exclude_min=True)


@st.composite
def boxes3d(draw, z_range=(2.0, 80.0)):
    center = (draw(st.floats(-30, 30)), draw(st.floats(-3, 3)), draw(st.floats(*z_range)))
    return Box3D(center, (draw(dims), draw(dims), draw(dims)), draw(yaws))


def random_box(rng, spread=2.0, base=(0.0, 1.0, 20.0)):
    c = np.asarray(base) + rng.normal(0, spread, 3) * np.array([1, 0.2, 1])
    d = rng.uniform(0.5, 5.0, 3)
    return Box3D(tuple(c), tuple(d), rng.uniform(-math.pi, math.pi))
