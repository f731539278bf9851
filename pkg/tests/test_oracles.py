import math

import numpy as np
import pytest

from monovote.geometry import Box3D
from monovote.oracles import brute_force_ap, mc_iou

UNIT = Box3D((0, 0, 0), (1, 1, 1), 0.0)


def test_mc_identical():
    est, se = mc_iou(UNIT, UNIT, 10_000)
    assert est == 1.0 and se == 0.0


def test_mc_disjoint():
    assert mc_iou(UNIT, Box3D((10, 0, 0), (1, 1, 1), 0.0), 10_000)[0] == 0.0


@pytest.mark.slow
def test_mc_45_degree_square():
    est, se = mc_iou(UNIT, Box3D((0, 0, 0), (1, 1, 1), math.pi / 4), 10_000_000, seed=1)
    assert est == pytest.approx(0.7071, abs=0.0005)
    assert se < 2e-4


def test_mc_rejects_small_sample():
    with pytest.raises(ValueError):
        mc_iou(UNIT, UNIT, 10)


def test_mc_3d_half_height_offset():
    est, se = mc_iou(UNIT, Box3D((0, 0.5, 0), (1, 1, 1), 0.0), 400_000, mode="3d")
    assert est == pytest.approx(1 / 3, abs=5 * se)


def test_brute_force_ap_examples():
    assert brute_force_ap([1, 1], [0.9, 0.8], 2) == 1.0
    assert brute_force_ap([], [], 2) == 0.0
    assert brute_force_ap([1, 0, 1], [0.9, 0.8, 0.7], 2) == pytest.approx((6 + 5 * 2 / 3) / 11, abs=1e-15)
    assert brute_force_ap([1], [1.0], 0) is None
