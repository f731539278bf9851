import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from monovote.errors import DomainError, ShapeError, ValidationError
from monovote.losses import (LossWeights, OrientationEncoding, bce, decode_orientation,
                             dimension_loss, encode_orientation, kl_gaussian, localization_loss,
                             multitask_loss, orientation_loss, smooth_l1, wrap_angle)
from monovote.voting import GaussianOffsetModel


def test_smooth_l1_examples():
    assert smooth_l1(0.5) == (0.125, 0.5)
    assert smooth_l1(-2.0) == (1.5, -1.0)
    assert smooth_l1(1.0)[0] == 0.5
    assert smooth_l1(1.0 - 1e-12)[0] == pytest.approx(0.5)


@given(st.floats(-1e6, 1e6))
def test_smooth_l1_nonnegative_and_symmetric(x):
    assert smooth_l1(x)[0] >= 0
    assert smooth_l1(x)[0] == smooth_l1(-x)[0]


def test_bce_examples():
    assert bce(0.5, 1) == pytest.approx(math.log(2))
    assert bce(1 - 1e-9, 1) == pytest.approx(1e-7, rel=1e-3)  # clamp floor
    for p, t in ((1.0, 1), (0.0, 0), (0.0, 1), (1.0, 0)):
        assert math.isfinite(bce(p, t))


def test_kl_examples():
    n = GaussianOffsetModel((0.3, -0.1), (2.0, 0.5))
    val, g = kl_gaussian(n, n)
    assert val == 0 and np.all(g == 0)
    one = GaussianOffsetModel((1, 0), (1, 1))
    zero = GaussianOffsetModel((0, 0), (1, 1))
    assert kl_gaussian(one, zero)[0] == pytest.approx(0.5, abs=1e-12)
    wide = GaussianOffsetModel((0, 0), (math.e, 1))
    assert kl_gaussian(zero, wide)[0] == pytest.approx((math.e - 2) / 2, abs=1e-12)


def test_dimension_loss_examples():
    gt = np.array([1.5, 1.6, 3.9])
    assert dimension_loss(gt, gt) == 0
    assert dimension_loss(gt * math.e, gt) == pytest.approx(1.5, abs=1e-12)
    with pytest.raises(DomainError):
        dimension_loss([1, 0, 1], gt)
    with pytest.raises(ShapeError):
        dimension_loss([1, 1], gt)


def test_localization_loss():
    assert localization_loss((1, 0, 14), (0, 0, 0), (1, 0, 14)) == 0
    assert localization_loss((1, 0, 14), (0.5, 0, 0), (1, 0, 14)) == pytest.approx(0.125)


def test_encode_examples():
    enc = encode_orientation(0.3, 2, 0.1)
    assert enc.positive.tolist() == [True, False]
    assert enc.residuals[0] == pytest.approx(0.3)
    tie = encode_orientation(math.pi / 2, 2, 0.1)
    assert tie.positive.tolist() == [True, True]
    with pytest.raises(DomainError):
        encode_orientation(0.0, 1)


def test_decode_examples():
    assert decode_orientation(OrientationEncoding([5.0, -5.0], [0.3, 0.0])) == pytest.approx(0.3)
    out = decode_orientation(OrientationEncoding([-5.0, 5.0], [0.0, -0.2]))
    assert out == pytest.approx(math.pi - 0.2)
    assert out == pytest.approx(2.941593, abs=1e-6)


def test_orientation_loss_examples():
    t = encode_orientation(0.3, 2)
    assert orientation_loss(t, t) == pytest.approx(0.0, abs=1e-5)
    off = OrientationEncoding(t.bin_logits, t.residuals + np.array([0.5, 0.0]))
    assert orientation_loss(off, t) - orientation_loss(t, t) == pytest.approx(1.25, abs=1e-12)
    neg = OrientationEncoding(t.bin_logits, t.residuals + np.array([0.0, 3.0]))
    assert orientation_loss(neg, t) == orientation_loss(t, t)
    with pytest.raises(ShapeError):
        orientation_loss(encode_orientation(0.3, 4), t)


def test_multitask_examples():
    keys = ("L_2d", "L_loc", "L_size", "L_angle", "L_kld")
    assert multitask_loss(dict.fromkeys(keys, 0.0)) == 0
    assert multitask_loss(dict.fromkeys(keys, 1.0)) == 12.5
    with pytest.raises(ValidationError):
        multitask_loss({"L_2d": 1.0})
    with pytest.raises(ValidationError):
        multitask_loss(dict.fromkeys(keys, -1.0))
    with pytest.raises(ValidationError):
        LossWeights(a=-1)


def test_wrap_angle_range():
    x = np.linspace(-20, 20, 10001)
    w = wrap_angle(x)
    assert np.all(w > -math.pi) and np.all(w <= math.pi)
    np.testing.assert_allclose(np.cos(w), np.cos(x), atol=1e-12)
    assert wrap_angle(-math.pi) == math.pi
