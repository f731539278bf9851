import numpy as np
import pytest

from monovote.errors import (DegenerateSampleError, NonConvergenceError, ParseError, ShapeError,
                             SingularSystemError)
from monovote.fitting import (fit_gaussian_kl, fit_gaussian_mle, fit_linear_head, format_offsets,
                              read_offsets)
from monovote.voting import GaussianOffsetModel, LinearHead

FOUR = [(-1, -1), (1, 1), (-1, 1), (1, -1)]


def test_mle_examples():
    g = fit_gaussian_mle(FOUR)
    assert g.mu == (0, 0) and g.var == (1, 1)
    with pytest.raises(DegenerateSampleError, match="along v"):
        fit_gaussian_mle([(-1, 0), (1, 0)])
    with pytest.raises(DegenerateSampleError):
        fit_gaussian_mle([(0, 0)])
    with pytest.raises(ShapeError):
        fit_gaussian_mle([1, 2, 3])


def test_mle_sampling_within_three_standard_errors():
    rng = np.random.default_rng(7)
    n = 100_000
    x = rng.normal((0.5, -0.2), np.sqrt((4, 1)), size=(n, 2))
    g = fit_gaussian_mle(x)
    se_mu = np.sqrt(np.array([4, 1]) / n)
    se_var = np.array([4, 1]) * np.sqrt(2 / n)
    assert np.all(np.abs(np.array(g.mu) - (0.5, -0.2)) < 3 * se_mu)
    assert np.all(np.abs(np.array(g.var) - (4, 1)) < 3 * se_var)


def test_kl_fit_at_target_is_unchanged():
    history = []
    out = fit_gaussian_kl(FOUR, GaussianOffsetModel((0, 0), (1, 1)), history=history)
    assert out == GaussianOffsetModel((0, 0), (1, 1))
    assert len(history) == 1


def test_kl_fit_from_far_start():
    history = []
    out = fit_gaussian_kl(FOUR, GaussianOffsetModel((5, 5), (1, 1)), lr=0.1, iters=2000,
                          history=history)
    assert np.max(np.abs(out.mu)) < 1e-6
    assert np.all(np.diff(history) <= 0)


def test_kl_fit_huge_lr_still_descends():
    out = fit_gaussian_kl(FOUR, GaussianOffsetModel((5, -3), (9, 0.1)), lr=50.0, iters=5000)
    np.testing.assert_allclose(out.mu, (0, 0), atol=1e-6)


def test_kl_nonconvergence_reports_trace():
    with pytest.raises(NonConvergenceError) as err:
        fit_gaussian_kl(FOUR, GaussianOffsetModel((5, 5), (1, 1)), lr=1e12, iters=100)
    assert len(err.value.trace) >= 1


def test_linear_head_realizable_mean():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(400, 27))
    Y = LinearHead.identity_sum(3)(X)
    head = fit_linear_head(X, Y)
    assert np.mean((head(X) - Y) ** 2) < 1e-10


def test_linear_head_recovers_bias():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(400, 27))
    c = np.array([0.3, -1.2, 2.5])
    head = fit_linear_head(X, LinearHead.identity_sum(3)(X) + c)
    np.testing.assert_allclose(head.b, c, atol=1e-5)


def test_linear_head_singular_without_ridge():
    X = np.ones((10, 6))
    with pytest.raises(SingularSystemError):
        fit_linear_head(X, np.zeros((10, 3)), ridge=0)
    fit_linear_head(X, np.zeros((10, 3)))  # ridge handles it


def test_offsets_csv(tmp_path):
    recs = [("000001", 0, 0.1, -0.2), ("000001", 1, 0.3, 0.05)]
    (tmp_path / "o.csv").write_text(format_offsets(recs))
    np.testing.assert_array_equal(read_offsets(tmp_path / "o.csv"), [[0.1, -0.2], [0.3, 0.05]])
    (tmp_path / "bad.csv").write_text("frame_id,object_id,du,dv\n1,0,x,1\n")
    with pytest.raises(ParseError) as err:
        read_offsets(tmp_path / "bad.csv")
    assert err.value.line == 2
