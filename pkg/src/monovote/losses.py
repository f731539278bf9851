"""Training losses with hand-derived gradients, and the multi-bin angle codec."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError, ValidationError
from .voting import GaussianOffsetModel

BCE_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    a: float = 1.0
    b: float = 5.0
    c: float = 0.5
    d: float = 5.0
    e: float = 1.0
    w_2d: float = 10.0
    w_ang: float = 10.0

    def __post_init__(self):
        for name in ("a", "b", "c", "d", "e", "w_2d", "w_ang"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"loss weight {name} must be nonnegative")


def smooth_l1(x):
    """Value and derivative. Arrays are reduced by summing the values;
    the derivative stays element-wise."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    inner = ax < 1.0
    val = np.where(inner, 0.5 * x * x, ax - 0.5)
    grad = np.where(inner, x, np.sign(x))
    if x.ndim == 0:
        return float(val), float(grad)
    return float(val.sum()), grad


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce(p, t, grad=False):
    """Binary cross-entropy summed over elements; ``p`` is clamped to [eps, 1-eps].

    With ``grad=True`` also returns d/dp (zero where the clamp is active).
    """
    p = np.asarray(p, dtype=float)
    t = np.asarray(t, dtype=float)
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    val = float(np.sum(-(t * np.log(pc) + (1.0 - t) * np.log1p(-pc))))
    if not grad:
        return val
    active = (p > BCE_EPS) & (p < 1.0 - BCE_EPS)
    g = np.where(active, -t / pc + (1.0 - t) / (1.0 - pc), 0.0)
    return val, g


def kl_gaussian(pred: GaussianOffsetModel, target: GaussianOffsetModel):
    """KL loss between predicted and target offset Gaussians, summed over u and v.

    Returns ``(value, grad)`` where ``grad`` is taken with respect to
    ``(mu_u, mu_v, log var_u, log var_v)`` of the prediction.
    """
    mh = np.array(pred.mu)
    vh = np.array(pred.var)
    m = np.array(target.mu)
    v = np.array(target.var)
    if np.any(vh <= 0) or np.any(v <= 0):
        raise DomainError("variances must be positive")
    r = (v + (m - mh) ** 2) / vh
    val = 0.5 * float(np.sum(np.log(vh) - np.log(v) + r - 1.0))
    g_mu = (mh - m) / vh
    g_logvar = 0.5 * (1.0 - r)
    return val, np.concatenate([g_mu, g_logvar])


def localization_loss(p_geo, p_app, p_gt, grad=False):
    """Smooth-L1 of the fused location against ground truth.

    The gradient is the same for both branches, so only one copy is returned.
    """
    val, g = smooth_l1(np.asarray(p_geo, float) + np.asarray(p_app, float) - np.asarray(p_gt, float))
    return (val, g) if grad else val


def detection_2d_loss(cls_prob, cls_target, box_delta, w_2d=10.0):
    """Classification BCE plus weighted smooth-L1 on 2D box regression residuals."""
    return bce(cls_prob, cls_target) + w_2d * smooth_l1(np.atleast_1d(box_delta))[0]


def dimension_loss(pred_dims, gt_dims, grad=False):
    """Smooth-L1 on log-ratios of predicted and true ``(H, W, L)``."""
    p = np.asarray(pred_dims, dtype=float)
    g = np.asarray(gt_dims, dtype=float)
    if p.shape != g.shape:
        raise ShapeError("dimension vectors differ in shape")
    if np.any(~(p > 0)) or np.any(~(g > 0)):
        raise DomainError("dimensions must be positive")
    val, d = smooth_l1(np.log(p) - np.log(g))
    return (val, d / p) if grad else val


# -- multi-bin orientation ---------------------------------------------------

def wrap_angle(x):
    """Map angles into (-pi, pi]."""
    return math.pi - np.mod(math.pi - np.asarray(x, dtype=float), 2.0 * math.pi)


def bin_centers(n_bins):
    if n_bins < 2:
        raise DomainError(f"need at least 2 orientation bins, got {n_bins}")
    return wrap_angle(2.0 * math.pi * np.arange(n_bins) / n_bins)


@dataclass(frozen=True)
class OrientationEncoding:
    """Per-bin scores (pre-sigmoid) and residuals relative to each bin centre.

    Encoded targets use ``+inf``/``-inf`` logits so their sigmoid is exactly 1/0.
    """

    bin_logits: np.ndarray
    residuals: np.ndarray

    def __post_init__(self):
        lg = np.asarray(self.bin_logits, dtype=float)
        rs = np.asarray(self.residuals, dtype=float)
        if lg.ndim != 1 or lg.shape != rs.shape:
            raise ShapeError("bin logits and residuals must be equal-length vectors")
        if lg.size < 2:
            raise DomainError("need at least 2 orientation bins")
        object.__setattr__(self, "bin_logits", lg)
        object.__setattr__(self, "residuals", rs)

    @property
    def n_bins(self):
        return self.bin_logits.size

    @property
    def bin_centers(self):
        return bin_centers(self.n_bins)

    @property
    def positive(self):
        return self.bin_logits > 0


def encode_orientation(theta, n_bins=2, overlap=0.1) -> OrientationEncoding:
    """Target encoding of ``theta``: every bin within ``pi/N + overlap/2`` is positive."""
    if overlap < 0:
        raise DomainError("overlap must be nonnegative")
    centers = bin_centers(n_bins)
    resid = wrap_angle(theta - centers)
    pos = np.abs(resid) <= math.pi / n_bins + overlap / 2.0
    if not pos.any():  # float slack at the exact bin boundary
        pos[np.argmin(np.abs(resid))] = True
    logits = np.where(pos, np.inf, -np.inf)
    return OrientationEncoding(logits, resid)


def decode_orientation(enc: OrientationEncoding) -> float:
    k = int(np.argmax(enc.bin_logits))
    return float(wrap_angle(enc.bin_centers[k] + enc.residuals[k]))


def orientation_loss(pred: OrientationEncoding, target: OrientationEncoding, w_ang=10.0, grad=False):
    """BCE on sigmoid bin scores plus ``w_ang`` times smooth-L1 on the residuals
    of positive target bins.

    With ``grad=True`` returns ``(value, d/d logits, d/d residuals)``.
    """
    if pred.n_bins != target.n_bins:
        raise ShapeError(f"bin count mismatch: {pred.n_bins} vs {target.n_bins}")
    p = sigmoid(pred.bin_logits)
    t = sigmoid(target.bin_logits)
    cls_val, dp = bce(p, t, grad=True)
    mask = target.positive
    reg_val, dr = smooth_l1(np.where(mask, pred.residuals - target.residuals, 0.0))
    val = cls_val + w_ang * reg_val
    if not grad:
        return val
    g_logits = dp * p * (1.0 - p)
    g_res = w_ang * np.where(mask, dr, 0.0)
    return val, g_logits, g_res


def multitask_loss(parts, w: LossWeights = LossWeights()):
    """Weighted sum of the five task losses (``L_2d, L_loc, L_size, L_angle, L_kld``)."""
    keys = ("L_2d", "L_loc", "L_size", "L_angle", "L_kld")
    missing = [k for k in keys if k not in parts]
    if missing:
        raise ValidationError(f"missing loss parts: {missing}")
    vals = [float(parts[k]) for k in keys]
    if not all(math.isfinite(v) and v >= 0 for v in vals):
        raise ValidationError("loss parts must be finite and nonnegative")
    return w.a * vals[0] + w.b * vals[1] + w.c * vals[2] + w.d * vals[3] + w.e * vals[4]
