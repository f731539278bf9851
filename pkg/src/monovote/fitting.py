"""Estimating the offset Gaussian and the linear voting head."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import (DegenerateSampleError, FormatError, NonConvergenceError, ParseError,
                     ShapeError, SingularSystemError, ValidationError)
from .losses import kl_gaussian
from .voting import GaussianOffsetModel, LinearHead

DEFAULT_RIDGE = 1e-6
KL_FLOOR = 1e-14


def _as_offsets(offsets):
    x = np.asarray(offsets, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ShapeError(f"offsets must have shape (n, 2), got {x.shape}")
    if len(x) < 2:
        raise DegenerateSampleError(f"need at least 2 offsets, got {len(x)}")
    return x


def fit_gaussian_mle(offsets) -> GaussianOffsetModel:
    """Sample mean and population variance per axis."""
    x = _as_offsets(offsets)
    mu = x.mean(axis=0)
    var = ((x - mu) ** 2).mean(axis=0)
    for axis, v in zip("uv", var):
        if not v > 0:
            raise DegenerateSampleError(f"zero variance along {axis}")
    return GaussianOffsetModel(mu, var)


def fit_gaussian_kl(offsets, init: GaussianOffsetModel, lr=0.1, iters=5000, tol=1e-12,
                    history=None) -> GaussianOffsetModel:
    """Gradient descent of the KL loss against the empirical Gaussian.

    Parameters are ``(mu, log var)``. A step that raises the loss is halved
    until it does not; ten halvings in a row without progress, while the
    gradient is still large, raise :class:`NonConvergenceError`. Loss values
    of accepted steps are appended to ``history`` when given.
    """
    target = fit_gaussian_mle(offsets)
    theta = np.concatenate([np.asarray(init.mu, float), np.log(init.var)])

    def model(th):
        return GaussianOffsetModel(th[:2], np.exp(th[2:]))

    loss, g = kl_gaussian(model(theta), target)
    trace = [loss]
    for _ in range(iters):
        if float(np.max(np.abs(g))) <= tol:
            break
        step = lr
        for _halving in range(10):
            cand = theta - step * g
            try:
                with np.errstate(over="ignore"):
                    c_loss, c_g = kl_gaussian(model(cand), target)
            except (ValidationError, ArithmeticError):
                c_loss = math.inf
            if c_loss <= loss:
                break
            step *= 0.5
        else:
            # The target is itself a Gaussian, so the minimum is exactly 0;
            # rejected steps at the rounding floor are not divergence.
            if float(np.max(np.abs(g))) < 1e-8 or loss <= KL_FLOOR:
                break
            raise NonConvergenceError(
                f"KL descent stalled at loss {loss:.6g} (lr={lr})", trace)
        theta, loss, g = cand, c_loss, c_g
        trace.append(loss)
    if history is not None:
        history.extend(trace)
    return model(theta)


def fit_linear_head(inputs, targets, ridge=DEFAULT_RIDGE) -> LinearHead:
    """Ridge least squares for ``targets ~ A @ inputs + b``; the bias is not penalized."""
    X = np.asarray(inputs, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or Y.shape[1] != 3 or len(X) != len(Y):
        raise ShapeError(f"inputs {X.shape} / targets {Y.shape} do not pair up")
    if len(X) == 0:
        raise DegenerateSampleError("no training samples")
    xm, ym = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - xm, Y - ym
    d = X.shape[1]
    if ridge > 0:
        design = np.vstack([Xc, math.sqrt(ridge) * np.eye(d)])
        rhs = np.vstack([Yc, np.zeros((d, 3))])
    else:
        design, rhs = Xc, Yc
    coef, _, rank, _ = np.linalg.lstsq(design, rhs, rcond=None)
    if ridge <= 0 and rank < d:
        raise SingularSystemError(f"design matrix has rank {rank} < {d} and no ridge term")
    A = coef.T
    return LinearHead(A, ym - A @ xm)


def read_offsets(path):
    """Offsets CSV with columns ``frame_id, object_id, du, dv``."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if not row or (line_no == 1 and row[0].strip() == "frame_id"):
                continue
            if len(row) != 4:
                raise FormatError(f"expected 4 columns, got {len(row)}", path=path, line=line_no)
            try:
                rows.append((float(row[2]), float(row[3])))
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=line_no) from None
    return np.array(rows, dtype=float).reshape(-1, 2)


def format_offsets(records) -> str:
    """``records``: iterable of ``(frame_id, object_id, du, dv)``."""
    lines = ["frame_id,object_id,du,dv"]
    lines += [f"{f},{o},{float(du)!r},{float(dv)!r}" for f, o, du, dv in records]
    return "\n".join(lines) + "\n"
