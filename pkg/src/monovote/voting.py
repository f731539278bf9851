"""Object-aware voting over centroid proposals.

Appearance attention and the geometric projection distribution are added
and normalized jointly into vote weights; the weighted proposals are then
reduced to one 3D location by either the mean head or a linear head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .centroid import ProposalGrid, grid_coordinates
from .errors import (FormatError, ParseError, ShapeError, UninitializedHeadError,
                     ValidationError, ZeroMassError)
from .geometry import Box2D


@dataclass(frozen=True)
class GaussianOffsetModel:
    """Axis-aligned 2D Gaussian over projection offsets."""

    mu: tuple
    var: tuple

    def __post_init__(self):
        mu = tuple(float(m) for m in self.mu)
        var = tuple(float(v) for v in self.var)
        if len(mu) != 2 or len(var) != 2:
            raise ValidationError("mu and var must be 2-vectors")
        if not all(math.isfinite(v) for v in mu + var):
            raise ValidationError("non-finite Gaussian parameters")
        if not all(v > 0 for v in var):
            raise ValidationError(f"variances must be positive, got {var}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "var", var)

    def pdf(self, du, dv):
        su2, sv2 = self.var
        q = (np.asarray(du) - self.mu[0]) ** 2 / su2 + (np.asarray(dv) - self.mu[1]) ** 2 / sv2
        return np.exp(-0.5 * q) / (2.0 * math.pi * math.sqrt(su2 * sv2))

    def dumps(self):
        return " ".join(repr(v) for v in self.mu + self.var) + "\n"

    @classmethod
    def loads(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if len(lines) != 1:
            raise FormatError("expected one line 'mu_u mu_v var_u var_v'")
        parts = lines[0].split()
        if len(parts) != 4:
            raise FormatError(f"expected 4 values, got {len(parts)}", line=1)
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise ParseError(str(exc), line=1) from None
        return cls(vals[:2], vals[2:])


def offsets_from_center(roi: Box2D, points2d, normalized=True):
    """Offsets of image points from the RoI centre, optionally in RoI units."""
    cu, cv = roi.center()
    d = np.asarray(points2d, dtype=float) - np.array([cu, cv])
    if normalized:
        d = d / np.array([roi.width(), roi.height()])
    return d


def geometric_confidence(model: GaussianOffsetModel, roi: Box2D, s: int, normalized=True) -> np.ndarray:
    """Gaussian density of each grid cell's offset from the RoI centre, shape ``(s, s)``."""
    d = offsets_from_center(roi, grid_coordinates(roi, s), normalized)
    return model.pdf(d[..., 0], d[..., 1])


def check_attention(m_app, s=None) -> np.ndarray:
    m = np.asarray(m_app, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"attention map must be square, got shape {m.shape}")
    if s is not None and m.shape[0] != s:
        raise ShapeError(f"attention map is {m.shape[0]}x{m.shape[0]}, grid is {s}x{s}")
    if not np.all((m >= 0) & (m <= 1)):
        raise ValidationError("attention values must lie in [0, 1]")
    return m


def uniform_attention(s, value=0.5):
    return np.full((s, s), value)


def normalize_votes(m_app, m_geo) -> np.ndarray:
    """Sum both maps and normalize to unit mass."""
    a = np.asarray(m_app, dtype=float)
    g = np.asarray(m_geo, dtype=float)
    if a.shape != g.shape:
        raise ShapeError(f"map shapes differ: {a.shape} vs {g.shape}")
    m = a + g
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValidationError("vote maps must be finite and nonnegative")
    total = m.sum()
    if not total > 0:
        raise ZeroMassError("vote maps have zero total mass")
    return m / total


@dataclass
class LinearHead:
    """Affine map from the flattened weighted proposals to ``(X, Y, Z)``.

    ``A`` has shape ``(3, 3 * s * s)``; features are ordered cell-major
    (row-major cells, then X, Y, Z within a cell).
    """

    A: np.ndarray | None = None
    b: np.ndarray | None = None

    @property
    def fitted(self):
        return self.A is not None and self.b is not None

    @classmethod
    def identity_sum(cls, s):
        """The head that reproduces the mean head exactly."""
        return cls(np.tile(np.eye(3), s * s), np.zeros(3))

    def __call__(self, features):
        if not self.fitted:
            raise UninitializedHeadError("linear head has no parameters; fit or load it first")
        x = np.asarray(features, dtype=float)
        if x.shape[-1] != self.A.shape[1]:
            raise ShapeError(f"head expects {self.A.shape[1]} features, got {x.shape[-1]}")
        return x @ self.A.T + self.b

    def save(self, path):
        if not self.fitted:
            raise UninitializedHeadError("cannot save an unfitted head")
        s = int(round(math.sqrt(self.A.shape[1] / 3)))
        np.savetxt(path, np.hstack([self.A, self.b[:, None]]), header=f"linear-head s={s}")

    @classmethod
    def load(cls, path):
        try:
            m = np.loadtxt(path, ndmin=2)
        except (OSError, ValueError) as exc:
            raise FormatError(f"cannot read linear head: {exc}", path=Path(path)) from None
        if m.shape[0] != 3 or (m.shape[1] - 1) % 3:
            raise FormatError(f"linear head matrix has shape {m.shape}", path=Path(path))
        return cls(m[:, :-1].copy(), m[:, -1].copy())


def weighted_proposals(grid: ProposalGrid, weights) -> np.ndarray:
    """Element-wise product of proposals and weights, flattened to ``(3 s^2,)``."""
    w = np.asarray(weights, dtype=float)
    if w.shape != grid.points3d.shape[:2]:
        raise ShapeError(f"weights shape {w.shape} does not match grid {grid.points3d.shape[:2]}")
    return (grid.points3d * w[..., None]).reshape(-1)


def vote_location(grid: ProposalGrid, weights, head="mean", linear: LinearHead | None = None) -> np.ndarray:
    feats = weighted_proposals(grid, weights)
    if head == "mean":
        return feats.reshape(-1, 3).sum(axis=0)
    if head == "linear":
        if linear is None:
            raise UninitializedHeadError("linear head requested without parameters")
        return linear(feats)
    raise ValidationError(f"unknown head {head!r}")


def fuse_late(p_geo, p_app=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Element-wise sum of the geometric estimate and the appearance residual."""
    a = np.asarray(p_geo, dtype=float)
    b = np.asarray(p_app, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValidationError("late fusion inputs must be finite")
    return a + b


def read_attention_rows(path, s) -> list[np.ndarray]:
    """Attention maps stored one per row (``s*s`` comma-separated values) in a CSV,
    or as a flat little-endian float32 ``.bin`` of ``n*s*s`` values."""
    path = Path(path)
    if path.suffix == ".bin":
        flat = np.fromfile(path, dtype="<f4").astype(float)
        if flat.size % (s * s):
            raise FormatError(f"{flat.size} floats is not a multiple of {s * s}", path=path)
        return [check_attention(m, s) for m in flat.reshape(-1, s, s)]
    maps = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            vals = [float(t) for t in line.replace(",", " ").split()]
        except ValueError as exc:
            raise ParseError(str(exc), path=path, line=line_no) from None
        if len(vals) != s * s:
            raise FormatError(f"expected {s * s} values, got {len(vals)}", path=path, line=line_no)
        try:
            maps.append(check_attention(np.reshape(vals, (s, s)), s))
        except ValidationError as exc:
            raise exc.at(path=path, line=line_no) from None
    return maps


def format_attention_rows(maps) -> str:
    return "".join(",".join(f"{v:.6f}" for v in np.ravel(m)) + "\n" for m in maps)
