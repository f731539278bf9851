"""Depth from apparent height and grids of back-projected centroid proposals."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateBoxError, DomainError, EmptyStatsError, FormatError,
                     MissingClassError, ParseError, ValidationError)
from .geometry import Box2D, CameraIntrinsics, backproject

log = logging.getLogger(__name__)

DEFAULT_GRID = 7

HIST_LOW, HIST_HIGH, HIST_BIN = -15.0, 15.0, 0.5


@dataclass(frozen=True)
class HeightPrior:
    """Mean 3D height per class, metres."""

    table: dict

    def __post_init__(self):
        for name, h in self.table.items():
            if not (math.isfinite(h) and h > 0):
                raise ValidationError(f"height prior for {name!r} must be positive, got {h}")

    def __getitem__(self, class_name):
        try:
            return self.table[class_name]
        except KeyError:
            raise MissingClassError(f"no height prior for class {class_name!r}") from None

    def __contains__(self, class_name):
        return class_name in self.table

    def dumps(self):
        return "".join(f"{k} {v!r}\n" for k, v in sorted(self.table.items()))

    @classmethod
    def loads(cls, text):
        table = {}
        for line_no, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError("expected 'class height'", line=line_no)
            try:
                table[parts[0]] = float(parts[1])
            except ValueError:
                raise ParseError(f"bad height {parts[1]!r}", line=line_no,
                                 column=line.index(parts[1]) + 1) from None
        return cls(table)


@dataclass(frozen=True)
class ProposalGrid:
    s: int
    points2d: np.ndarray  # (s, s, 2) pixels
    points3d: np.ndarray  # (s, s, 3) metres
    shared_depth: float


@dataclass
class DepthErrorStats:
    mean: float
    std: float
    n: int
    bin_edges: np.ndarray
    histogram: np.ndarray = field(repr=False)

    def to_csv(self):
        rows = ["bin_low,bin_high,count"]
        for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.histogram):
            rows.append(f"{lo:g},{hi:g},{int(c)}")
        return "\n".join(rows) + "\n"

    def summary(self):
        return f"n={self.n} mean_dZ={self.mean:.4f} std_dZ={self.std:.4f}"


def estimate_depth(h, h_bar, f):
    """Depth at which an object of height ``h_bar`` spans ``h`` pixels."""
    if not h > 0:
        raise DegenerateBoxError(f"apparent height must be positive, got {h}")
    if not (h_bar > 0 and f > 0):
        raise DomainError("height prior and focal length must be positive")
    return f * h_bar / h


def grid_coordinates(roi: Box2D, s: int) -> np.ndarray:
    """Cell centres of an ``s x s`` grid over ``roi``, shape ``(s, s, 2)``, row-major."""
    if s < 1:
        raise DomainError(f"grid size must be >= 1, got {s}")
    frac = (np.arange(s) + 0.5) / s
    us = roi.x1 + frac * (roi.x2 - roi.x1)
    vs = roi.y1 + frac * (roi.y2 - roi.y1)
    uu, vv = np.meshgrid(us, vs)  # rows follow v, columns follow u
    return np.stack([uu, vv], axis=-1)


def centroid_proposals(cam: CameraIntrinsics, roi: Box2D, h_bar: float, s: int = DEFAULT_GRID) -> ProposalGrid:
    z = estimate_depth(roi.height(), h_bar, cam.f)
    pts2d = grid_coordinates(roi, s)
    pts3d = backproject(cam, pts2d[..., 0], pts2d[..., 1], z)
    return ProposalGrid(s, pts2d, pts3d, z)


def fit_height_prior(objects, classes=None) -> HeightPrior:
    """Per-class mean of the 3D height over ``objects`` (DontCare excluded)."""
    heights = {}
    for o in objects:
        if o.is_dontcare or o.box3d is None:
            continue
        heights.setdefault(o.class_name, []).append(o.box3d.h)
    if classes is not None:
        missing = [c for c in classes if c not in heights]
        if missing:
            raise MissingClassError(f"no objects of class {', '.join(missing)}")
        heights = {c: heights[c] for c in classes}
    if not heights:
        raise MissingClassError("corpus contains no labelled objects")
    return HeightPrior({c: float(np.mean(v)) for c, v in heights.items()})


class _Moments:
    """Count/sum/sum-of-squares accumulator; merge is associative."""

    def __init__(self):
        self.n = 0
        self.s1 = 0.0
        self.s2 = 0.0
        self.hist = np.zeros(int(round((HIST_HIGH - HIST_LOW) / HIST_BIN)) + 2, dtype=np.int64)

    def add(self, dz):
        dz = np.asarray(dz, dtype=float)
        self.n += dz.size
        self.s1 += float(dz.sum())
        self.s2 += float((dz * dz).sum())
        idx = np.floor((dz - HIST_LOW) / HIST_BIN).astype(np.int64) + 1
        idx = np.clip(idx, 0, len(self.hist) - 1)
        np.add.at(self.hist, idx, 1)

    def merge(self, other):
        self.n += other.n
        self.s1 += other.s1
        self.s2 += other.s2
        self.hist += other.hist
        return self


def _iou2d(a: Box2D, b: Box2D):
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area() + b.area() - inter)


def depth_errors(cam, objects, prior: HeightPrior, class_name, detections=None, min_iou2d=0.5):
    """Signed errors ``Z_pinhole - Z_true`` for one frame.

    By default the apparent height comes from the ground-truth 2D box. When
    ``detections`` is given, each object uses the detected box with the best
    2D IoU (at least ``min_iou2d``); unmatched objects are skipped.
    """
    h_bar = prior[class_name]
    out = []
    for o in objects:
        if o.class_name != class_name or o.box3d is None or o.box2d is None:
            continue
        box = o.box2d
        if detections is not None:
            best = max(detections, key=lambda d: _iou2d(d.box2d, o.box2d), default=None)
            if best is None or _iou2d(best.box2d, o.box2d) < min_iou2d:
                continue
            box = best.box2d
        out.append(estimate_depth(box.height(), h_bar, cam.f) - o.box3d.center[2])
    return np.asarray(out, dtype=float)


def depth_error_stats(frames, prior: HeightPrior, class_name="Car", detections=None) -> DepthErrorStats:
    """Histogram, mean and (population) std of the pinhole depth error.

    ``frames`` is an iterable of ``(camera, objects)`` pairs; ``detections``
    optionally supplies one detection list per frame.
    """
    acc = _Moments()
    for i, (cam, objects) in enumerate(frames):
        dets = None if detections is None else detections[i]
        acc.add(depth_errors(cam, objects, prior, class_name, dets))
    return finalize_stats(acc)


def finalize_stats(acc: _Moments) -> DepthErrorStats:
    if acc.n == 0:
        raise EmptyStatsError("no objects matched the selection")
    mean = acc.s1 / acc.n
    var = max(acc.s2 / acc.n - mean * mean, 0.0)
    inner = np.arange(HIST_LOW, HIST_HIGH + HIST_BIN / 2, HIST_BIN)
    edges = np.concatenate([[-np.inf], inner, [np.inf]])
    return DepthErrorStats(mean, math.sqrt(var), acc.n, edges, acc.hist.copy())
