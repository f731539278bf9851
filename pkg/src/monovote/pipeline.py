"""Per-frame localization: RoI -> centroid proposals -> voting -> late fusion."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .centroid import DEFAULT_GRID, HeightPrior, centroid_proposals
from .errors import FormatError, MissingClassError, ValidationError
from .geometry import Box2D, Box3D, CameraIntrinsics
from .kitti_io import DONTCARE, DetectionRecord, _decode, _float, _normalize_class, _tokens
from .voting import (GaussianOffsetModel, LinearHead, fuse_late, geometric_confidence,
                     normalize_votes, uniform_attention, vote_location, weighted_proposals)

log = logging.getLogger(__name__)

# Mean (W, L) per class, used when the input carries no dimensions.
DEFAULT_FOOTPRINT = {
    "Car": (1.63, 3.88),
    "Van": (1.90, 5.08),
    "Truck": (2.59, 10.11),
    "Pedestrian": (0.66, 0.84),
    "Person_sitting": (0.58, 0.80),
    "Cyclist": (0.60, 1.76),
    "Tram": (2.54, 16.09),
    "Misc": (1.27, 3.58),
}


@dataclass(frozen=True)
class RoI:
    """A 2D box to localize. ``dims``/``yaw`` pass through when the source has them."""

    class_name: str
    box2d: Box2D
    score: float = 1.0
    dims: tuple | None = None
    yaw: float | None = None


def parse_roi_line(line, line_no=None) -> RoI | None:
    """Accept ``class x1 y1 x2 y2 [score]`` or a full KITTI label/result row.

    Returns ``None`` for DontCare rows.
    """
    toks = _tokens(_decode(line))
    n = len(toks)
    if n not in (5, 6, 15, 16):
        raise FormatError(f"expected 5, 6, 15 or 16 fields, got {n}", line=line_no)
    name = toks[0][0]
    if name == DONTCARE:
        return None
    nums = [_float(t, c, line_no) for t, c in toks[1:]]
    try:
        if n <= 6:
            box = Box2D(*nums[:4])
            score = nums[4] if n == 6 else 1.0
            dims = yaw = None
        else:
            box = Box2D(*nums[3:7])
            h, w, l = nums[7:10]
            if not (h > 0 and w > 0 and l > 0):
                raise ValidationError(f"dimensions must be positive, got {(h, w, l)}")
            dims, yaw = (h, w, l), nums[13]
            score = nums[14] if n == 16 else 1.0
    except ValidationError as exc:
        raise exc.at(line=line_no) from None
    if not 0 <= score <= 1:
        raise ValidationError(f"score {score} outside [0, 1]", line=line_no)
    return RoI(_normalize_class(name), box, score, dims, yaw)


def read_rois(path) -> list[RoI]:
    path = Path(path)
    out = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            roi = parse_roi_line(line, line_no)
        except (FormatError, ValidationError) as exc:
            raise exc.at(path=path, line=line_no) from None
        if roi is not None:
            out.append(roi)
    return out


def localize(cam: CameraIntrinsics, roi: RoI, h_bar, gpd: GaussianOffsetModel, m_app=None,
             s=DEFAULT_GRID, head="mean", linear: LinearHead | None = None,
             p_app=(0.0, 0.0, 0.0), normalized=True):
    """3D location of one RoI, plus the flattened weighted proposals used for it."""
    grid = centroid_proposals(cam, roi.box2d, h_bar, s)
    m_geo = geometric_confidence(gpd, roi.box2d, s, normalized)
    if m_app is None:
        m_app = uniform_attention(s)
    w = normalize_votes(m_app, m_geo)
    p_geo = vote_location(grid, w, head, linear)
    return fuse_late(p_geo, p_app), weighted_proposals(grid, w)


def infer_frame(cam, rois, prior: HeightPrior, gpd, attention=None, s=DEFAULT_GRID,
                head="mean", linear=None, normalized=True) -> list[DetectionRecord]:
    """Detections for every RoI whose class has a height prior."""
    if attention is not None and len(attention) != len(rois):
        raise ValidationError(f"{len(attention)} attention maps for {len(rois)} RoIs")
    out = []
    for k, roi in enumerate(rois):
        if roi.class_name not in prior:
            log.warning("no height prior for %s; RoI skipped", roi.class_name)
            continue
        h_bar = prior[roi.class_name]
        m_app = None if attention is None else attention[k]
        loc, _ = localize(cam, roi, h_bar, gpd, m_app, s, head, linear, normalized=normalized)
        if roi.dims is not None:
            dims, yaw = roi.dims, roi.yaw
        else:
            w, l = DEFAULT_FOOTPRINT.get(roi.class_name, (h_bar, h_bar))
            dims, yaw = (h_bar, w, l), 0.0
        box3d = Box3D(tuple(loc), dims, yaw)
        alpha = math.pi - (math.pi - (yaw - math.atan2(loc[0], loc[2]))) % (2 * math.pi)
        out.append(DetectionRecord(roi.class_name, alpha, roi.box2d, box3d, roi.score))
    return out


def training_pairs(frames, prior, gpd, s=DEFAULT_GRID, normalized=True):
    """Features (flattened weighted proposals) and centroid targets for fitting
    the linear head. ``frames`` yields ``(camera, objects, attention_maps)``."""
    feats, targets = [], []
    for cam, objects, attention in frames:
        objs = [o for o in objects if not o.is_dontcare]
        for k, o in enumerate(objs):
            if o.class_name not in prior:
                continue
            roi = RoI(o.class_name, o.box2d)
            m_app = None if attention is None else attention[k]
            _, f = localize(cam, roi, prior[o.class_name], gpd, m_app, s, normalized=normalized)
            feats.append(f)
            targets.append(o.box3d.center)
    if not feats:
        raise MissingClassError("no objects with a height prior in the training frames")
    return np.array(feats), np.array(targets)
