"""KITTI-style 3D/BEV evaluation: rotated-box IoU, greedy matching, AP, and
mean centroid error binned by distance."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ValidationError
from .geometry import Box3D, bev_footprint, polygon_area

log = logging.getLogger(__name__)

DEDUP_TOL = 1e-9

# Classes whose detections are neither rewarded nor penalized when evaluating
# the key class (KITTI devkit convention).
NEIGHBOR_CLASSES = {"Car": {"Van"}, "Pedestrian": {"Person_sitting"}}


@dataclass(frozen=True)
class DifficultyRegime:
    name: str
    min_box_height_px: float
    max_occlusion: int
    max_truncation: float


EASY = DifficultyRegime("Easy", 40, 0, 0.15)
MODERATE = DifficultyRegime("Moderate", 25, 1, 0.30)
HARD = DifficultyRegime("Hard", 25, 2, 0.50)
REGIMES = {"easy": EASY, "moderate": MODERATE, "hard": HARD}


class Metric(str, Enum):
    BEV = "bev"
    IOU3D = "3d"


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.7
    metric: Metric = Metric.IOU3D
    ap_mode: int = 11
    class_name: str = "Car"
    regime: DifficultyRegime = MODERATE

    def __post_init__(self):
        if not 0 < self.iou_threshold <= 1:
            raise ValidationError(f"IoU threshold {self.iou_threshold} outside (0, 1]")
        if self.ap_mode not in (11, 40):
            raise ValidationError(f"AP mode must be 11 or 40, got {self.ap_mode}")
        object.__setattr__(self, "metric", Metric(self.metric))


# -- IoU -----------------------------------------------------------------------

def _clip(subject, a, b):
    """Keep the part of ``subject`` left of the directed edge a->b."""
    out = []
    n = len(subject)
    if n == 0:
        return out
    ex, ey = b[0] - a[0], b[1] - a[1]

    def side(p):
        return ex * (p[1] - a[1]) - ey * (p[0] - a[0])

    prev = subject[-1]
    s_prev = side(prev)
    for cur in subject:
        s_cur = side(cur)
        if s_cur >= 0:
            if s_prev < 0:
                out.append(_cross_point(prev, cur, s_prev, s_cur))
            out.append(cur)
        elif s_prev >= 0:
            out.append(_cross_point(prev, cur, s_prev, s_cur))
        prev, s_prev = cur, s_cur
    return out


def _cross_point(p, q, sp, sq):
    t = sp / (sp - sq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def _dedup(poly):
    out = []
    for p in poly:
        if not out or abs(p[0] - out[-1][0]) > DEDUP_TOL or abs(p[1] - out[-1][1]) > DEDUP_TOL:
            out.append(p)
    if len(out) > 1 and abs(out[0][0] - out[-1][0]) <= DEDUP_TOL and abs(out[0][1] - out[-1][1]) <= DEDUP_TOL:
        out.pop()
    return out


def convex_intersection(p, q):
    """Sutherland-Hodgman clip of convex polygon ``p`` by convex CCW polygon ``q``."""
    poly = [tuple(v) for v in np.asarray(p, dtype=float)]
    clip = [tuple(v) for v in np.asarray(q, dtype=float)]
    for i in range(len(clip)):
        poly = _clip(poly, clip[i], clip[(i + 1) % len(clip)])
        if not poly:
            return []
    return _dedup(poly)


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    # Skip clipping when the footprints' circumscribed circles are apart.
    ra = 0.5 * math.hypot(a.l, a.w)
    rb = 0.5 * math.hypot(b.l, b.w)
    if math.hypot(a.center[0] - b.center[0], a.center[2] - b.center[2]) > ra + rb:
        return 0.0
    inter = convex_intersection(bev_footprint(a), bev_footprint(b))
    if len(inter) < 3:
        return 0.0
    return max(polygon_area(inter), 0.0)


def _ratio(inter, total_a, total_b):
    union = total_a + total_b - inter
    if union <= 0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def iou_bev(a: Box3D, b: Box3D) -> float:
    inter = bev_intersection_area(a, b)
    return _ratio(inter, a.l * a.w, b.l * b.w)


def vertical_overlap(a: Box3D, b: Box3D) -> float:
    lo = max(a.center[1] - a.h / 2, b.center[1] - b.h / 2)
    hi = min(a.center[1] + a.h / 2, b.center[1] + b.h / 2)
    return max(hi - lo, 0.0)


def iou_3d(a: Box3D, b: Box3D) -> float:
    dy = vertical_overlap(a, b)
    if dy <= 0:
        return 0.0
    inter = bev_intersection_area(a, b) * dy
    return _ratio(inter, a.volume(), b.volume())


def box_iou(metric, a, b):
    return iou_bev(a, b) if Metric(metric) is Metric.BEV else iou_3d(a, b)


# -- difficulty and matching ---------------------------------------------------

def in_regime(g, regime: DifficultyRegime) -> bool:
    return (g.box2d is not None
            and g.box2d.height() >= regime.min_box_height_px
            and 0 <= g.occlusion <= regime.max_occlusion
            and g.truncation <= regime.max_truncation)


def filter_by_difficulty(gts, regime: DifficultyRegime):
    return [g for g in gts if not g.is_dontcare and in_regime(g, regime)]


TP, FP, IGNORED = 1, 0, -1


@dataclass
class FrameResult:
    """Per-detection outcome (``TP``, ``FP`` or ``IGNORED``) plus coverage."""

    scores: np.ndarray
    flags: np.ndarray
    gt_count: int
    gt_matched: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def _overlap_fraction_2d(det_box, region):
    """Intersection area over detection area (DontCare test)."""
    iw = min(det_box.x2, region.x2) - max(det_box.x1, region.x1)
    ih = min(det_box.y2, region.y2) - max(det_box.y1, region.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih / det_box.area()


def match_and_score(dets, gts, cfg: EvalConfig) -> FrameResult:
    """Greedy one-to-one matching in descending score order.

    A detection is ``IGNORED`` when its best overlap is with a ground truth
    outside the regime or of a neighbouring class, when it lies mostly inside
    a DontCare region, or when its own 2D box is shorter than the regime's
    minimum height.
    """
    neighbors = NEIGHBOR_CLASSES.get(cfg.class_name, set())
    care, neutral, dontcare = [], [], []
    for g in gts:
        if g.is_dontcare:
            if g.box2d is not None:
                dontcare.append(g.box2d)
        elif g.class_name == cfg.class_name:
            (care if in_regime(g, cfg.regime) else neutral).append(g)
        elif g.class_name in neighbors:
            neutral.append(g)

    own = [d for d in dets if d.class_name == cfg.class_name]
    order = sorted(range(len(own)), key=lambda i: -own[i].score)
    scores = np.array([own[i].score for i in order], dtype=float)
    flags = np.full(len(order), FP, dtype=int)
    used = np.zeros(len(care), dtype=bool)

    for rank, i in enumerate(order):
        d = own[i]
        best, best_iou = -1, cfg.iou_threshold
        for j, g in enumerate(care):
            if used[j]:
                continue
            iou = box_iou(cfg.metric, d.box3d, g.box3d)
            if iou >= best_iou and (best < 0 or iou > best_iou):
                best, best_iou = j, iou
        if best >= 0:
            used[best] = True
            flags[rank] = TP
            continue
        if any(box_iou(cfg.metric, d.box3d, g.box3d) >= cfg.iou_threshold for g in neutral):
            flags[rank] = IGNORED
        elif d.box2d.height() < cfg.regime.min_box_height_px:
            flags[rank] = IGNORED
        elif any(_overlap_fraction_2d(d.box2d, r) > 0.5 for r in dontcare):
            flags[rank] = IGNORED
    return FrameResult(scores, flags, len(care), used)


def merge_results(results) -> FrameResult:
    results = list(results)
    if not results:
        return FrameResult(np.zeros(0), np.zeros(0, dtype=int), 0)
    return FrameResult(np.concatenate([r.scores for r in results]),
                       np.concatenate([r.flags for r in results]),
                       sum(r.gt_count for r in results),
                       np.concatenate([r.gt_matched for r in results]))


def recall_points(ap_mode):
    if ap_mode == 11:
        return np.arange(11) / 10.0
    if ap_mode == 40:
        return np.arange(1, 41) / 40.0
    raise ValidationError(f"AP mode must be 11 or 40, got {ap_mode}")


def average_precision(flags, scores, gt_count, ap_mode=11):
    """Interpolated AP; ``None`` when there is no ground truth to recall.

    ``IGNORED`` detections are dropped before building the PR curve.
    """
    if gt_count <= 0:
        return None
    flags = np.asarray(flags)
    scores = np.asarray(scores, dtype=float)
    keep = flags != IGNORED
    flags, scores = flags[keep], scores[keep]
    if flags.size == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    hit = flags[order] == TP
    tp = np.cumsum(hit)
    fp = np.cumsum(~hit)
    recall = tp / gt_count
    precision = tp / (tp + fp)
    # max precision at recall >= r: a suffix maximum over ranks
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    total = 0.0
    rs = recall_points(ap_mode)
    for r in rs:
        idx = np.searchsorted(recall, r, side="left")
        if idx < len(recall):
            total += envelope[idx]
    return total / len(rs)


@dataclass
class EvalRow:
    class_name: str
    regime: str
    metric: str
    iou_threshold: float
    ap_mode: int
    ap: float | None


def evaluate(frames, cfg: EvalConfig) -> float | None:
    """AP over ``frames``: an iterable of ``(detections, ground_truths)`` pairs."""
    merged = merge_results(match_and_score(d, g, cfg) for d, g in frames)
    return average_precision(merged.flags, merged.scores, merged.gt_count, cfg.ap_mode)


def format_report_csv(rows) -> str:
    out = ["class,regime,metric,iou_threshold,ap_mode,AP"]
    for r in rows:
        ap = "" if r.ap is None else f"{r.ap:.6f}"
        out.append(f"{r.class_name},{r.regime},{r.metric},{r.iou_threshold:g},{r.ap_mode},{ap}")
    return "\n".join(out) + "\n"


def format_report_table(rows) -> str:
    head = ("class", "regime", "metric", "IoU", "AP pts", "AP")
    body = [(r.class_name, r.regime, r.metric, f"{r.iou_threshold:g}", str(r.ap_mode),
             "n/a" if r.ap is None else f"{100 * r.ap:.2f}") for r in rows]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join(fmt.format(*line).rstrip() for line in [head, *body]) + "\n"


# -- mean centroid error -------------------------------------------------------

@dataclass
class MceBin:
    distance_low: float
    distance_high: float
    mean_error_m: float
    std_error_m: float
    count: int


@dataclass
class MceCurve:
    bins: list

    def to_csv(self):
        out = ["bin_low,bin_high,mean,std,count"]
        for b in self.bins:
            out.append(f"{b.distance_low:g},{b.distance_high:g},{b.mean_error_m:.6f},"
                       f"{b.std_error_m:.6f},{b.count}")
        return "\n".join(out) + "\n"

    def to_plot_data(self):
        """gnuplot-friendly columns: bin centre, mean, mean-std, mean+std, count."""
        out = ["# center mean lower upper count"]
        for b in self.bins:
            if b.count == 0:
                continue
            c = 0.5 * (b.distance_low + b.distance_high)
            out.append(f"{c:g} {b.mean_error_m:.6f} {b.mean_error_m - b.std_error_m:.6f} "
                       f"{b.mean_error_m + b.std_error_m:.6f} {b.count}")
        return "\n".join(out) + "\n"

    def overall_mean(self):
        n = sum(b.count for b in self.bins)
        if n == 0:
            return math.nan
        return sum(b.mean_error_m * b.count for b in self.bins if b.count) / n


def centroid_errors(frames, class_name=None):
    """``(distance_to_camera, error)`` pairs: each ground-truth centroid against
    the nearest detected centroid in its frame."""
    dist, err = [], []
    skipped = 0
    for dets, gts in frames:
        gts = [g for g in gts if not g.is_dontcare and g.box3d is not None
               and (class_name is None or g.class_name == class_name)]
        if class_name is not None:
            dets = [d for d in dets if d.class_name == class_name]
        if not gts:
            continue
        if not dets:
            skipped += 1
            continue
        dc = np.array([d.box3d.center for d in dets])
        for g in gts:
            c = np.asarray(g.box3d.center)
            dist.append(float(np.linalg.norm(c)))
            err.append(float(np.min(np.linalg.norm(dc - c, axis=1))))
    if skipped:
        log.info("mce: %d frame(s) with ground truth but no detections were skipped", skipped)
    return np.array(dist), np.array(err)


def mce_curve(frames, bin_width=3.0, max_dist=60.0, class_name=None) -> MceCurve:
    if not bin_width > 0 or not max_dist > 0:
        raise ValidationError("bin width and max distance must be positive")
    dist, err = centroid_errors(frames, class_name)
    n_bins = int(math.ceil(max_dist / bin_width - 1e-12))
    bins = []
    idx = np.floor(dist / bin_width).astype(int) if dist.size else np.zeros(0, dtype=int)
    for k in range(n_bins):
        sel = err[idx == k]
        lo, hi = k * bin_width, (k + 1) * bin_width
        if sel.size:
            bins.append(MceBin(lo, hi, float(sel.mean()), float(sel.std()), int(sel.size)))
        else:
            bins.append(MceBin(lo, hi, math.nan, math.nan, 0))
    return MceCurve(bins)
