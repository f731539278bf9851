"""Brute-force reference computations for checking the evaluation code.

Nothing here imports the geometry or evaluation helpers it is meant to
check: boxes are tested point-by-point in their own frames, and precision /
recall are enumerated at every rank cut with exact rational recall.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

CHUNK = 1 << 20


def _extent(box):
    """Axis-aligned half extents of the footprint in X and Z."""
    h, w, l = box.dims
    c, s = abs(math.cos(box.yaw)), abs(math.sin(box.yaw))
    return 0.5 * l * c + 0.5 * w * s, 0.5 * l * s + 0.5 * w * c


def _inside(box, x, y, z, with_height):
    h, w, l = box.dims
    cx, cy, cz = box.center
    dx, dz = x - cx, z - cz
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    # inverse of the KITTI yaw rotation
    lx = c * dx - s * dz
    lz = s * dx + c * dz
    ok = (np.abs(lx) <= 0.5 * l) & (np.abs(lz) <= 0.5 * w)
    if with_height:
        ok &= np.abs(y - cy) <= 0.5 * h
    return ok


def mc_iou(a, b, n_samples=1_000_000, seed=0, mode="bev"):
    """Monte-Carlo IoU of two upright boxes; returns ``(estimate, std_error)``.

    Points are drawn uniformly over the bounding region of both boxes;
    the estimate is the fraction of points in the union that also lie in
    the intersection.
    """
    if n_samples < 1000:
        raise ValueError("mc_iou needs at least 1000 samples")
    with_height = mode == "3d"
    rng = np.random.Generator(np.random.PCG64(seed))
    (ax, az), (bx, bz) = _extent(a), _extent(b)
    x_lo = min(a.center[0] - ax, b.center[0] - bx)
    x_hi = max(a.center[0] + ax, b.center[0] + bx)
    z_lo = min(a.center[2] - az, b.center[2] - bz)
    z_hi = max(a.center[2] + az, b.center[2] + bz)
    y_lo = min(a.center[1] - a.dims[0] / 2, b.center[1] - b.dims[0] / 2)
    y_hi = max(a.center[1] + a.dims[0] / 2, b.center[1] + b.dims[0] / 2)
    n_union = n_inter = 0
    left = n_samples
    while left > 0:
        m = min(left, CHUNK)
        left -= m
        x = rng.uniform(x_lo, x_hi, m)
        z = rng.uniform(z_lo, z_hi, m)
        y = rng.uniform(y_lo, y_hi, m) if with_height else None
        ia = _inside(a, x, y, z, with_height)
        ib = _inside(b, x, y, z, with_height)
        n_union += int(np.count_nonzero(ia | ib))
        n_inter += int(np.count_nonzero(ia & ib))
    if n_union == 0:
        return 0.0, 0.0
    p = n_inter / n_union
    return p, math.sqrt(p * (1.0 - p) / n_union)


def brute_force_box2d(cam, box):
    """Project each of the 8 corners one at a time and take min/max."""
    h, w, l = box.dims
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    us, vs = [], []
    for sx in (-1, 1):
        for sy in (-1, 1):
            for sz in (-1, 1):
                lx, ly, lz = sx * l / 2, sy * h / 2, sz * w / 2
                X = box.center[0] + c * lx + s * lz
                Y = box.center[1] + ly
                Z = box.center[2] - s * lx + c * lz
                us.append(cam.f * X / Z + cam.p_x)
                vs.append(cam.f * Y / Z + cam.p_y)
    return min(us), min(vs), max(us), max(vs)


def brute_force_ap(flags, scores, gt_count, ap_mode=11):
    """Interpolated AP by explicit enumeration of every rank cut.

    ``flags`` uses 1 for a true positive, 0 for a false positive and -1 for
    an ignored detection (dropped).
    """
    if gt_count <= 0:
        return None
    ranked = sorted(((float(sc), int(fl)) for sc, fl in zip(scores, flags) if int(fl) != -1),
                    key=lambda t: -t[0])
    if not ranked:
        return 0.0
    cuts = []
    tp = fp = 0
    for _, fl in ranked:
        if fl == 1:
            tp += 1
        else:
            fp += 1
        cuts.append((Fraction(tp, gt_count), tp / (tp + fp)))
    if ap_mode == 11:
        levels = [Fraction(k, 10) for k in range(11)]
    elif ap_mode == 40:
        levels = [Fraction(k, 40) for k in range(1, 41)]
    else:
        raise ValueError("ap_mode must be 11 or 40")
    total = 0.0
    for r in levels:
        best = 0.0
        for rec, prec in cuts:
            if rec >= r and prec > best:
                best = prec
        total += best
    return total / len(levels)
