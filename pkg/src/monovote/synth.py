"""Deterministic synthetic KITTI-style scenes.

Objects stand on a flat ground plane seen by a KITTI-like camera; their 2D
boxes are exact projections of the 3D boxes, optionally jittered. Every
frame draws from its own PCG64 stream seeded with ``SeedSequence([seed,
frame_index, stream])``, so frames can be generated in any order or in
parallel with identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .centroid import grid_coordinates
from .errors import FormatError, ParseError, ValidationError
from .geometry import Box2D, Box3D, CameraIntrinsics, project_box3d_to_box2d, project_point
from .kitti_io import (GroundTruthObject, atomic_write, format_calibration, format_frame_id,
                       write_label_line)
from .voting import format_attention_rows, offsets_from_center

BILLBOARD_DEPTH = 1e-9

_STREAM_SCENE = 0
_STREAM_ATTENTION = 1


@dataclass(frozen=True)
class ClassSpec:
    """Sampling weight and Gaussian (mean, std) for H, W, L in metres."""

    weight: float
    h: tuple
    w: tuple
    l: tuple


# Means and spreads of KITTI training labels.
DEFAULT_CLASSES = {
    "Car": ClassSpec(1.0, (1.53, 0.10), (1.63, 0.10), (3.88, 0.40)),
}
EXTRA_CLASSES = {
    "Pedestrian": ClassSpec(1.0, (1.76, 0.11), (0.66, 0.14), (0.84, 0.23)),
    "Cyclist": ClassSpec(1.0, (1.74, 0.09), (0.60, 0.12), (1.76, 0.18)),
}


@dataclass(frozen=True)
class SceneConfig:
    seed: int = 0
    n_frames: int = 10
    n_objects: tuple = (1, 6)
    depth_range: tuple = (5.0, 60.0)
    yaw_mode: str = "uniform"  # uniform | road | fixed
    yaw_value: float = 0.0
    classes: dict = field(default_factory=lambda: dict(DEFAULT_CLASSES))
    camera: CameraIntrinsics = CameraIntrinsics(721.5377, 609.5593, 172.854, 1242, 375)
    camera_height: float = 1.65
    occlusion_rate: float = 0.0
    jitter_std: float = 0.0
    billboard: bool = False
    grid: int = 7
    attention_spread: float = 0.25
    attention_noise: float = 0.05
    min_separation: float = 4.0

    def __post_init__(self):
        lo, hi = self.n_objects
        if not 0 <= lo <= hi:
            raise ValidationError(f"bad object count range {self.n_objects}")
        zlo, zhi = self.depth_range
        if not 0 < zlo <= zhi:
            raise ValidationError(f"depth range must be positive and nonempty, got {self.depth_range}")
        if self.yaw_mode not in ("uniform", "road", "fixed"):
            raise ValidationError(f"unknown yaw mode {self.yaw_mode!r}")
        if not self.classes:
            raise ValidationError("class mix is empty")
        if not 0 <= self.occlusion_rate <= 1:
            raise ValidationError("occlusion rate must lie in [0, 1]")
        if self.jitter_std < 0 or self.grid < 1 or self.n_frames < 0:
            raise ValidationError("jitter, grid and frame count must be nonnegative")


def _rng(cfg, frame_index, stream):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, frame_index, stream])))


def _wrap(a):
    return math.pi - (math.pi - a) % (2.0 * math.pi)


def _positive_normal(rng, mean, std):
    return max(rng.normal(mean, std), 0.1 * mean) if std > 0 else mean


def _sample_yaw(cfg, rng):
    if cfg.yaw_mode == "fixed":
        return cfg.yaw_value
    if cfg.yaw_mode == "road":
        return _wrap(rng.choice([-0.5, 0.5]) * math.pi + rng.normal(0.0, 0.1))
    return _wrap(rng.uniform(-math.pi, math.pi))


def _truncation(cam, box):
    cx1, cx2 = np.clip([box.x1, box.x2], 0, cam.image_width)
    cy1, cy2 = np.clip([box.y1, box.y2], 0, cam.image_height)
    inside = max(cx2 - cx1, 0.0) * max(cy2 - cy1, 0.0)
    return float(min(max(1.0 - inside / box.area(), 0.0), 1.0))


def _jitter(box, rng, std):
    if std <= 0:
        return box
    for _ in range(100):
        d = rng.normal(0.0, std, size=4)
        x1, y1, x2, y2 = box.x1 + d[0], box.y1 + d[1], box.x2 + d[2], box.y2 + d[3]
        if x1 < x2 and y1 < y2:
            return Box2D(x1, y1, x2, y2)
    return box


def _sample_object(cfg, rng, name, spec, placed):
    cam = cfg.camera
    for _ in range(50):
        h = _positive_normal(rng, *spec.h)
        w = _positive_normal(rng, *spec.w)
        l = _positive_normal(rng, *spec.l)
        yaw = _sample_yaw(cfg, rng)
        if cfg.billboard:
            w, yaw = BILLBOARD_DEPTH, 0.0
        z = rng.uniform(*cfg.depth_range)
        u = rng.uniform(0.0, cam.image_width)
        x = (u - cam.p_x) * z / cam.f
        y = cfg.camera_height - spec.h[0] / 2.0
        if any(math.hypot(x - px, z - pz) < cfg.min_separation for px, pz in placed):
            continue
        box3d = Box3D((x, y, z), (h, w, l), yaw)
        try:
            exact = project_box3d_to_box2d(cam, box3d)
        except ValidationError:
            continue
        return box3d, exact
    return None


def generate_scene(cfg: SceneConfig, frame_index: int):
    """Camera and ground-truth objects for one frame."""
    rng = _rng(cfg, frame_index, _STREAM_SCENE)
    names = list(cfg.classes)
    weights = np.array([cfg.classes[n].weight for n in names], dtype=float)
    weights /= weights.sum()
    n = int(rng.integers(cfg.n_objects[0], cfg.n_objects[1] + 1))
    objects, placed = [], []
    for _ in range(n):
        name = names[int(rng.choice(len(names), p=weights))]
        sample = _sample_object(cfg, rng, name, cfg.classes[name], placed)
        if sample is None:
            continue
        box3d, exact = sample
        box2d = _jitter(exact, rng, cfg.jitter_std)
        occ = int(rng.choice([1, 2])) if rng.uniform() < cfg.occlusion_rate else 0
        x, _, z = box3d.center
        alpha = _wrap(box3d.yaw - math.atan2(x, z))
        objects.append(GroundTruthObject(name, _truncation(cfg.camera, exact), occ, alpha,
                                         box2d, box3d, box3d.center[1] + box3d.h / 2.0))
        placed.append((x, z))
    return cfg.camera, objects


def projection_offset(cam: CameraIntrinsics, obj, normalized=True):
    """Offset of the projected 3D centroid from the 2D box centre."""
    p = project_point(cam, obj.box3d.center)
    return offsets_from_center(obj.box2d, p, normalized)


def synth_attention(cfg: SceneConfig, cam, objects, frame_index):
    """Appearance attention per object: a bump around the projected centroid,
    replaced by a saturated block on one side of the grid for occluded objects."""
    rng = _rng(cfg, frame_index, _STREAM_ATTENTION)
    s = cfg.grid
    maps = []
    for o in objects:
        if o.is_dontcare:
            continue
        pts = grid_coordinates(o.box2d, s)
        c = project_point(cam, o.box3d.center)
        d = (pts - c) / np.array([o.box2d.width(), o.box2d.height()])
        m = np.exp(-0.5 * np.sum(d * d, axis=-1) / cfg.attention_spread ** 2)
        m = m + rng.uniform(-cfg.attention_noise, cfg.attention_noise, size=m.shape)
        if o.occlusion > 0:
            half = slice(0, (s + 1) // 2) if rng.uniform() < 0.5 else slice(s // 2, s)
            block = rng.uniform(0.85, 1.0, size=m.shape)
            if rng.uniform() < 0.5:
                m[:, half] = block[:, half]
            else:
                m[half, :] = block[half, :]
        maps.append(np.clip(m, 0.0, 1.0))
    return maps


@dataclass
class SynthFrame:
    frame_id: str
    camera: CameraIntrinsics
    objects: list
    attention: list


def generate_corpus(cfg: SceneConfig, n_frames=None, start=0):
    n = cfg.n_frames if n_frames is None else n_frames
    frames = []
    for i in range(start, start + n):
        cam, objs = generate_scene(cfg, i)
        frames.append(SynthFrame(format_frame_id(i), cam, objs, synth_attention(cfg, cam, objs, i)))
    return frames


def write_corpus(frames, out_dir, cfg: SceneConfig):
    """KITTI layout: ``calib/``, ``label_2/``, ``aam/`` and ``offsets.csv``."""
    out = Path(out_dir)
    offset_rows = ["frame_id,object_id,du,dv"]
    for fr in frames:
        atomic_write(out / "calib" / f"{fr.frame_id}.txt", format_calibration(fr.camera))
        atomic_write(out / "label_2" / f"{fr.frame_id}.txt",
                     "".join(write_label_line(o) + "\n" for o in fr.objects))
        atomic_write(out / "aam" / f"{fr.frame_id}.csv", format_attention_rows(fr.attention))
        for k, o in enumerate(fr.objects):
            du, dv = projection_offset(fr.camera, o, normalized=True)
            offset_rows.append(f"{fr.frame_id},{k},{float(du)!r},{float(dv)!r}")
    atomic_write(out / "offsets.csv", "\n".join(offset_rows) + "\n")
    atomic_write(out / "synth.cfg", format_config(cfg))


# -- config files ----------------------------------------------------------------

def _floats(val, n, key, line_no):
    parts = val.split()
    if len(parts) != n:
        raise FormatError(f"{key} needs {n} value(s)", line=line_no)
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ParseError(f"{key}: {exc}", line=line_no) from None


def parse_config(text) -> SceneConfig:
    """Parse ``key = value`` lines (``#`` starts a comment). See README for keys."""
    kw = {}
    classes = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError("expected 'key = value'", line=line_no)
        key, val = (p.strip() for p in line.split("=", 1))
        if key.startswith("class."):
            v = _floats(val, 7, key, line_no)
            classes[key[6:]] = ClassSpec(v[0], tuple(v[1:3]), tuple(v[3:5]), tuple(v[5:7]))
        elif key in ("seed", "n_frames", "grid"):
            kw[key] = int(_floats(val, 1, key, line_no)[0])
        elif key == "n_objects":
            kw[key] = tuple(int(v) for v in _floats(val, 2, key, line_no))
        elif key == "depth_range":
            kw[key] = tuple(_floats(val, 2, key, line_no))
        elif key in ("jitter_std", "occlusion_rate", "camera_height", "attention_spread",
                     "attention_noise", "min_separation"):
            kw[key] = _floats(val, 1, key, line_no)[0]
        elif key == "billboard":
            if val.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ParseError(f"billboard must be a boolean, got {val!r}", line=line_no)
            kw[key] = val.lower() in ("true", "1", "yes")
        elif key == "yaw":
            parts = val.split()
            kw["yaw_mode"] = parts[0] if parts else ""
            if parts and parts[0] == "fixed":
                kw["yaw_value"] = _floats(" ".join(parts[1:]), 1, key, line_no)[0]
        elif key == "camera":
            f, px, py, w, h = _floats(val, 5, key, line_no)
            kw[key] = CameraIntrinsics(f, px, py, w, h)
        else:
            raise FormatError(f"unknown key {key!r}", line=line_no)
    if classes:
        kw["classes"] = classes
    return SceneConfig(**kw)


def format_config(cfg: SceneConfig) -> str:
    cam = cfg.camera
    yaw = "fixed %r" % cfg.yaw_value if cfg.yaw_mode == "fixed" else cfg.yaw_mode
    lines = [
        f"seed = {cfg.seed}",
        f"n_frames = {cfg.n_frames}",
        f"n_objects = {cfg.n_objects[0]} {cfg.n_objects[1]}",
        f"depth_range = {cfg.depth_range[0]!r} {cfg.depth_range[1]!r}",
        f"yaw = {yaw}",
        f"camera = {cam.f!r} {cam.p_x!r} {cam.p_y!r} {cam.image_width!r} {cam.image_height!r}",
        f"camera_height = {cfg.camera_height!r}",
        f"occlusion_rate = {cfg.occlusion_rate!r}",
        f"jitter_std = {cfg.jitter_std!r}",
        f"billboard = {str(cfg.billboard).lower()}",
        f"grid = {cfg.grid}",
        f"attention_spread = {cfg.attention_spread!r}",
        f"attention_noise = {cfg.attention_noise!r}",
        f"min_separation = {cfg.min_separation!r}",
    ]
    for name, c in cfg.classes.items():
        vals = (c.weight, *c.h, *c.w, *c.l)
        lines.append(f"class.{name} = " + " ".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n"


def billboard_config(**overrides) -> SceneConfig:
    """Zero-jitter billboard corpus with a fixed per-class height."""
    base = SceneConfig(billboard=True, jitter_std=0.0,
                       classes={"Car": ClassSpec(1.0, (1.53, 0.0), (1.63, 0.0), (3.88, 0.4))})
    return replace(base, **overrides)
