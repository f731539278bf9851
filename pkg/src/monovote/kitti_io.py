"""KITTI calibration, label and result files.

Internally a 3D box is located at its geometric centroid. KITTI stores the
centre of the bottom face instead, so ``Y_kitti = Y_centroid + H / 2``; the
conversion happens only here.
"""

from __future__ import annotations

import math
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError, MonovoteError, ParseError, ValidationError
from .geometry import KITTI_IMAGE_SIZE, Box2D, Box3D, CameraIntrinsics

KNOWN_CLASSES = frozenset({
    "Car", "Van", "Truck", "Pedestrian", "Person_sitting", "Cyclist", "Tram", "Misc", "DontCare",
})
DONTCARE = "DontCare"
OTHER = "Other"

_TOKEN = re.compile(r"\S+")


@dataclass(frozen=True)
class GroundTruthObject:
    class_name: str
    truncation: float
    occlusion: int
    alpha: float
    box2d: Box2D | None
    box3d: Box3D | None
    source_location_y: float | None = None

    @property
    def is_dontcare(self):
        return self.class_name == DONTCARE


@dataclass(frozen=True)
class DetectionRecord:
    class_name: str
    alpha: float
    box2d: Box2D
    box3d: Box3D
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"score {self.score} outside [0, 1]")


def _decode(text):
    if isinstance(text, (bytes, bytearray)):
        try:
            return bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"input is not valid UTF-8 ({exc.reason})", column=exc.start + 1) from None
    return text


def _tokens(line):
    """Whitespace tokens with their 1-based character columns."""
    return [(m.group(), m.start() + 1) for m in _TOKEN.finditer(line)]


def _float(tok, col, line_no=None):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", line=line_no, column=col) from None


def parse_calibration(text, camera="P2", image_size=KITTI_IMAGE_SIZE) -> CameraIntrinsics:
    """Read the pinhole intrinsics of ``camera`` from a KITTI calib file.

    Skew and the translation column of the projection matrix are dropped.
    An optional ``IMAGE_SIZE: W H`` line overrides ``image_size``.
    """
    text = _decode(text)
    key = camera.rstrip(":") + ":"
    matrix = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        toks = _tokens(line)
        if not toks:
            continue
        head = toks[0][0]
        if head == "IMAGE_SIZE:":
            if len(toks) != 3:
                raise FormatError("IMAGE_SIZE needs 2 values", line=line_no)
            image_size = tuple(_float(t, c, line_no) for t, c in toks[1:])
        elif head == key:
            if len(toks) != 13:
                raise FormatError(f"{key} needs 12 values, got {len(toks) - 1}", line=line_no)
            matrix = [_float(t, c, line_no) for t, c in toks[1:]]
    if matrix is None:
        raise FormatError(f"no {key} line in calibration")
    f, p_x, p_y = matrix[0], matrix[2], matrix[6]
    if not all(math.isfinite(v) for v in (f, p_x, p_y)):
        raise ValidationError(f"non-finite intrinsics in {key}")
    if f <= 0:
        raise ValidationError(f"focal length must be positive, got {f}")
    return CameraIntrinsics(f, p_x, p_y, image_size[0], image_size[1])


def format_calibration(cam: CameraIntrinsics, include_image_size=True) -> str:
    """Write a KITTI-shaped calib file with zero baselines for every camera."""
    p = [cam.f, 0.0, cam.p_x, 0.0, 0.0, cam.f, cam.p_y, 0.0, 0.0, 0.0, 1.0, 0.0]
    row = " ".join(f"{v:.12e}" for v in p)
    eye3 = " ".join(f"{v:.12e}" for v in (1, 0, 0, 0, 1, 0, 0, 0, 1))
    tr = " ".join(f"{v:.12e}" for v in (0, -1, 0, 0, 0, 0, -1, 0, 1, 0, 0, 0))
    lines = [f"P{i}: {row}" for i in range(4)]
    lines += [f"R0_rect: {eye3}", f"Tr_velo_to_cam: {tr}", f"Tr_imu_to_velo: {tr}"]
    if include_image_size:
        lines.append(f"IMAGE_SIZE: {cam.image_width:g} {cam.image_height:g}")
    return "\n".join(lines) + "\n"


def _normalize_class(name):
    return name if name in KNOWN_CLASSES else OTHER


def _parse_fields(line, line_no, n_min, n_max):
    line = _decode(line)
    toks = _tokens(line)
    if len(toks) < n_min:
        raise FormatError(f"expected at least {n_min} fields, got {len(toks)}", line=line_no)
    if len(toks) > n_max:
        raise FormatError(f"expected at most {n_max} fields, got {len(toks)}", line=line_no)
    name = toks[0][0]
    nums = [_float(t, c, line_no) for t, c in toks[1:]]
    return name, nums


def _geometry(nums, line_no):
    """Build (alpha, Box2D, Box3D, raw_y) from the 14 numeric label fields."""
    _, _, alpha, x1, y1, x2, y2, h, w, l, x, y, z, ry = nums[:14]
    if not all(math.isfinite(v) for v in nums[:14]):
        raise ValidationError("non-finite value", line=line_no)
    if h <= 0 or w <= 0 or l <= 0:
        raise ValidationError(f"dimensions must be positive, got H={h} W={w} L={l}", line=line_no)
    try:
        box2d = Box2D(x1, y1, x2, y2)
        box3d = Box3D((x, y - h / 2.0, z), (h, w, l), ry)
    except ValidationError as exc:
        raise exc.at(line=line_no) from None
    return alpha, box2d, box3d, y


def parse_label_line(line, line_no=None) -> GroundTruthObject:
    """Parse one KITTI label row (15 fields; a trailing score is tolerated).

    DontCare rows keep only their 2D region; their 3D fields are sentinels
    and are not validated.
    """
    name, nums = _parse_fields(line, line_no, 15, 16)
    if name == DONTCARE:
        x1, y1, x2, y2 = nums[3:7]
        try:
            box2d = Box2D(x1, y1, x2, y2)
        except ValidationError:
            box2d = None
        return GroundTruthObject(DONTCARE, -1.0, -1, nums[2], box2d, None, None)
    truncation, occlusion = nums[0], nums[1]
    if not 0.0 <= truncation <= 1.0:
        raise ValidationError(f"truncation {truncation} outside [0, 1]", line=line_no)
    if occlusion not in (0, 1, 2, 3):
        raise ValidationError(f"occlusion {occlusion} not in {{0,1,2,3}}", line=line_no)
    alpha, box2d, box3d, raw_y = _geometry(nums, line_no)
    return GroundTruthObject(_normalize_class(name), truncation, int(occlusion), alpha,
                             box2d, box3d, raw_y)


def parse_detection_line(line, line_no=None) -> DetectionRecord:
    """Parse one KITTI result row: label fields plus a trailing score."""
    name, nums = _parse_fields(line, line_no, 16, 16)
    alpha, box2d, box3d, _ = _geometry(nums, line_no)
    score = nums[14]
    if not 0.0 <= score <= 1.0:
        raise ValidationError(f"score {score} outside [0, 1]", line=line_no)
    return DetectionRecord(_normalize_class(name), alpha, box2d, box3d, score)


def _location_fields(box3d: Box3D, min_dim=0.0):
    h, w, l = (max(v, min_dim) for v in box3d.dims)
    x, y, z = box3d.center
    return (h, w, l, x, y + h / 2.0, z, box3d.yaw)


def write_detection_line(d: DetectionRecord) -> str:
    """One KITTI result row; truncation and occlusion are written as -1."""
    # dims are floored at the last printed decimal so they never read back as 0
    vals = (d.alpha, d.box2d.x1, d.box2d.y1, d.box2d.x2, d.box2d.y2,
            *_location_fields(d.box3d, min_dim=1e-6), d.score)
    return f"{d.class_name} -1 -1 " + " ".join(f"{v:.6f}" for v in vals)


def write_label_line(g: GroundTruthObject) -> str:
    if g.is_dontcare:
        b = g.box2d
        x1, y1, x2, y2 = (b.x1, b.y1, b.x2, b.y2) if b is not None else (-1, -1, -1, -1)
        return (f"DontCare -1 -1 -10 {x1:.6f} {y1:.6f} {x2:.6f} {y2:.6f} "
                "-1 -1 -1 -1000 -1000 -1000 -10")
    # labels keep 10 significant digits so sub-micron synthetic extents survive
    vals = (g.alpha, g.box2d.x1, g.box2d.y1, g.box2d.x2, g.box2d.y2, *_location_fields(g.box3d))
    return f"{g.class_name} {g.truncation:.6f} {g.occlusion:d} " + " ".join(f"{v:.10g}" for v in vals)


def _read_lines(path, parse):
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read file ({exc.strerror})", path=path) from None
    try:
        text = _decode(data)
    except FormatError as exc:
        raise exc.at(path=path) from None
    out = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(parse(line, line_no))
        except (FormatError, ValidationError) as exc:
            raise exc.at(path=path, line=line_no) from None
    return out


def read_labels(path) -> list[GroundTruthObject]:
    return _read_lines(path, parse_label_line)


def read_detections(path) -> list[DetectionRecord]:
    return _read_lines(path, parse_detection_line)


def read_calibration(path, camera="P2", image_size=KITTI_IMAGE_SIZE) -> CameraIntrinsics:
    path = Path(path)
    try:
        return parse_calibration(path.read_bytes(), camera=camera, image_size=image_size)
    except (FormatError, ValidationError) as exc:
        raise exc.at(path=path) from None
    except OSError as exc:
        raise FormatError(f"cannot read file ({exc.strerror})", path=path) from None


def frame_id(path) -> str:
    return Path(path).stem


def frame_path(directory, fid, suffix=".txt") -> Path:
    return Path(directory) / f"{fid}{suffix}"


def list_frames(directory, suffix=".txt") -> list[str]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError("not a directory", path=directory)
    return sorted(p.stem for p in directory.iterdir() if p.suffix == suffix and p.is_file())


def format_frame_id(i: int) -> str:
    return f"{i:06d}"


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_lines(path, lines):
    atomic_write(path, "".join(f"{ln}\n" for ln in lines))


__all__ = [
    "GroundTruthObject", "DetectionRecord", "CameraIntrinsics", "MonovoteError",
    "parse_calibration", "format_calibration", "parse_label_line", "parse_detection_line",
    "write_detection_line", "write_label_line", "read_labels", "read_detections",
    "read_calibration", "list_frames", "frame_path", "frame_id", "format_frame_id",
    "atomic_write", "write_lines", "DONTCARE", "OTHER", "KNOWN_CLASSES",
]
