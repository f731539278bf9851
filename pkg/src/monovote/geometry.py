"""Pinhole camera and oriented 3D box geometry.

Camera frame follows KITTI: X right, Y down, Z forward, metres. Image
coordinates are pixels with the origin at the top-left corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BehindCameraError, DomainError, ValidationError

KITTI_IMAGE_SIZE = (1242, 375)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Rectified pinhole camera: focal length and principal point, in pixels."""

    f: float
    p_x: float
    p_y: float
    image_width: float = KITTI_IMAGE_SIZE[0]
    image_height: float = KITTI_IMAGE_SIZE[1]

    def __post_init__(self):
        if not (math.isfinite(self.f) and self.f > 0):
            raise ValidationError(f"focal length must be positive, got {self.f}")
        if not (self.image_width > 0 and self.image_height > 0):
            raise ValidationError("image size must be positive")
        if not 0 <= self.p_x <= self.image_width:
            raise ValidationError(f"p_x={self.p_x} outside image width {self.image_width}")
        if not 0 <= self.p_y <= self.image_height:
            raise ValidationError(f"p_y={self.p_y} outside image height {self.image_height}")

    def scaled(self, k):
        """Camera whose focal length, principal point and image size are scaled by ``k``."""
        return CameraIntrinsics(self.f * k, self.p_x * k, self.p_y * k,
                                self.image_width * k, self.image_height * k)


@dataclass(frozen=True)
class Box2D:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError(f"non-finite 2D box {vals}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValidationError(f"malformed 2D box {vals}: need x1<x2 and y1<y2")

    def height(self):
        return self.y2 - self.y1

    def width(self):
        return self.x2 - self.x1

    def center(self):
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    def area(self):
        return self.width() * self.height()

    def as_array(self):
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=float)


@dataclass(frozen=True)
class Box3D:
    """Upright box: geometric centroid, dimensions ``(H, W, L)`` and yaw about camera Y.

    At ``yaw == 0`` the length runs along X and the width along Z, as in the
    KITTI devkit. The yaw range is not enforced; KITTI labels use [-pi, pi].
    """

    center: tuple
    dims: tuple
    yaw: float = 0.0

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        dims = tuple(float(d) for d in self.dims)
        if len(center) != 3 or len(dims) != 3:
            raise ValidationError("Box3D needs a 3-vector center and (H, W, L) dims")
        if not all(math.isfinite(v) for v in center + dims + (float(self.yaw),)):
            raise ValidationError(f"non-finite Box3D values {center} {dims} {self.yaw}")
        if not all(d > 0 for d in dims):
            raise ValidationError(f"Box3D dimensions must be positive, got {dims}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "yaw", float(self.yaw))

    @property
    def h(self):
        return self.dims[0]

    @property
    def w(self):
        return self.dims[1]

    @property
    def l(self):  # noqa: E743
        return self.dims[2]

    def volume(self):
        return self.dims[0] * self.dims[1] * self.dims[2]


def project_point(cam: CameraIntrinsics, p) -> np.ndarray:
    """Project camera-frame points of shape ``(..., 3)`` to pixels ``(..., 2)``."""
    p = np.asarray(p, dtype=float)
    z = p[..., 2]
    if np.any(~(z > 0)):
        raise BehindCameraError(f"cannot project point with Z <= 0 (min Z = {np.min(z)})")
    u = cam.f * p[..., 0] / z + cam.p_x
    v = cam.f * p[..., 1] / z + cam.p_y
    return np.stack([u, v], axis=-1)


def backproject(cam: CameraIntrinsics, u, v, z) -> np.ndarray:
    """Lift pixel ``(u, v)`` to the camera-frame point at depth ``z``."""
    u, v, z = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (u, v, z)))
    if np.any(~(z > 0)):
        raise DomainError("back-projection depth must be positive")
    x = (u - cam.p_x) * z / cam.f
    y = (v - cam.p_y) * z / cam.f
    return np.stack([x, y, z], axis=-1)


# Unit corner offsets in box-local (x along L, y along H, z along W).
# Bottom face (y = +H/2, Y points down) first, counterclockwise in the (X, Z)
# plane seen from above, then the top face in the same order.
_CORNER_SIGNS = np.array([
    [1, 1, -1],
    [1, 1, 1],
    [-1, 1, 1],
    [-1, 1, -1],
    [1, -1, -1],
    [1, -1, 1],
    [-1, -1, 1],
    [-1, -1, -1],
], dtype=float)


def yaw_matrix(yaw):
    """Rotation about camera Y with the KITTI ``rotation_y`` sign convention."""
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def box3d_corners(b: Box3D) -> np.ndarray:
    """The 8 corners, shape ``(8, 3)``: bottom face CCW from above, then top face."""
    h, w, l = b.dims
    local = _CORNER_SIGNS * np.array([l / 2, h / 2, w / 2])
    return local @ yaw_matrix(b.yaw).T + np.asarray(b.center)


def project_box3d_to_box2d(cam: CameraIntrinsics, b: Box3D, clip=False) -> Box2D:
    """Tightest axis-aligned image rectangle around the projected corners.

    With ``clip=True`` the rectangle is intersected with the image frame.
    """
    uv = project_point(cam, box3d_corners(b))
    x1, y1 = uv.min(axis=0)
    x2, y2 = uv.max(axis=0)
    if clip:
        x1, x2 = np.clip([x1, x2], 0.0, cam.image_width)
        y1, y2 = np.clip([y1, y2], 0.0, cam.image_height)
    return Box2D(float(x1), float(y1), float(x2), float(y2))


def bev_footprint(b: Box3D) -> np.ndarray:
    """Footprint rectangle in the (X, Z) plane, shape ``(4, 2)``, counterclockwise."""
    return box3d_corners(b)[:4, [0, 2]]


def polygon_area(poly) -> float:
    """Signed shoelace area; positive for counterclockwise winding."""
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
