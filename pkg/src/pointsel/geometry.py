"""Pinhole camera model and 3D primitives.

Camera frame convention used everywhere in this package: +z along the optical
axis into the scene, +u right, +v down. All 3D quantities are meters.

Pure functions on immutable values; safe to call from any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Below this endpoint separation, keypoint noise dominates the ray direction;
# we refuse to build a ray rather than emit garbage.
MIN_RAY_BASELINE_M = 1e-3


class GeometryError(ValueError):
    pass


class InvalidDepthError(GeometryError):
    pass


class PixelBoundsError(GeometryError):
    pass


class BehindCameraError(GeometryError):
    pass


class DegenerateRayError(GeometryError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    depth_scale: float  # meters per raw depth unit

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError(f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image")
        if self.depth_scale <= 0:
            raise GeometryError(f"depth_scale must be positive, got {self.depth_scale}")


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y}, {self.z})")

    def __sub__(self, other: "Point3") -> tuple[float, float, float]:
        return (self.x - other.x, self.y - other.y, self.z - other.z)

    def distance_to(self, other: "Point3") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class Ray3:
    origin: Point3
    direction: tuple[float, float, float]  # unit vector

    def __post_init__(self):
        n = math.hypot(*self.direction)
        if abs(n - 1.0) > 1e-9:
            raise GeometryError(f"ray direction not unit length (norm {n})")

    def point_at(self, t: float) -> Point3:
        dx, dy, dz = self.direction
        o = self.origin
        return Point3(o.x + t * dx, o.y + t * dy, o.z + t * dz)


def deproject(u: float, v: float, depth_m: float, intr: CameraIntrinsics) -> Point3:
    """Back-project a pixel plus metric depth to a camera-frame point."""
    if depth_m <= 0:
        raise InvalidDepthError(f"depth must be positive, got {depth_m}")
    if not (0 <= u < intr.width and 0 <= v < intr.height):
        raise PixelBoundsError(f"pixel ({u}, {v}) outside {intr.width}x{intr.height} image")
    z = depth_m
    return Point3((u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z)


def project(p: Point3, intr: CameraIntrinsics) -> tuple[float, float]:
    """Project a camera-frame point to pixel coordinates.

    The result may lie outside image bounds; callers clip.
    """
    if p.z <= 0:
        raise BehindCameraError(f"cannot project point with z={p.z}")
    return (intr.fx * p.x / p.z + intr.cx, intr.fy * p.y / p.z + intr.cy)


def ray_from_points(proximal: Point3, distal: Point3) -> Ray3:
    """Ray through two points, pointing from proximal toward distal."""
    dx, dy, dz = distal - proximal
    n = math.hypot(dx, dy, dz)
    if n <= MIN_RAY_BASELINE_M:
        raise DegenerateRayError(f"baseline {n:.2e} m below minimum {MIN_RAY_BASELINE_M} m")
    return Ray3(proximal, (dx / n, dy / n, dz / n))


def point_ray_distance(p: Point3, r: Ray3) -> tuple[float, float]:
    """Perpendicular distance from a point to a ray's supporting line.

    Returns (distance, t) where t is the unclamped ray parameter of the foot
    point; callers reject t <= 0 to exclude points behind the ray origin.
    """
    wx, wy, wz = p - r.origin
    dx, dy, dz = r.direction
    t = wx * dx + wy * dy + wz * dz
    ex, ey, ez = wx - t * dx, wy - t * dy, wz - t * dz
    return (math.hypot(ex, ey, ez), t)
