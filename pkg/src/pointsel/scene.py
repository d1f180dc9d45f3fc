"""Selectable-object representation.

Binary segmentation masks (run-length encoded on the wire), robust depth
sampling, and 3D spatial centroids computed from mask pixels + depth.

Raw depth value 0 means "invalid / no return", matching common RGB-D sensor
output. Centroids reject depth outliers with a MAD gate because segmentation
masks bleed onto the background at silhouette edges; without the gate the
centroid drifts backward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from pointsel import kernels
from pointsel.geometry import CameraIntrinsics, Point3

# Outliers beyond this many MADs from the median depth are discarded.
MAD_FACTOR = 2.0


class MaskFormatError(ValueError):
    pass


class ShapeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class DepthFrame:
    width: int
    height: int
    data: np.ndarray  # (height, width) uint16 raw depth units
    depth_scale: float  # meters per unit

    def __post_init__(self):
        if self.data.shape != (self.height, self.width):
            raise ShapeMismatchError(f"depth data shape {self.data.shape} != ({self.height}, {self.width})")

    @classmethod
    def constant(cls, width, height, raw_value, depth_scale):
        data = np.full((height, width), raw_value, dtype=np.uint16)
        return cls(width, height, data, depth_scale)


@dataclass(frozen=True)
class ObjectMask:
    """Row-major RLE, alternating background/foreground runs, background first."""

    width: int
    height: int
    runs: tuple[int, ...]

    def __post_init__(self):
        if any(r < 0 for r in self.runs):
            raise MaskFormatError("negative run length")
        if sum(self.runs) != self.width * self.height:
            raise MaskFormatError(f"runs sum to {sum(self.runs)}, expected {self.width * self.height}")


def rle_encode(bitmap: np.ndarray) -> ObjectMask:
    """Encode a 2D boolean array. Inverse of rle_decode (exact round-trip)."""
    h, w = bitmap.shape
    flat = np.asarray(bitmap, dtype=bool).ravel()
    if flat.size == 0:
        return ObjectMask(w, h, ())
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:  # encoding starts with a background run, possibly empty
        runs = [0] + runs
    return ObjectMask(w, h, tuple(int(r) for r in runs))


def rle_decode(mask: ObjectMask) -> np.ndarray:
    flat = np.zeros(mask.width * mask.height, dtype=bool)
    pos = 0
    fg = False
    for run in mask.runs:
        if fg:
            flat[pos : pos + run] = True
        pos += run
        fg = not fg
    return flat.reshape(mask.height, mask.width)


def mask_foreground_coords(mask: ObjectMask) -> tuple[np.ndarray, np.ndarray]:
    """(us, vs) pixel coordinates of foreground pixels, row-major order."""
    vs, us = np.nonzero(rle_decode(mask))
    return us, vs


@dataclass(frozen=True)
class SceneObject:
    id: int
    label: str
    mask: ObjectMask
    centroid: Optional[Point3] = None
    pixel_count: int = 0


def sample_depth_robust(u: int, v: int, depth: DepthFrame, window: int = 5) -> Optional[float]:
    """Median valid depth (meters) in a window x window neighborhood.

    None when every pixel in the window is invalid. Window must be odd.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    r = window // 2
    u, v = int(round(u)), int(round(v))
    u0, u1 = max(0, u - r), min(depth.width, u + r + 1)
    v0, v1 = max(0, v - r), min(depth.height, v + r + 1)
    if u0 >= u1 or v0 >= v1:
        return None
    patch = depth.data[v0:v1, u0:u1]
    valid = patch[patch > 0]
    if valid.size == 0:
        return None
    return float(np.median(valid)) * depth.depth_scale


def compute_centroid(
    mask: ObjectMask, depth: DepthFrame, intr: CameraIntrinsics
) -> Optional[tuple[Point3, int]]:
    """Mean deprojected position of the mask's valid-depth pixels.

    Depths beyond MAD_FACTOR x MAD of the median are discarded before
    averaging (edge-bleed rejection); the band gets a one-raw-unit floor so a
    perfectly flat plane does not reject its own quantization. None when no
    pixel survives.
    """
    if (mask.width, mask.height) != (depth.width, depth.height):
        raise ShapeMismatchError(
            f"mask {mask.width}x{mask.height} vs depth {depth.width}x{depth.height}"
        )
    us, vs = mask_foreground_coords(mask)
    raw = depth.data[vs, us]
    valid = raw > 0
    if not valid.any():
        return None
    zs = raw[valid].astype(np.float64) * depth.depth_scale
    x, y, z, count = kernels.masked_centroid(
        us[valid].astype(np.float64),
        vs[valid].astype(np.float64),
        zs,
        intr.fx,
        intr.fy,
        intr.cx,
        intr.cy,
        MAD_FACTOR,
        depth.depth_scale,
    )
    if count == 0:
        return None
    return Point3(x, y, z), count


def mask_outline(mask: ObjectMask, step: int = 4) -> list[tuple[int, int]]:
    """Decimated outline polygon of the mask's foreground, for UI overlays.

    Boundary pixels ordered by angle around the blob center; every step-th
    point kept. Good enough for convex-ish object footprints.
    """
    bitmap = rle_decode(mask)
    vs, us = np.nonzero(bitmap)
    if us.size == 0:
        return []
    padded = np.pad(bitmap, 1)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    boundary = bitmap & ~interior
    bv, bu = np.nonzero(boundary)
    cu, cv = us.mean(), vs.mean()
    order = np.argsort(np.arctan2(bv - cv, bu - cu), kind="stable")
    pts = [(int(bu[i]), int(bv[i])) for i in order[::step]]
    return pts
