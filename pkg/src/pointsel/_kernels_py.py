"""Numpy fallback implementations of the hot per-frame kernels.

Same signatures and semantics as the compiled `pointsel._native` module;
`pointsel.kernels` picks whichever is importable.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def masked_centroid(us, vs, zs, fx, fy, cx, cy, mad_factor, band_floor):
    """Mean deprojected point of mask pixels, with depth-outlier rejection.

    us, vs: pixel coordinates of mask pixels with valid depth; zs: metric
    depths. Pixels whose depth deviates from the median by more than
    mad_factor * MAD (plus band_floor, so a zero-MAD plane tolerates
    quantization) are discarded. Returns (x, y, z, count); count 0 means
    nothing survived.
    """
    zs = np.asarray(zs, dtype=np.float64)
    if zs.size == 0:
        return (0.0, 0.0, 0.0, 0)
    us = np.asarray(us, dtype=np.float64)
    vs = np.asarray(vs, dtype=np.float64)
    med = np.median(zs)
    mad = np.median(np.abs(zs - med))
    keep = np.abs(zs - med) <= mad_factor * mad + band_floor
    n = int(np.count_nonzero(keep))
    if n == 0:
        return (0.0, 0.0, 0.0, 0)
    z = zs[keep]
    x = (us[keep] - cx) * z / fx
    y = (vs[keep] - cy) * z / fy
    return (float(x.mean()), float(y.mean()), float(z.mean()), n)


def ray_distances(points, origin, direction):
    """Perpendicular distances and unclamped ray parameters for a point batch.

    points: (N, 3) array; origin, direction: length-3 sequences, direction
    unit length. Returns (distances, ts) as float64 arrays.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    w = pts - o
    ts = w @ d
    perp = w - ts[:, None] * d
    return (np.linalg.norm(perp, axis=1), ts)
