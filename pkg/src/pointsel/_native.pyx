# Compiled hot kernels: mask centroid with depth-outlier rejection and
# batch point-to-ray distance. Semantics match pointsel._kernels_py exactly.

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

BACKEND = "native"


cdef double _select_inplace(double[::1] buf, Py_ssize_t lo, Py_ssize_t hi, Py_ssize_t k) nogil:
    # Quickselect for the k-th smallest in buf[lo:hi+1]; average O(n),
    # median-of-three pivot guards the sorted/constant inputs the engine
    # actually produces (flat depth planes).
    cdef Py_ssize_t i, j, mid
    cdef double pivot, tmp
    while True:
        if lo == hi:
            return buf[lo]
        mid = lo + (hi - lo) // 2
        if buf[mid] < buf[lo]:
            tmp = buf[mid]; buf[mid] = buf[lo]; buf[lo] = tmp
        if buf[hi] < buf[lo]:
            tmp = buf[hi]; buf[hi] = buf[lo]; buf[lo] = tmp
        if buf[hi] < buf[mid]:
            tmp = buf[hi]; buf[hi] = buf[mid]; buf[mid] = tmp
        pivot = buf[mid]
        i = lo
        j = hi
        while i <= j:
            while buf[i] < pivot:
                i += 1
            while buf[j] > pivot:
                j -= 1
            if i <= j:
                tmp = buf[i]; buf[i] = buf[j]; buf[j] = tmp
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            return buf[k]


cdef double _median_inplace(double[::1] buf) nogil:
    cdef Py_ssize_t n = buf.shape[0]
    cdef double upper, lower
    upper = _select_inplace(buf, 0, n - 1, n // 2)
    if n % 2 == 1:
        return upper
    # after selection, the lower half lives in buf[:n//2]
    lower = _select_inplace(buf, 0, n // 2 - 1, n // 2 - 1)
    return 0.5 * (lower + upper)


def masked_centroid(us, vs, zs, double fx, double fy, double cx, double cy,
                    double mad_factor, double band_floor):
    cdef cnp.ndarray[double, ndim=1] u = np.ascontiguousarray(us, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] v = np.ascontiguousarray(vs, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] z = np.ascontiguousarray(zs, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0]
    if n == 0:
        return (0.0, 0.0, 0.0, 0)

    cdef cnp.ndarray[double, ndim=1] work = z.copy()
    cdef double med = _median_inplace(work)
    cdef Py_ssize_t i
    for i in range(n):
        work[i] = fabs(z[i] - med)
    cdef double mad = _median_inplace(work)
    cdef double band = mad_factor * mad + band_floor

    cdef double sx = 0.0, sy = 0.0, sz = 0.0, zi
    cdef Py_ssize_t kept = 0
    for i in range(n):
        zi = z[i]
        if fabs(zi - med) <= band:
            sx += (u[i] - cx) * zi / fx
            sy += (v[i] - cy) * zi / fy
            sz += zi
            kept += 1
    if kept == 0:
        return (0.0, 0.0, 0.0, 0)
    return (sx / kept, sy / kept, sz / kept, int(kept))


def ray_distances(points, origin, direction):
    cdef cnp.ndarray[double, ndim=2] pts = np.ascontiguousarray(
        np.reshape(np.asarray(points, dtype=np.float64), (-1, 3)))
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double dx = direction[0], dy = direction[1], dz = direction[2]
    cdef Py_ssize_t n = pts.shape[0]
    cdef cnp.ndarray[double, ndim=1] dist = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ts = np.empty(n, dtype=np.float64)
    cdef double wx, wy, wz, t, ex, ey, ez
    cdef Py_ssize_t i
    for i in range(n):
        wx = pts[i, 0] - ox
        wy = pts[i, 1] - oy
        wz = pts[i, 2] - oz
        t = wx * dx + wy * dy + wz * dz
        ex = wx - t * dx
        ey = wy - t * dy
        ez = wz - t * dz
        dist[i] = sqrt(ex * ex + ey * ey + ez * ez)
        ts[i] = t
    return (dist, ts)
