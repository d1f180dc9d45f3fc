"""Kernel backend selection.

Imports the compiled extension when available, otherwise the numpy fallback.
Set POINTSEL_PURE=1 to force the fallback (used by the benchmark and tests).
"""

from __future__ import annotations

import os

if os.environ.get("POINTSEL_PURE") == "1":
    from pointsel import _kernels_py as _impl
else:
    try:
        from pointsel import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        from pointsel import _kernels_py as _impl

BACKEND = _impl.BACKEND
masked_centroid = _impl.masked_centroid
ray_distances = _impl.ray_distances
