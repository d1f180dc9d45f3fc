"""Pointing-gesture object selection toolkit.

Camera-space geometry, scene centroids, hand interpretation, the selection
engine, a virtual-participant simulator, experiment statistics, and a live
session host.
"""

from pointsel.geometry import CameraIntrinsics, Point3, Ray3

__version__ = "0.1.0"

__all__ = ["CameraIntrinsics", "Point3", "Ray3", "__version__"]
