"""Stereo matching guided by sparse LiDAR: propagated hints, modulated cost
volumes, coarse-to-fine aggregation and residual-corrected triangulation."""

__version__ = "0.1.0"

from .grid import CameraRig, DepthMap, ImageGrid, SparseHintMap  # noqa: E402

__all__ = ["CameraRig", "DepthMap", "ImageGrid", "SparseHintMap", "__version__"]
