"""Disparity to metric depth with disparity- and depth-space residuals."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .aggregation import upsample_bilinear
from .grid import CameraRig, DepthMap, ImageGrid, SparseHintMap, bilinear, downsample_hints
from .io import FormatError, read_pfm, write_pfm
from .propagation import PropagationWeights, propagate, zero_offsets

DELTA1_LIMIT = 0.2  # pixels
DELTA2_LIMIT = 0.6  # meters
D_EPS = 0.1  # pixels


@dataclass(frozen=True)
class ResidualMaps:
    delta1: np.ndarray
    delta2: np.ndarray
    clamped_count: int = 0

    def __post_init__(self):
        d1 = np.asarray(self.delta1, dtype=np.float64)
        d2 = np.asarray(self.delta2, dtype=np.float64)
        if d1.shape != d2.shape or d1.ndim != 2:
            raise ValueError("delta1 and delta2 must be equal-shaped 2D maps")
        if not (np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))):
            raise ValueError("residuals must be finite")
        if np.any(np.abs(d1) > DELTA1_LIMIT) or np.any(np.abs(d2) > DELTA2_LIMIT):
            raise ValueError("residuals exceed their clamp ranges; use ResidualMaps.clamped")
        object.__setattr__(self, "delta1", d1)
        object.__setattr__(self, "delta2", d2)

    @property
    def shape(self) -> tuple[int, int]:
        return self.delta1.shape

    @classmethod
    def zeros(cls, shape) -> "ResidualMaps":
        return cls(np.zeros(shape), np.zeros(shape))

    @classmethod
    def clamped(cls, delta1: np.ndarray, delta2: np.ndarray) -> "ResidualMaps":
        """Clip to ``+-0.2`` px and ``+-0.6`` m, counting the pixels that moved."""
        d1 = np.asarray(delta1, dtype=np.float64)
        d2 = np.asarray(delta2, dtype=np.float64)
        if not (np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))):
            raise ValueError("residuals must be finite")
        # float32 files store the limits slightly high; only count real overshoots
        tol = 1e-6
        n = int(np.count_nonzero(np.abs(d1) > DELTA1_LIMIT + tol)
                + np.count_nonzero(np.abs(d2) > DELTA2_LIMIT + tol))
        return cls(np.clip(d1, -DELTA1_LIMIT, DELTA1_LIMIT), np.clip(d2, -DELTA2_LIMIT, DELTA2_LIMIT), n)


@dataclass(frozen=True)
class ErrorMap:
    error: np.ndarray  # H x W x C
    valid_mask: np.ndarray


def triangulate(disparity: np.ndarray, rig: CameraRig, residuals: ResidualMaps | None = None,
                d_eps: float = D_EPS) -> DepthMap:
    """``G = b f / (D + delta1) + delta2``; singular or non-positive results are invalid."""
    disparity = np.asarray(disparity, dtype=np.float64)
    if residuals is None:
        residuals = ResidualMaps.zeros(disparity.shape)
    if residuals.shape != disparity.shape:
        raise ValueError(f"residuals {residuals.shape} do not match disparity {disparity.shape}")
    denom = disparity + residuals.delta1
    ok = np.isfinite(denom) & (denom > d_eps)
    depth = np.divide(rig.bf, denom, out=np.zeros_like(denom), where=ok) + residuals.delta2
    ok &= depth > 0
    return DepthMap(np.where(ok, depth, 0.0), ok)


def warp_error_map(left: ImageGrid, right: ImageGrid, disparity: np.ndarray) -> ErrorMap:
    """``left(x, y) - right(x - D, y)`` with bilinear sampling; off-image warps are invalid."""
    if left.shape != right.shape or left.channels != right.channels:
        raise ValueError("left and right images differ in shape")
    disparity = np.asarray(disparity, dtype=np.float64)
    if disparity.shape != left.shape:
        raise ValueError(f"disparity {disparity.shape} does not match images {left.shape}")
    h, w = left.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    xr = xx - disparity
    valid = np.isfinite(xr) & (xr >= 0) & (xr <= w - 1)
    xr = np.where(valid, xr, 0.0)
    err = np.empty(left.data.shape)
    for c in range(left.channels):
        err[:, :, c] = left.data[:, :, c] - bilinear(right.data[:, :, c], xr, yy)
    err[~valid] = 0.0
    return ErrorMap(err, valid)


def _uniform_weights(shape, window: int, dilation: float) -> PropagationWeights:
    n = window * window
    return PropagationWeights(np.full(tuple(shape) + (n,), 1.0 / n), window, dilation)


def lidar_anchored_residuals(disparity: np.ndarray, rig: CameraRig, lidar: SparseHintMap,
                             window: int = 9, dilation: float = 1.0, rho: float = 0.4,
                             factor: int = 4, d_eps: float = D_EPS) -> ResidualMaps:
    """Depth-space residuals interpolated from LiDAR-vs-stereo disagreement.

    ``lidar`` carries metric depth.  At every hint ``r = Z_lidar - b f / D``;
    residuals are block-averaged to ``1/factor``, spread over a zero-offset
    window with uniform weights (normalized by the support mass), zeroed where
    that mass is at most ``rho`` and resampled to full resolution.
    ``delta1`` stays zero.
    """
    disparity = np.asarray(disparity, dtype=np.float64)
    if lidar.shape != disparity.shape:
        raise ValueError(f"lidar {lidar.shape} does not match disparity {disparity.shape}")
    usable = lidar.valid_mask & (disparity > d_eps)
    if not np.any(usable):
        return ResidualMaps.zeros(disparity.shape)
    stereo_z = np.divide(rig.bf, disparity, out=np.zeros_like(disparity), where=usable)
    r = np.where(usable, lidar.disparity - stereo_z, 0.0)
    # residuals are signed; shift to non-negative for the hint container
    shift = float(max(0.0, -r[usable].min()))
    sparse = SparseHintMap(np.where(usable, r + shift, 0.0), usable)
    low = downsample_hints(sparse, factor, scale_values=False)
    offsets = zero_offsets(low.shape, window)
    prop = propagate(low, _uniform_weights(low.shape, window, dilation), offsets, normalize=True)
    res_low = np.where(prop.confidence > rho, prop.disparity - shift, 0.0)
    res = upsample_bilinear(res_low, disparity.shape, scale=float(factor))
    return ResidualMaps.clamped(np.zeros_like(res), res)


def load_residuals(delta1_path, delta2_path, shape) -> ResidualMaps:
    """Read a ``delta1``/``delta2`` PFM pair and clamp it to the residual ranges."""
    d1 = read_pfm(delta1_path)
    d2 = read_pfm(delta2_path)
    for name, arr in (("delta1", d1), ("delta2", d2)):
        if arr.ndim != 2 or arr.shape != tuple(shape):
            raise FormatError(f"{name} map has shape {arr.shape}, expected {tuple(shape)}")
    return ResidualMaps.clamped(d1.astype(np.float64), d2.astype(np.float64))


def external_residuals(path, shape) -> ResidualMaps:
    """``path`` names a directory holding ``delta1.pfm`` and ``delta2.pfm``."""
    return load_residuals(os.path.join(path, "delta1.pfm"), os.path.join(path, "delta2.pfm"), shape)


def save_residuals(path, residuals: ResidualMaps) -> None:
    os.makedirs(path, exist_ok=True)
    write_pfm(os.path.join(path, "delta1.pfm"), residuals.delta1)
    write_pfm(os.path.join(path, "delta2.pfm"), residuals.delta2)
