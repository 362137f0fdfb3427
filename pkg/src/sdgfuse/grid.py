"""Raster types, bilinear sampling, pyramids and hint downsampling.

Arrays are float64, indexed ``[row, col]`` (``[y, x]``), with an optional
trailing channel axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ImageGrid:
    """Dense ``H x W x C`` raster."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"ImageGrid needs a non-empty HxW or HxWxC array, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("ImageGrid data must be finite")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def plane(self, c: int = 0) -> np.ndarray:
        return self.data[:, :, c]


@dataclass(frozen=True)
class SparseHintMap:
    """Sparse per-pixel values (disparity in px, or metric depth) with a 0/1 mask.

    Invalid entries always store 0 so weighted sums over all samples need no
    branching.
    """

    disparity: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        disp = np.asarray(self.disparity, dtype=np.float64)
        mask = np.asarray(self.valid_mask).astype(bool)
        if disp.shape != mask.shape or disp.ndim != 2:
            raise ValueError("disparity and valid_mask must be equal-shaped 2D arrays")
        if np.any(disp[mask] < 0) or not np.all(np.isfinite(disp[mask])):
            raise ValueError("valid hints must be finite and non-negative")
        disp = np.where(mask, disp, 0.0)
        disp.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "disparity", disp)
        object.__setattr__(self, "valid_mask", mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.disparity.shape

    @property
    def mask_float(self) -> np.ndarray:
        return self.valid_mask.astype(np.float64)

    @classmethod
    def empty(cls, shape) -> "SparseHintMap":
        return cls(np.zeros(shape), np.zeros(shape, dtype=bool))


@dataclass(frozen=True)
class CameraRig:
    baseline_m: float
    focal_px: float

    def __post_init__(self):
        if not (self.baseline_m > 0 and self.focal_px > 0):
            raise ValueError(f"baseline and focal length must be positive, got {self}")

    @property
    def bf(self) -> float:
        return self.baseline_m * self.focal_px

    @classmethod
    def parse(cls, text: str) -> "CameraRig":
        """Parse ``"b,f"`` (meters, pixels)."""
        try:
            b, f = (float(v) for v in text.split(","))
        except ValueError as exc:
            raise ValueError(f"rig must be 'baseline_m,focal_px', got {text!r}") from exc
        return cls(b, f)


@dataclass(frozen=True)
class DepthMap:
    """Metric depth; invalid pixels store 0."""

    depth: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=np.float64)
        mask = np.asarray(self.valid_mask).astype(bool)
        if depth.shape != mask.shape or depth.ndim != 2:
            raise ValueError("depth and valid_mask must be equal-shaped 2D arrays")
        vals = depth[mask]
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError("valid depths must be finite and positive")
        depth = np.where(mask, depth, 0.0)
        depth.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "valid_mask", mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    @classmethod
    def from_array(cls, depth: np.ndarray) -> "DepthMap":
        """Valid wherever the value is finite and positive."""
        depth = np.asarray(depth, dtype=np.float64)
        mask = np.isfinite(depth) & (depth > 0)
        return cls(np.where(mask, depth, 0.0), mask)


def bilinear(arr: np.ndarray, x, y) -> np.ndarray:
    """Bilinear lookup into a 2D or 3D array with clamp-to-edge coordinates.

    ``x`` and ``y`` broadcast against each other; the result has their
    broadcast shape plus the channel axis when ``arr`` is 3D.
    """
    h, w = arr.shape[:2]
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, w - 1)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, h - 1)
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    x0 = x0.astype(np.intp)
    y0 = y0.astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    if arr.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = arr[y0, x0] * (1.0 - fx) + arr[y0, x1] * fx
    bot = arr[y1, x0] * (1.0 - fx) + arr[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def bilinear_sample(grid: ImageGrid, x, y) -> np.ndarray:
    """Sample every channel of ``grid`` at subpixel ``(x, y)``; shape ``(..., C)``."""
    return bilinear(grid.data, x, y)


def _block_reduce(arr: np.ndarray, factor: int) -> tuple[np.ndarray, np.ndarray]:
    """Block sums and block element counts over ``factor x factor`` tiles.

    Trailing partial blocks are kept (output size is ``ceil(n / factor)``).
    """
    h, w = arr.shape[:2]
    oh, ow = -(-h // factor), -(-w // factor)
    pad = ((0, oh * factor - h), (0, ow * factor - w)) + ((0, 0),) * (arr.ndim - 2)
    padded = np.pad(arr, pad)
    ones = np.pad(np.ones((h, w)), pad[:2])
    shape = (oh, factor, ow, factor) + arr.shape[2:]
    sums = padded.reshape(shape).sum(axis=(1, 3))
    counts = ones.reshape(oh, factor, ow, factor).sum(axis=(1, 3))
    return sums, counts


def downsample_hints(hints: SparseHintMap, factor: int, scale_values: bool = True) -> SparseHintMap:
    """Block-mean of the valid hints in each ``factor x factor`` block.

    With ``scale_values`` the mean is divided by ``factor`` (disparities
    shrink with resolution); metric values pass ``scale_values=False``.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return hints
    sums, _ = _block_reduce(hints.disparity, factor)
    counts, _ = _block_reduce(hints.mask_float, factor)
    valid = counts > 0
    mean = np.divide(sums, counts, out=np.zeros_like(sums), where=valid)
    if scale_values:
        mean = mean / factor
    return SparseHintMap(mean, valid)


def box_downsample(arr: np.ndarray) -> np.ndarray:
    """One 2x2 box-average step; partial edge blocks average what they have."""
    sums, counts = _block_reduce(arr, 2)
    if arr.ndim == 3:
        counts = counts[:, :, None]
    return sums / counts


def build_pyramid(grid: ImageGrid, levels: int) -> list[ImageGrid]:
    """``[grid, grid/2, grid/4, ...]`` with ``levels`` entries."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if 2 ** (levels - 1) > min(grid.height, grid.width):
        raise ValueError(
            f"{levels} levels would shrink a {grid.height}x{grid.width} grid below one pixel"
        )
    out = [grid]
    for _ in range(levels - 1):
        out.append(ImageGrid(box_downsample(out[-1].data)))
    return out


def to_luma(data: np.ndarray) -> np.ndarray:
    """Rec.601 luma for 3-channel input; single-channel input passes through."""
    if data.ndim == 2:
        return np.asarray(data, dtype=np.float64)
    if data.shape[2] == 1:
        return data[:, :, 0]
    if data.shape[2] == 3:
        return data @ np.array([0.299, 0.587, 0.114])
    raise ValueError(f"expected 1 or 3 channels, got {data.shape[2]}")
