"""Deformable propagation of sparse hints into a semi-dense hint + confidence map.

Each pixel owns a ``P x P`` sampling window (lattice step ``dilation``) whose
samples may be displaced by an offset field.  Softmax weights come from the
self-correlation of the feature map between the center and each sample;
propagated disparity and confidence are the weighted sums of the bilinearly
sampled hint values and hint mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, parallel
from .features import FeatureMap
from .grid import SparseHintMap, bilinear
from .io import FormatError, read_pfm_stack, write_pfm_stack


@dataclass(frozen=True)
class OffsetField:
    """Per-pixel sample offsets ``(H, W, P*P, 2)`` as ``(dx, dy)`` in ``[-1, 1]``.

    An offset of 1 moves a sample by one lattice step (``dilation`` pixels).
    """

    offsets: np.ndarray
    window: int

    def __post_init__(self):
        off = np.ascontiguousarray(self.offsets, dtype=np.float64)
        n = self.window * self.window
        if off.ndim != 4 or off.shape[2:] != (n, 2):
            raise ValueError(f"offset field must be (H, W, {n}, 2), got {off.shape}")
        if not np.all(np.isfinite(off)):
            raise ValueError("offset field contains non-finite values")
        if np.any(np.abs(off) > 1.0):
            bad = np.argwhere(np.abs(off) > 1.0)[0]
            raise ValueError(f"offset {off[tuple(bad)]} at {tuple(bad)} outside [-1, 1]")
        off.setflags(write=False)
        object.__setattr__(self, "offsets", off)

    @property
    def shape(self) -> tuple[int, int]:
        return self.offsets.shape[:2]


@dataclass(frozen=True)
class PropagationWeights:
    weights: np.ndarray  # (H, W, P*P)
    window: int
    dilation: float


@dataclass(frozen=True)
class SemiDenseHint:
    disparity: np.ndarray
    confidence: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.disparity.shape

    @classmethod
    def empty(cls, shape) -> "SemiDenseHint":
        return cls(np.zeros(shape), np.zeros(shape))

    def downsample(self) -> "SemiDenseHint":
        """Half resolution: box-averaged confidence, disparity halved."""
        from .grid import box_downsample

        return SemiDenseHint(box_downsample(self.disparity) * 0.5, box_downsample(self.confidence))


def _check_window(window: int) -> None:
    if window < 3 or window % 2 == 0:
        raise ValueError(f"propagation window must be odd and >= 3, got {window}")


def window_lattice(window: int) -> np.ndarray:
    """``(P*P, 2)`` integer ``(u, v)`` lattice, row-major (v outer), centered at 0."""
    r = window // 2
    v, u = np.mgrid[-r : r + 1, -r : r + 1]
    return np.stack([u.ravel(), v.ravel()], axis=-1).astype(np.float64)


def zero_offsets(shape, window: int) -> OffsetField:
    _check_window(window)
    return OffsetField(np.zeros(tuple(shape) + (window * window, 2)), window)


def edge_aware_offsets(features: FeatureMap, window: int, dilation: float = 2.0,
                       edge_scale: float = 0.05) -> OffsetField:
    """Pull samples toward the window center where the path to them crosses edges.

    The shrink fraction is the mean luma-gradient magnitude along the
    center-to-sample segment divided by ``edge_scale`` (capped at 1).
    """
    _check_window(window)
    gmag = features.luma_gradient_magnitude
    h, w = gmag.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    lattice = window_lattice(window)
    out = np.zeros((h, w, len(lattice), 2))
    for i, (u, v) in enumerate(lattice):
        if u == 0 and v == 0:
            continue
        steps = max(2, int(np.ceil(dilation * max(abs(u), abs(v)))))
        acc = np.zeros((h, w))
        for t in np.arange(1, steps + 1) / steps:
            acc += bilinear(gmag, xx + t * dilation * u, yy + t * dilation * v)
        alpha = np.minimum(acc / steps / edge_scale, 1.0)
        out[:, :, i, 0] = np.clip(-alpha * u, -1.0, 1.0)
        out[:, :, i, 1] = np.clip(-alpha * v, -1.0, 1.0)
    return OffsetField(out, window)


def load_offsets(path, shape, window: int) -> OffsetField:
    """Read a PFM stack of ``2*P*P`` planes ordered ``dx_0, dy_0, dx_1, ...``."""
    _check_window(window)
    h, w = shape
    n = window * window
    planes = read_pfm_stack(path, h)
    if planes.shape != (2 * n, h, w):
        raise FormatError(f"{path}: expected {2 * n} planes of {h}x{w}, got {planes.shape}")
    off = planes.reshape(n, 2, h, w).transpose(2, 3, 0, 1)
    try:
        return OffsetField(off, window)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_offsets(path, field: OffsetField) -> None:
    h, w, n, _ = field.offsets.shape
    write_pfm_stack(path, field.offsets.transpose(2, 3, 0, 1).reshape(2 * n, h, w))


def make_offset_field(source: str, window: int, *, shape=None, features: FeatureMap | None = None,
                      path=None, dilation: float = 2.0, edge_scale: float = 0.05) -> OffsetField:
    """Build an offset field from ``"zero"``, ``"edge_aware"`` or ``"external"``."""
    if source == "zero":
        if shape is None:
            if features is None:
                raise ValueError("zero offsets need a shape or a feature map")
            shape = features.shape
        return zero_offsets(shape, window)
    if source == "edge_aware":
        if features is None:
            raise ValueError("edge_aware offsets need a feature map")
        return edge_aware_offsets(features, window, dilation, edge_scale)
    if source == "external":
        if path is None or shape is None:
            raise ValueError("external offsets need a path and a shape")
        return load_offsets(path, shape, window)
    raise ValueError(f"unknown offset source {source!r}")


def deform_window(x: float, y: float, window: int, dilation: float, offsets: OffsetField) -> np.ndarray:
    """Sample coordinates ``(P*P, 2)`` of the deformed window at pixel ``(x, y)``."""
    if dilation <= 0:
        raise ValueError("dilation must be positive")
    lattice = window_lattice(window)
    off = offsets.offsets[int(y), int(x)]
    return np.array([x, y], dtype=np.float64) + dilation * lattice + dilation * off


def sample_coordinates(offsets: OffsetField, dilation: float) -> tuple[np.ndarray, np.ndarray]:
    """``(H, W, P*P)`` x and y coordinates of every window sample (unclamped)."""
    if dilation <= 0:
        raise ValueError("dilation must be positive")
    h, w = offsets.shape
    lattice = window_lattice(offsets.window)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    xs = xx[:, :, None] + dilation * lattice[:, 0] + dilation * offsets.offsets[:, :, :, 0]
    ys = yy[:, :, None] + dilation * lattice[:, 1] + dilation * offsets.offsets[:, :, :, 1]
    return np.ascontiguousarray(xs), np.ascontiguousarray(ys)


def propagation_weights(features: FeatureMap, offsets: OffsetField, dilation: float = 2.0,
                        temperature: float = 1.0) -> PropagationWeights:
    """Softmax of length-normalized feature correlations over each window."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if features.shape != offsets.shape:
        raise ValueError(f"features {features.shape} and offsets {offsets.shape} differ in size")
    xs, ys = sample_coordinates(offsets, dilation)
    data = features.data
    inv_scale = 1.0 / (data.shape[2] * temperature)
    kern = _kernels.impl
    weights = parallel.map_rows(
        lambda r0, r1: kern.window_weights(data, xs, ys, r0, r1, inv_scale), data.shape[0]
    )
    return PropagationWeights(weights, offsets.window, float(dilation))


def propagate(hints: SparseHintMap, weights: PropagationWeights, offsets: OffsetField,
              normalize: bool = False, eps: float = 1e-6) -> SemiDenseHint:
    """Weighted sums of sampled hint values (disparity) and hint mask (confidence).

    With ``normalize`` the disparity is divided by the confidence where the
    confidence exceeds ``eps``, undoing the low bias of partially supported
    windows.
    """
    if hints.shape != offsets.shape or weights.weights.shape[:2] != hints.shape:
        raise ValueError("hints, weights and offsets must share resolution")
    if weights.window != offsets.window:
        raise ValueError("weights and offsets disagree on the window size")
    xs, ys = sample_coordinates(offsets, weights.dilation)
    values = np.ascontiguousarray(hints.disparity)
    mask = np.ascontiguousarray(hints.mask_float)
    wts = weights.weights
    kern = _kernels.impl
    dp, cp = parallel.map_rows(
        lambda r0, r1: kern.window_propagate(wts, xs, ys, values, mask, r0, r1), hints.shape[0]
    )
    cp = np.clip(cp, 0.0, 1.0)
    dp = np.maximum(dp, 0.0)
    if normalize:
        ok = cp > eps
        dp = np.where(ok, dp / np.where(ok, cp, 1.0), 0.0)
    return SemiDenseHint(dp, cp)
