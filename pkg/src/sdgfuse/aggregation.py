"""Coarse-to-fine semi-global aggregation with uncertainty-driven search ranges."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, parallel
from .cost_volume import (
    CostVolume,
    ModulationParams,
    build_cost_volume,
    gaussian_modulate,
    softargmin_disparity,
)
from .features import CostParams, FeatureMap
from .grid import ImageGrid, _block_reduce, to_luma
from .propagation import SemiDenseHint

PATHS_4 = ((0, 1), (0, -1), (1, 0), (-1, 0))
PATHS_8 = PATHS_4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class AggregationParams:
    p1: float = 1.0
    p2: float = 8.0
    paths: int = 8
    lambda_u: float = 3.0
    r_min: float = 4.0
    # intensity difference at which the large-jump penalty is halved
    edge_scale: float = 0.05

    def __post_init__(self):
        if not (0 <= self.p1 <= self.p2):
            raise ValueError(f"need 0 <= p1 <= p2, got p1={self.p1}, p2={self.p2}")
        if self.paths not in (4, 8):
            raise ValueError(f"paths must be 4 or 8, got {self.paths}")
        if self.lambda_u < 0 or self.r_min < 0 or self.edge_scale <= 0:
            raise ValueError(f"invalid aggregation parameters {self}")


@dataclass(frozen=True)
class SearchRange:
    lo: np.ndarray
    hi: np.ndarray

    def mask(self, d_max: int) -> np.ndarray:
        d = np.arange(d_max)
        return (d >= self.lo[:, :, None]) & (d <= self.hi[:, :, None])


def _penalty_map(luma: np.ndarray, dy: int, dx: int, p1: float, p2: float, edge_scale: float):
    h, w = luma.shape
    diff = np.zeros((h, w))
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    ps = slice(max(-dy, 0), h + min(-dy, 0))
    px = slice(max(-dx, 0), w + min(-dx, 0))
    diff[ys, xs] = np.abs(luma[ys, xs] - luma[ps, px])
    return np.ascontiguousarray(np.maximum(p1, p2 / (1.0 + diff / edge_scale)))


def sgm_aggregate(cv: CostVolume, image: ImageGrid, params: AggregationParams,
                  paths: int | None = None) -> CostVolume:
    """Sum of per-direction SGM path costs divided by the number of paths."""
    luma = to_luma(image.data)
    if luma.shape != cv.shape:
        raise ValueError(f"image {luma.shape} does not match volume {cv.shape}")
    dirs = PATHS_8 if (paths or params.paths) == 8 else PATHS_4
    cost = cv.cost
    kern = _kernels.impl

    def one(direction):
        dy, dx = direction
        pen = _penalty_map(luma, dy, dx, params.p1, params.p2, params.edge_scale)
        return kern.sgm_path(cost, params.p1, pen, dy, dx)

    total = np.zeros_like(cost)
    for part in parallel.map_tasks(one, dirs):
        total += part
    return CostVolume(total / len(dirs), cv.max_cost)


def range_from_uncertainty(disparity: np.ndarray, uncertainty: np.ndarray, lambda_u: float,
                           r_min: float, d_max: int) -> SearchRange:
    """Next-finer-level search range ``2 * (disp -/+ (lambda_u * unc + r_min))``."""
    if disparity.shape != uncertainty.shape:
        raise ValueError("disparity and uncertainty maps differ in shape")
    half = lambda_u * uncertainty + r_min
    lo = np.clip(np.rint(2.0 * (disparity - half)), 0, d_max - 1).astype(np.int64)
    hi = np.clip(np.rint(2.0 * (disparity + half)), 0, d_max - 1).astype(np.int64)
    return SearchRange(lo, hi)


def upsample_bilinear(arr: np.ndarray, shape, scale: float = 2.0) -> np.ndarray:
    """Resample ``arr`` by ``scale`` onto ``shape``, pixel-center aligned, values unscaled."""
    h, w = shape
    low = np.ascontiguousarray(arr, dtype=np.float64)
    dummy = np.zeros((h, w))
    return _kernels.impl.jbu(low, dummy, low, float(scale), 0.0, 0, h)


def upsample_disparity(d_low: np.ndarray, guide: ImageGrid, factor: int = 4,
                       sigma_range: float | None = 0.05) -> np.ndarray:
    """Joint bilateral upsampling by ``factor``; disparities are multiplied by ``factor``.

    The spatial kernel is the bilinear tent over the four nearest low-res
    samples; the range kernel compares the full-res guide with the
    block-averaged guide at each sample.  ``sigma_range=None`` gives plain
    bilinear upsampling.
    """
    luma = np.ascontiguousarray(to_luma(guide.data))
    h, w = luma.shape
    sums, counts = _block_reduce(luma, factor)
    guide_low = np.ascontiguousarray(sums / counts)
    low = np.ascontiguousarray(d_low, dtype=np.float64)
    if guide_low.shape != low.shape:
        raise ValueError(f"disparity {low.shape} is not 1/{factor} of guide {luma.shape}")
    inv = 0.0 if sigma_range is None else 1.0 / (2.0 * sigma_range**2)
    kern = _kernels.impl
    up = parallel.map_rows(lambda r0, r1: kern.jbu(low, luma, guide_low, float(factor), inv, r0, r1), h)
    return up * factor


def fill_out_of_view(disparity: np.ndarray, hint: SemiDenseHint, rho: float = 0.4,
                     margin: float = 2.0) -> np.ndarray:
    """Take the propagated hint where the match would leave the right image.

    A pixel at column ``x`` whose gated hint disparity exceeds ``x - margin``
    has no usable right-image support (its census window would cross the
    border), so stereo cannot say anything there.
    """
    if disparity.shape != hint.shape:
        raise ValueError(f"disparity {disparity.shape} and hint {hint.shape} differ in size")
    xs = np.arange(disparity.shape[1])[None, :]
    blind = (hint.confidence > rho) & (hint.disparity > xs - margin)
    return np.where(blind, hint.disparity, disparity)


@dataclass(frozen=True)
class CascadeParams:
    d_max: int = 192  # full-resolution disparities
    cost: CostParams = CostParams()
    # omega is in full-resolution pixels and divided by each level's factor
    modulation: ModulationParams = ModulationParams()
    aggregation: AggregationParams = AggregationParams(p1=0.02, p2=64.0)
    modulate: bool = True
    hint_weight: float = 0.5
    tau: float = 4.0
    temperature: float = 1.2
    fine_paths: int = 4
    base_factor: int = 4

    def __post_init__(self):
        if self.d_max < 2 or self.temperature <= 0 or self.fine_paths not in (4, 8):
            raise ValueError(f"invalid cascade parameters d_max={self.d_max}, "
                             f"temperature={self.temperature}, fine_paths={self.fine_paths}")
        if self.base_factor < 1:
            raise ValueError("base_factor must be >= 1")


@dataclass
class LevelResult:
    factor: int
    disparity: np.ndarray
    uncertainty: np.ndarray
    search_range: SearchRange | None
    volume: CostVolume | None = None


@dataclass
class CascadeResult:
    disparity: np.ndarray
    levels: list[LevelResult] = field(default_factory=list)


def level_d_max(d_max_full: int, factor: int) -> int:
    return max(2, int(np.ceil(d_max_full / factor)))


def coarse_to_fine(left_pyr: list[FeatureMap], right_pyr: list[FeatureMap],
                   image_pyr: list[ImageGrid], hint: SemiDenseHint | None,
                   params: CascadeParams = CascadeParams(),
                   keep_volumes: bool = False) -> CascadeResult:
    """Cascade from the coarsest pyramid entry to ``left_pyr[0]``.

    Pyramids are finest-first and ``left_pyr[0]`` sits at ``1/base_factor``
    of full resolution.  The coarsest level searches every disparity; finer
    levels only evaluate the range predicted by the level below.
    """
    n = len(left_pyr)
    if not (len(right_pyr) == len(image_pyr) == n):
        raise ValueError("pyramids must have the same number of levels")
    hints = [hint]
    for _ in range(n - 1):
        hints.append(hints[-1].downsample() if hints[-1] is not None else None)

    levels: list[LevelResult] = []
    disp = unc = None
    for lvl in range(n - 1, -1, -1):
        factor = params.base_factor * 2**lvl
        d_max = level_d_max(params.d_max, factor)
        lf, rf, img, h = left_pyr[lvl], right_pyr[lvl], image_pyr[lvl], hints[lvl]
        srange = allowed = None
        if disp is not None:
            disp_up = upsample_bilinear(disp, lf.shape)
            unc_up = upsample_bilinear(unc, lf.shape)
            agg = params.aggregation
            srange = range_from_uncertainty(disp_up, unc_up, agg.lambda_u, agg.r_min, d_max)
            allowed = srange.mask(d_max)
        cv = build_cost_volume(lf, rf, d_max, h, params.hint_weight, params.tau, params.cost, allowed)
        mod = params.modulation
        if params.modulate and h is not None:
            level_mod = ModulationParams(mod.k, mod.omega / factor, mod.rho)
            cv = gaussian_modulate(cv, h, level_mod)
        if allowed is not None:
            cv = CostVolume(np.where(allowed, cv.cost, mod.k * cv.max_cost), cv.max_cost)
        paths = params.aggregation.paths if disp is None else params.fine_paths
        cv = sgm_aggregate(cv, img, params.aggregation, paths)
        disp, unc = softargmin_disparity(cv, params.temperature)
        levels.append(LevelResult(factor, disp, unc, srange, cv if keep_volumes else None))
    return CascadeResult(disp, levels)
