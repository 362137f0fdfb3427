"""Deterministic per-pixel descriptors: census bits, gradients, context means."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .grid import ImageGrid, to_luma


@dataclass(frozen=True)
class CostParams:
    census_w: float = 1.0
    grad_w: float = 0.25
    max_cost: float = 2.0

    def __post_init__(self):
        if self.census_w < 0 or self.grad_w < 0 or self.max_cost <= 0:
            raise ValueError(f"invalid cost weights {self}")


@dataclass(frozen=True)
class FeatureMap:
    """Descriptor raster; channel layout ``[census..., gx, gy, context...]``."""

    grid: ImageGrid
    n_census: int
    n_context: int

    @property
    def data(self) -> np.ndarray:
        return self.grid.data

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    @property
    def census(self) -> np.ndarray:
        return self.grid.data[:, :, : self.n_census]

    @property
    def gradients(self) -> np.ndarray:
        return self.grid.data[:, :, self.n_census : self.n_census + 2]

    @property
    def context(self) -> np.ndarray:
        return self.grid.data[:, :, self.n_census + 2 :]

    @property
    def luma_gradient_magnitude(self) -> np.ndarray:
        g = self.gradients
        return np.hypot(g[:, :, 0], g[:, :, 1])


def census_offsets(window: int) -> list[tuple[int, int]]:
    """Row-major ``(dy, dx)`` neighbor offsets of a square window, center excluded."""
    r = window // 2
    return [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1) if (dy, dx) != (0, 0)]


def census_transform(luma: np.ndarray, window: int) -> np.ndarray:
    """``+1`` where neighbor >= center (ties included), else ``-1``; borders replicate."""
    if window < 3 or window % 2 == 0:
        raise ValueError(f"census window must be odd and >= 3, got {window}")
    r = window // 2
    h, w = luma.shape
    padded = np.pad(luma, r, mode="edge")
    offsets = census_offsets(window)
    out = np.empty((h, w, len(offsets)))
    for k, (dy, dx) in enumerate(offsets):
        neigh = padded[r + dy : r + dy + h, r + dx : r + dx + w]
        out[:, :, k] = np.where(neigh >= luma, 1.0, -1.0)
    return out


def central_gradients(luma: np.ndarray) -> np.ndarray:
    padded = np.pad(luma, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) * 0.5
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) * 0.5
    return np.stack([gx, gy], axis=-1)


def extract_features(image: ImageGrid, census_window: int = 5, context_radii=(4, 16)) -> FeatureMap:
    luma = to_luma(image.data)
    census = census_transform(luma, census_window)
    grads = central_gradients(luma)
    context = [uniform_filter(luma, size=2 * int(r) + 1, mode="nearest") for r in context_radii]
    parts = [census, grads] + [c[:, :, None] for c in context]
    return FeatureMap(ImageGrid(np.concatenate(parts, axis=-1)), census.shape[2], len(context))


def _pair_cost(cl, cr, gl, gr, params: CostParams):
    n = cl.shape[-1]
    hamming = (n - np.sum(cl * cr, axis=-1)) / (2.0 * n)
    grad = np.sum(np.abs(gl - gr), axis=-1)
    return np.minimum(params.census_w * hamming + params.grad_w * grad, params.max_cost)


def matching_cost(left: FeatureMap, right: FeatureMap, x: int, y: int, d: int,
                  params: CostParams = CostParams()) -> float:
    """Cost of matching left ``(x, y)`` with right ``(x - d, y)``."""
    xr = x - d
    if xr < 0 or xr >= right.shape[1]:
        return params.max_cost
    return float(_pair_cost(left.census[y, x], right.census[y, xr],
                            left.gradients[y, x], right.gradients[y, xr], params))


def matching_cost_volume(left: FeatureMap, right: FeatureMap, d_max: int,
                         params: CostParams = CostParams(), disparities=None) -> np.ndarray:
    """``H x W x D`` volume of :func:`matching_cost` for ``d = 0..d_max-1``.

    ``disparities`` optionally restricts evaluation to a boolean ``H x W x D``
    mask; unevaluated entries hold ``max_cost``.
    """
    h, w = left.shape
    out = np.full((h, w, d_max), params.max_cost)
    cl, gl = left.census, left.gradients
    cr, gr = right.census, right.gradients
    for d in range(min(d_max, w)):
        cost = _pair_cost(cl[:, d:], cr[:, : w - d], gl[:, d:], gr[:, : w - d], params)
        if disparities is not None:
            cost = np.where(disparities[:, d:, d], cost, params.max_cost)
        out[:, d:, d] = cost
    return out
