"""Scalar cost volume, confidence-gated Gaussian modulation and soft-argmin."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import CostParams, FeatureMap, matching_cost_volume
from .propagation import SemiDenseHint


@dataclass(frozen=True)
class CostVolume:
    """``H x W x D`` costs.

    ``max_cost`` is the similarity ceiling: similarity is ``max_cost - cost``.
    After modulation, gated pixels hold costs in ``[0, k * max_cost]``.
    """

    cost: np.ndarray
    max_cost: float

    def __post_init__(self):
        cost = np.ascontiguousarray(self.cost, dtype=np.float64)
        if cost.ndim != 3 or cost.shape[2] < 2:
            raise ValueError(f"cost volume must be HxWxD with D >= 2, got {cost.shape}")
        object.__setattr__(self, "cost", cost)

    @property
    def d_max(self) -> int:
        return self.cost.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.cost.shape[:2]


@dataclass(frozen=True)
class ModulationParams:
    k: float = 2.0
    omega: float = 8.0
    rho: float = 0.4

    def __post_init__(self):
        if not (self.k > 0 and self.omega > 0 and 0.0 <= self.rho <= 1.0):
            raise ValueError(f"invalid modulation parameters {self}")


def hint_consistency(hint: SemiDenseHint, d_max: int, tau: float) -> np.ndarray:
    """``C_p * min(|d - D_p|, tau) / tau`` for every candidate disparity."""
    d = np.arange(d_max, dtype=np.float64)
    dist = np.minimum(np.abs(d - hint.disparity[:, :, None]), tau) / tau
    return hint.confidence[:, :, None] * dist


def build_cost_volume(left: FeatureMap, right: FeatureMap, d_max: int,
                      hint: SemiDenseHint | None = None, hint_weight: float = 0.5,
                      tau: float = 4.0, params: CostParams = CostParams(),
                      disparities=None) -> CostVolume:
    """Matching cost plus a saturating hint-consistency term.

    The similarity ceiling of the result is ``max_cost + hint_weight``
    (just ``max_cost`` when the hint channel is off).
    """
    if d_max < 2:
        raise ValueError("d_max must be >= 2")
    if left.shape != right.shape:
        raise ValueError("left and right features differ in size")
    if tau <= 0 or hint_weight < 0:
        raise ValueError("tau must be positive and hint_weight non-negative")
    cost = matching_cost_volume(left, right, d_max, params, disparities)
    ceiling = params.max_cost
    if hint is not None and hint_weight > 0:
        if hint.shape != left.shape:
            raise ValueError(f"hint {hint.shape} does not match features {left.shape}")
        cost = cost + hint_weight * hint_consistency(hint, d_max, tau)
        ceiling = params.max_cost + hint_weight
    return CostVolume(cost, ceiling)


def modulation_weights(hint: SemiDenseHint, d_max: int, params: ModulationParams) -> np.ndarray:
    """``f = 1 - M + M * k * C_p * exp(-(d - D_p)^2 / (2 omega^2))`` with ``M = [C_p > rho]``."""
    d = np.arange(d_max, dtype=np.float64)
    gate = (hint.confidence > params.rho)[:, :, None]
    bump = params.k * hint.confidence[:, :, None] * np.exp(
        -((d - hint.disparity[:, :, None]) ** 2) / (2.0 * params.omega**2)
    )
    return np.where(gate, bump, 1.0)


def gaussian_modulate(cv: CostVolume, hint: SemiDenseHint, params: ModulationParams) -> CostVolume:
    """Scale the similarity ``max_cost - cost`` by the modulation weights.

    Ungated pixels are returned untouched.  Gated pixels are mapped back to
    cost space against the ceiling ``k * max_cost`` so they stay non-negative;
    the per-pixel constant does not affect path aggregation or soft-argmin.
    """
    if hint.shape != cv.shape:
        raise ValueError(f"hint {hint.shape} does not match volume {cv.shape}")
    gate = hint.confidence > params.rho
    if not np.any(gate):
        return cv
    f = modulation_weights(hint, cv.d_max, params)
    sim = np.maximum(cv.max_cost - cv.cost, 0.0)
    modulated = params.k * cv.max_cost - f * sim
    out = np.where(gate[:, :, None], modulated, cv.cost)
    return CostVolume(out, cv.max_cost)


def softargmin_disparity(cv: CostVolume, temperature: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Expected disparity and its standard deviation under ``softmax(-cost / T)``."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    logits = -cv.cost / temperature
    logits -= logits.max(axis=-1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=-1, keepdims=True)
    d = np.arange(cv.d_max, dtype=np.float64)
    disp = np.sum(p * d, axis=-1)
    var = np.sum(p * (d - disp[:, :, None]) ** 2, axis=-1)
    disp = np.clip(disp, 0.0, cv.d_max - 1)
    unc = np.clip(np.sqrt(np.maximum(var, 0.0)), 0.0, (cv.d_max - 1) / 2.0)
    return disp, unc
