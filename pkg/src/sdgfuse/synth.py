"""Synthetic rectified stereo + LiDAR scenes with analytic ground truth.

Surface texture is anchored to right-image columns: every object carries a
value-noise texture sampled at integer right-image columns and linearly
interpolated in between.  The right image shows those samples directly and
the left image looks them up at ``x - d``, so bilinear warping of the right
image by the true disparity reproduces the left image exactly wherever both
interpolation taps see the same object.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import CameraRig, DepthMap, ImageGrid, SparseHintMap

OCTAVES = (4, 8, 16, 32)
LAYOUTS = ("fronto_plane", "slanted_plane", "two_box")
# (offset, gain) per object id: background, foreground box
ALBEDO = ((0.0, 1.0), (0.3, 0.7))


@dataclass(frozen=True)
class Layout:
    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        arity = {"fronto_plane": 1, "slanted_plane": 2, "two_box": 2}
        if self.kind not in arity:
            raise ValueError(f"unknown layout {self.kind!r}; expected one of {LAYOUTS}")
        if len(self.params) != arity[self.kind]:
            raise ValueError(f"{self.kind} takes {arity[self.kind]} parameters, got {self.params}")

    @classmethod
    def parse(cls, text: str) -> "Layout":
        """``fronto_plane:Z``, ``slanted_plane:Z0,slope`` or ``two_box:Znear,Zfar``."""
        kind, _, rest = text.partition(":")
        params = tuple(float(v) for v in rest.split(",")) if rest else ()
        return cls(kind.strip(), params)

    def __str__(self):
        return f"{self.kind}:{','.join(repr(p) for p in self.params)}"


@dataclass(frozen=True)
class SceneSpec:
    layout: Layout
    rig: CameraRig = CameraRig(0.54, 721.0)
    size: tuple[int, int] = (384, 512)
    texture_seed: int = 0
    hint_density: float = 0.05
    hint_noise_px: float = 0.0
    hint_seed: int | None = None

    def __post_init__(self):
        if not (0.0 < self.hint_density <= 1.0):
            raise ValueError("hint_density must lie in (0, 1]")
        if self.hint_noise_px < 0:
            raise ValueError("hint_noise_px must be non-negative")
        if min(self.size) < 8:
            raise ValueError("scene must be at least 8x8")


@dataclass
class Scene:
    spec: SceneSpec
    left: ImageGrid
    right: ImageGrid
    gt_disparity: np.ndarray
    gt_depth: DepthMap
    hints: SparseHintMap
    visible_mask: np.ndarray  # seen by both cameras with an exact warp
    extras: dict = field(default_factory=dict)

    @property
    def occlusion_mask(self) -> np.ndarray:
        return ~self.visible_mask

    def hint_depth(self) -> SparseHintMap:
        """The hints as metric depth (what a LiDAR would report)."""
        bf = self.spec.rig.bf
        ok = self.hints.valid_mask & (self.hints.disparity > 0)
        depth = np.divide(bf, self.hints.disparity, out=np.zeros(self.hints.shape), where=ok)
        return SparseHintMap(depth, ok)


def value_noise(h: int, w: int, rng: np.random.Generator, octaves=OCTAVES) -> np.ndarray:
    """Sum of smoothstep-interpolated lattice noise, one lattice per octave, in ``[0, 1]``."""
    out = np.zeros((h, w))
    yy = np.arange(h, dtype=np.float64)
    xx = np.arange(w, dtype=np.float64)
    for cell in octaves:
        lat = rng.random((h // cell + 2, w // cell + 2))
        gy, gx = yy / cell, xx / cell
        iy, ix = np.floor(gy).astype(int), np.floor(gx).astype(int)
        ty, tx = gy - iy, gx - ix
        sy = (ty * ty * (3 - 2 * ty))[:, None]
        sx = (tx * tx * (3 - 2 * tx))[None, :]
        a = lat[iy][:, ix]
        b = lat[iy][:, ix + 1]
        c = lat[iy + 1][:, ix]
        d = lat[iy + 1][:, ix + 1]
        out += (a * (1 - sx) + b * sx) * (1 - sy) + (c * (1 - sx) + d * sx) * sy
    return out / len(octaves)


def _disparity_layout(spec: SceneSpec):
    """Left-view disparity, left-view object ids and a right-view object-id function."""
    h, w = spec.size
    bf = spec.rig.bf
    kind, p = spec.layout.kind, spec.layout.params
    if kind == "fronto_plane":
        depths = [p[0]]
        disp = np.full((h, w), bf / p[0])
        obj = np.zeros((h, w), dtype=int)

        def right_obj(y, xr):
            return np.zeros(np.broadcast(y, xr).shape, dtype=int)

    elif kind == "slanted_plane":
        z0, slope = p
        cy = (h - 1) / 2.0
        rows = np.arange(h, dtype=np.float64)
        scale = 1.0 - slope * (rows - cy) / spec.rig.focal_px
        if np.any(scale <= 0):
            raise ValueError("slanted plane crosses the camera's horizon")
        disp = np.repeat((bf / z0 * scale)[:, None], w, axis=1)
        depths = list(bf / disp[:, 0])
        obj = np.zeros((h, w), dtype=int)

        def right_obj(y, xr):
            return np.zeros(np.broadcast(y, xr).shape, dtype=int)

    else:
        z_near, z_far = p
        if z_near >= z_far:
            raise ValueError("two_box needs Z_near < Z_far")
        depths = [z_far, z_near]
        d_far, d_near = bf / z_far, bf / z_near
        r0, r1 = h // 4, (3 * h) // 4
        c0, c1 = (3 * w) // 8, (5 * w) // 8
        obj = np.zeros((h, w), dtype=int)
        obj[r0:r1, c0:c1] = 1
        disp = np.where(obj == 1, d_near, d_far)

        def right_obj(y, xr):
            y, xr = np.broadcast_arrays(y, xr)
            inside = (y >= r0) & (y < r1) & (xr >= c0 - d_near) & (xr < c1 - d_near)
            return inside.astype(int)

    if not all(1.0 < z < 200.0 for z in depths):
        raise ValueError(f"scene depths must lie in (1, 200) m, got {min(depths)}..{max(depths)}")
    if disp.max() >= w / 2:
        raise ValueError(f"max disparity {disp.max():.1f} px is not below half the width {w / 2}")
    return disp, obj, right_obj


def sample_hints(gt_disparity: np.ndarray, density: float, noise_px: float = 0.0,
                 seed: int = 0) -> SparseHintMap:
    """Bernoulli(density) pixel selection with optional Gaussian disparity noise."""
    if not (0.0 < density <= 1.0):
        raise ValueError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    mask = rng.random(gt_disparity.shape) < density
    noise = rng.normal(0.0, noise_px, gt_disparity.shape) if noise_px > 0 else 0.0
    values = np.maximum(gt_disparity + noise, 0.0)
    return SparseHintMap(np.where(mask, values, 0.0), mask)


def render_scene(spec: SceneSpec) -> Scene:
    h, w = spec.size
    disp, obj, right_obj = _disparity_layout(spec)
    n_obj = int(obj.max()) + 1
    margin = int(np.ceil(disp.max())) + 2
    rng = np.random.default_rng(spec.texture_seed)
    # texture column j holds right-image column u = j - margin; objects get
    # distinct albedo bands so their boundaries show up as intensity edges
    textures = [
        ALBEDO[o % len(ALBEDO)][0] + ALBEDO[o % len(ALBEDO)][1] * value_noise(h, w + margin + 1, rng)
        for o in range(n_obj)
    ]

    ys = np.arange(h)[:, None]
    xs_r = np.arange(w)[None, :]
    robj = right_obj(ys, xs_r)
    right = np.zeros((h, w))
    for o, tex in enumerate(textures):
        right = np.where(robj == o, tex[:, margin : margin + w], right)

    u = np.arange(w)[None, :] - disp
    j = u + margin
    j0 = np.floor(j).astype(int)
    t = j - j0
    left = np.zeros((h, w))
    rows = np.broadcast_to(ys, (h, w))
    for o, tex in enumerate(textures):
        val = tex[rows, j0] * (1 - t) + tex[rows, j0 + 1] * t
        left = np.where(obj == o, val, left)

    u0 = np.floor(u)
    in_view = (u >= 0) & (u <= w - 1)
    u0c = np.clip(u0, 0, w - 1).astype(int)
    u1c = np.clip(u0 + 1, 0, w - 1).astype(int)
    same = (robj[rows, u0c] == obj) & (robj[rows, u1c] == obj)
    visible = in_view & same

    depth = DepthMap(spec.rig.bf / disp, np.ones((h, w), dtype=bool))
    seed = spec.texture_seed if spec.hint_seed is None else spec.hint_seed
    hints = sample_hints(disp, spec.hint_density, spec.hint_noise_px, seed)
    return Scene(spec, ImageGrid(left), ImageGrid(right), disp, depth, hints, visible,
                 {"objects": obj})
