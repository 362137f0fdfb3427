"""Vectorized numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature;
results agree to rounding (the Cython side sums in a different order).
"""

import numpy as np


def _bilinear_stack(arr, x, y):
    # arr (H, W[, C]); x, y (R, W, N) already clamped
    w = arr.shape[1]
    h = arr.shape[0]
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


def _clamp(arr, xs, ys):
    h, w = arr.shape[:2]
    return np.clip(xs, 0.0, w - 1), np.clip(ys, 0.0, h - 1)


def window_weights(features, xs, ys, row0, row1, inv_scale):
    """Softmax over window samples of <f(center), f(sample)> * inv_scale.

    ``xs``/``ys`` are ``(H, W, N)`` sample coordinates; only rows
    ``row0:row1`` are computed and returned.
    """
    xs, ys = _clamp(features, xs[row0:row1], ys[row0:row1])
    center = features[row0:row1]
    n = xs.shape[2]
    logits = np.empty(xs.shape)
    for i in range(n):
        sampled = _bilinear_stack(features, xs[:, :, i], ys[:, :, i])
        logits[:, :, i] = np.sum(center * sampled, axis=-1) * inv_scale
    logits -= logits.max(axis=-1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=-1, keepdims=True)
    return logits


def window_propagate(weights, xs, ys, values, mask, row0, row1):
    """Weighted sums of bilinearly sampled ``values`` and ``mask``."""
    xs, ys = _clamp(values, xs[row0:row1], ys[row0:row1])
    w = weights[row0:row1]
    dp = np.zeros(w.shape[:2])
    cp = np.zeros(w.shape[:2])
    for i in range(w.shape[2]):
        dp += w[:, :, i] * _bilinear_stack(values, xs[:, :, i], ys[:, :, i])
        cp += w[:, :, i] * _bilinear_stack(mask, xs[:, :, i], ys[:, :, i])
    return dp, cp


def sgm_path(cost, p1, p2, dy, dx):
    """Aggregate ``cost`` (H, W, D) along direction ``(dy, dx)``.

    ``p2`` is an ``(H, W)`` map holding the large-jump penalty for entering
    each pixel from its predecessor.
    """
    h, w, _ = cost.shape
    out = np.empty_like(cost)

    def step(c, prev, pen2):
        m = prev.min(axis=-1, keepdims=True)
        best = prev.copy()
        np.minimum(best[..., 1:], prev[..., :-1] + p1, out=best[..., 1:])
        np.minimum(best[..., :-1], prev[..., 1:] + p1, out=best[..., :-1])
        np.minimum(best, m + pen2[..., None], out=best)
        return c + (best - m)

    if dy == 0:
        cols = range(w) if dx > 0 else range(w - 1, -1, -1)
        first = True
        for x in cols:
            if first:
                out[:, x] = cost[:, x]
                first = False
            else:
                out[:, x] = step(cost[:, x], out[:, x - dx], p2[:, x])
        return out

    rows = range(h) if dy > 0 else range(h - 1, -1, -1)
    first = True
    for y in rows:
        if first:
            out[y] = cost[y]
            first = False
            continue
        prev_row = out[y - dy]
        if dx == 0:
            out[y] = step(cost[y], prev_row, p2[y])
            continue
        # predecessor of (y, x) is (y - dy, x - dx); the entry column has none
        row = np.empty_like(cost[y])
        if dx > 0:
            row[0] = cost[y, 0]
            row[1:] = step(cost[y, 1:], prev_row[:-1], p2[y, 1:])
        else:
            row[-1] = cost[y, -1]
            row[:-1] = step(cost[y, :-1], prev_row[1:], p2[y, :-1])
        out[y] = row
    return out


def jbu(low, guide_full, guide_low, scale, inv_two_sigma2, row0, row1):
    """Joint bilateral upsampling with a bilinear tent spatial kernel.

    ``inv_two_sigma2 == 0`` disables the range kernel (pure bilinear).
    """
    hl, wl = low.shape
    wf = guide_full.shape[1]
    ys = np.arange(row0, row1, dtype=np.float64)
    xs = np.arange(wf, dtype=np.float64)
    ly = np.clip((ys + 0.5) / scale - 0.5, 0.0, hl - 1)
    lx = np.clip((xs + 0.5) / scale - 0.5, 0.0, wl - 1)
    y0 = np.floor(ly).astype(np.intp)
    x0 = np.floor(lx).astype(np.intp)
    fy = (ly - y0)[:, None]
    fx = (lx - x0)[None, :]
    y1 = np.minimum(y0 + 1, hl - 1)
    x1 = np.minimum(x0 + 1, wl - 1)

    def at(yy, xx):
        return low[yy[:, None], xx[None, :]]

    top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx
    bot = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx
    bil = top * (1.0 - fy) + bot * fy
    if inv_two_sigma2 <= 0:
        return bil
    g = guide_full[row0:row1]
    num = np.zeros((row1 - row0, wf))
    den = np.zeros((row1 - row0, wf))
    for yy, wy in ((y0, 1.0 - fy), (y1, fy)):
        for xx, wx in ((x0, 1.0 - fx), (x1, fx)):
            diff = g - guide_low[yy[:, None], xx[None, :]]
            wgt = (wy * wx) * np.exp(-diff * diff * inv_two_sigma2)
            num += wgt * at(yy, xx)
            den += wgt
    ok = den > 1e-12
    return np.where(ok, num / np.where(ok, den, 1.0), bil)
