"""Time each hot kernel (and one full stereo run) under both backends.

    python3 benchmarks/bench_kernels.py [--repeat N] [--size HxW]
"""

import argparse
import timeit

import numpy as np

from sdgfuse import _kernels
from sdgfuse.config import Config
from sdgfuse.pipeline import stereo
from sdgfuse.synth import Layout, SceneSpec, render_scene


def kernel_cases(h, w, rng):
    hl, wl = h // 4, w // 4
    feats = rng.normal(size=(hl, wl, 28))
    n = 81
    xs = rng.uniform(0, wl - 1, (hl, wl, n))
    ys = rng.uniform(0, hl - 1, (hl, wl, n))
    wts = rng.random((hl, wl, n))
    wts /= wts.sum(axis=-1, keepdims=True)
    vals = rng.uniform(0, 40, (hl, wl))
    mask = (rng.random((hl, wl)) < 0.3).astype(np.float64)
    cost = rng.uniform(0, 3, (hl, wl, 48))
    p2 = rng.uniform(1, 64, (hl, wl))
    low = rng.uniform(0, 40, (hl, wl))
    full = rng.random((h, w))
    guide_low = full.reshape(hl, 4, wl, 4).mean(axis=(1, 3))
    return {
        "window_weights P=9": lambda k: k.window_weights(feats, xs, ys, 0, hl, 1 / 28),
        "window_propagate P=9": lambda k: k.window_propagate(wts, xs, ys, vals, mask, 0, hl),
        "sgm_path x1 (diagonal)": lambda k: k.sgm_path(cost, 0.02, p2, 1, 1),
        "jbu x4": lambda k: k.jbu(low, full, guide_low, 4.0, 200.0, 0, h),
    }


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", default="384x512")
    args = ap.parse_args()
    h, w = (int(v) for v in args.size.lower().split("x"))
    backends = list(_kernels.BACKENDS)
    rng = np.random.default_rng(0)
    rows = []
    for name, fn in kernel_cases(h, w, rng).items():
        rows.append((name, [best_of(lambda: fn(_kernels.BACKENDS[b]), args.repeat) for b in backends]))

    sc = render_scene(SceneSpec(Layout.parse("slanted_plane:10,1.0"), size=(h, w)))
    cfg = Config()
    times = []
    for b in backends:
        _kernels.use(b)
        times.append(best_of(lambda: stereo(sc.left, sc.right, sc.hints, cfg), max(1, args.repeat // 2)))
    rows.append((f"stereo {h}x{w}", times))

    width = max(len(r[0]) for r in rows)
    print(f"{'case'.ljust(width)}  " + "  ".join(f"{b:>10}" for b in backends)
          + ("     speedup" if len(backends) > 1 else ""))
    for name, ts in rows:
        line = f"{name.ljust(width)}  " + "  ".join(f"{t * 1e3:8.1f}ms" for t in ts)
        if len(ts) > 1:
            line += f"  {ts[0] / ts[1]:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
