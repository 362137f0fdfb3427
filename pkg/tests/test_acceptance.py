"""Acceptance criteria 1-9.

Each check prints one ``criterion N: PASS|FAIL`` line.  Run the file directly
(``python3 tests/test_acceptance.py``) for just the summary, or through pytest.
"""

from __future__ import annotations

import sys
import time

import numpy as np
import pytest

from sdgfuse import parallel
from sdgfuse.cli import main as cli_main
from sdgfuse.config import Config
from sdgfuse.cost_volume import CostVolume, ModulationParams, gaussian_modulate, modulation_weights
from sdgfuse.depth import ResidualMaps, lidar_anchored_residuals, triangulate
from sdgfuse.features import extract_features
from sdgfuse.grid import CameraRig, DepthMap, ImageGrid, SparseHintMap
from sdgfuse.metrics import combine_rmse, depth_metrics, disparity_metrics, parse_buckets
from sdgfuse.pipeline import OUTPUT_FILES, evaluate, run_arrays
from sdgfuse.propagation import (
    OffsetField,
    SemiDenseHint,
    deform_window,
    propagate,
    propagation_weights,
)
from sdgfuse.synth import Layout, SceneSpec, render_scene

RIG = CameraRig(0.54, 721.0)


def report(n: int, ok: bool, detail: str) -> bool:
    print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    return ok


# -- 1: propagation against a naive loop -----------------------------------

def _sample(arr, x, y):
    h, w = arr.shape[:2]
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    tx, ty = x - x0, y - y0
    return ((arr[y0, x0] * (1 - tx) + arr[y0, x1] * tx) * (1 - ty)
            + (arr[y1, x0] * (1 - tx) + arr[y1, x1] * tx) * ty)


def _naive(feat, offsets, window, dilation, temperature, disp, mask):
    h, w, c = feat.shape
    r = window // 2
    dp = np.zeros((h, w))
    cp = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            logits, ds, ms = [], [], []
            i = 0
            for v in range(-r, r + 1):
                for u in range(-r, r + 1):
                    sx = x + dilation * (u + offsets[y, x, i, 0])
                    sy = y + dilation * (v + offsets[y, x, i, 1])
                    logits.append(float(np.dot(feat[y, x], _sample(feat, sx, sy))) / (c * temperature))
                    ds.append(_sample(disp, sx, sy))
                    ms.append(_sample(mask, sx, sy))
                    i += 1
            a = np.exp(np.array(logits) - max(logits))
            a /= a.sum()
            dp[y, x] = float(np.dot(a, ds))
            cp[y, x] = float(np.dot(a, ms))
    return dp, cp


def _prop_case(seed, window, size=16):
    rng = np.random.default_rng(seed)
    feats = extract_features(ImageGrid(rng.random((size, size))))
    offsets = OffsetField(rng.uniform(-1, 1, (size, size, window * window, 2)), window)
    mask = rng.random((size, size)) < rng.uniform(0.05, 0.5)
    hints = SparseHintMap(np.where(mask, rng.uniform(0.5, 60, (size, size)), 0.0), mask)
    return rng, feats, offsets, hints


def check_1() -> bool:
    worst = 0.0
    elapsed = 0.0
    cases = 0
    for seed in range(21):
        window = (3, 5, 9)[seed % 3]
        rng, feats, offsets, hints = _prop_case(seed, window)
        dilation = float(rng.uniform(0.5, 2.5))
        temperature = float(rng.uniform(0.3, 2.0))
        t = time.perf_counter()
        out = propagate(hints, propagation_weights(feats, offsets, dilation, temperature), offsets)
        elapsed += time.perf_counter() - t
        dp, cp = _naive(feats.data, offsets.offsets, window, dilation, temperature,
                        hints.disparity, hints.mask_float)
        worst = max(worst, np.abs(out.disparity - dp).max(), np.abs(out.confidence - cp).max())
        cases += 1
    ok = worst < 1e-5 and elapsed < 10.0
    return report(1, ok, f"{cases} cases, max |diff| {worst:.2e}, optimized runtime {elapsed:.2f} s")


# -- 2: weight and confidence invariants -----------------------------------

def check_2() -> bool:
    pixels = 0
    violations = 0
    for seed in range(25):
        window = (3, 5, 9)[seed % 3]
        rng, feats, offsets, hints = _prop_case(1000 + seed, window, size=20)
        dilation = float(rng.uniform(0.5, 3.0))
        wts = propagation_weights(feats, offsets, dilation, float(rng.uniform(0.1, 5.0)))
        out = propagate(hints, wts, offsets)
        h, w = hints.shape
        violations += int(np.count_nonzero(np.abs(wts.weights.sum(axis=-1) - 1.0) > 1e-5))
        violations += int(np.count_nonzero((out.confidence < 0) | (out.confidence > 1)))
        vals = hints.disparity
        for y in range(h):
            for x in range(w):
                pts = deform_window(x, y, window, dilation, offsets)
                px = np.clip(pts[:, 0], 0, w - 1)
                py = np.clip(pts[:, 1], 0, h - 1)
                x0, y0 = np.floor(px).astype(int), np.floor(py).astype(int)
                x1, y1 = np.minimum(x0 + 1, w - 1), np.minimum(y0 + 1, h - 1)
                top = max(vals[y0, x0].max(), vals[y0, x1].max(), vals[y1, x0].max(), vals[y1, x1].max())
                if out.disparity[y, x] > out.confidence[y, x] * top * (1 + 1e-12) + 1e-12:
                    violations += 1
        pixels += h * w
    return report(2, violations == 0 and pixels >= 10_000, f"{pixels} pixels, {violations} violations")


# -- 3: modulation identity and peak ---------------------------------------

def check_3() -> bool:
    rng = np.random.default_rng(3)
    params = ModulationParams(k=2.0, omega=8.0, rho=0.4)
    cv = CostVolume(rng.uniform(0, 2, (30, 40, 64)), 2.0)
    same = gaussian_modulate(cv, SemiDenseHint.empty(cv.shape), params)
    identity = np.array_equal(same.cost, cv.cost)

    dp = rng.uniform(0, 63, (30, 40))
    cp = rng.uniform(0.41, 1.0, (30, 40))
    flat = CostVolume(np.full((30, 40, 64), 0.7), 2.0)
    best = gaussian_modulate(flat, SemiDenseHint(dp, cp), params).cost.argmin(axis=-1)
    peak = float(np.mean(best == np.rint(dp)))

    f = modulation_weights(SemiDenseHint(np.array([[20.0]]), np.array([[1.0]])), 40, params)[0, 0]
    f_err = max(abs(f[28] - 2 * np.exp(-0.5)), abs(f[12] - 2 * np.exp(-0.5)))
    ok = identity and peak == 1.0 and f_err <= 1e-9
    return report(3, ok, f"identity {identity}, argmin = round(D_p) on {peak:.1%}, "
                          f"|f(8) - 2e^-0.5| = {f_err:.1e}")


# -- 4: end-to-end accuracy on planes --------------------------------------

def _scene(layout, seed=0):
    return render_scene(SceneSpec(Layout.parse(layout), rig=RIG, size=(384, 512), texture_seed=seed,
                                  hint_density=0.05))


def _lidar(sc) -> DepthMap:
    h = sc.hint_depth()
    return DepthMap(h.disparity, h.valid_mask)


def _run(sc, cfg, use_hints=True):
    t = time.perf_counter()
    res = run_arrays(sc.left, sc.right, _lidar(sc), sc.spec.rig, cfg, sc.gt_depth, use_hints=use_hints)
    return res, time.perf_counter() - t


def check_4() -> bool:
    cfg = Config()
    parallel.set_threads(1)
    lines = []
    ok = True
    for layout, need_frac, need_rmse in [("fronto_plane:10", 0.99, 300.0),
                                         ("slanted_plane:10,1.0", 0.97, None),
                                         ("slanted_plane:12,-0.8", 0.97, None)]:
        sc = _scene(layout)
        res, secs = _run(sc, cfg)
        frac = float(np.mean(np.abs(res.disparity - sc.gt_disparity)[sc.visible_mask] < 1.0))
        rmse = res.metrics[0].rmse_mm
        good = frac >= need_frac and secs < 30.0 and (need_rmse is None or rmse < need_rmse)
        ok &= good
        lines.append(f"{layout}: {frac:.2%} within 1 px, RMSE {rmse:.0f} mm, {secs:.1f} s")
    return report(4, ok, "; ".join(lines))


# -- 5: hints help at the occlusion boundary -------------------------------

def check_5() -> bool:
    cfg = Config()
    with_h, without = [], []
    for seed in range(10):
        sc = _scene("two_box:8,25", seed)
        with_h.append(_run(sc, cfg, True)[0].metrics[0].rmse_mm)
        without.append(_run(sc, cfg, False)[0].metrics[0].rmse_mm)
    a, b = float(np.mean(with_h)), float(np.mean(without))
    return report(5, a <= 0.8 * b, f"mean RMSE with hints {a:.0f} mm, without {b:.0f} mm, ratio {a / b:.2f}")


# -- 6: quadratic triangulation law ----------------------------------------

def check_6() -> bool:
    errs = {}
    for z in (20.0, 40.0):
        gt = np.full((32, 32), RIG.bf / z)
        pred = triangulate(gt + 0.25, RIG)
        errs[z] = depth_metrics(pred, DepthMap(np.full((32, 32), z), np.ones((32, 32), bool)))[0].rmse_mm
    ratio = errs[40.0] / errs[20.0]
    return report(6, abs(ratio - 4.0) <= 0.2, f"error ratio Z=40/Z=20 is {ratio:.3f}")


# -- 7: LiDAR-anchored residuals remove a disparity bias -------------------

def check_7() -> bool:
    cfg = Config()
    sc = _scene("fronto_plane:10")
    lidar = sc.hint_depth()

    def ratio(disp, gt):
        zero = triangulate(disp, RIG, ResidualMaps.zeros(disp.shape))
        anchored = triangulate(disp, RIG, lidar_anchored_residuals(disp, RIG, lidar))
        r0 = evaluate(zero, gt, RIG, cfg)[0].rmse_mm
        r1 = evaluate(anchored, gt, RIG, cfg)[0].rmse_mm
        return r0, r1

    # the bias is the only disparity error here
    r0, r1 = ratio(sc.gt_disparity + 0.5, sc.gt_depth)
    # same bias on top of the stereo estimate, for context (not gated)
    res, _ = _run(sc, cfg)
    p0, p1 = ratio(res.disparity + 0.5, sc.gt_depth)
    v0, v1 = ratio(res.disparity + 0.5, DepthMap(sc.gt_depth.depth, sc.visible_mask))
    return report(7, r1 <= 0.5 * r0,
                  f"RMSE {r0:.0f} mm -> {r1:.0f} mm (ratio {r1 / r0:.2f}); on stereo output: "
                  f"all pixels {p0:.0f} -> {p1:.0f} mm ({p1 / p0:.2f}), "
                  f"non-occluded {v0:.0f} -> {v1:.0f} mm ({v1 / v0:.2f})")


# -- 8: metric arithmetic --------------------------------------------------

def check_8() -> bool:
    gt = DepthMap(np.ones((3, 3)), np.ones((3, 3), bool))
    (r,) = depth_metrics(DepthMap(np.full((3, 3), 2.0), np.ones((3, 3), bool)), gt)
    mae_ok = abs(r.mae_mm - 1000.0) <= 1e-9 and abs(r.imae - 500.0) <= 1e-9

    gd = np.array([50.0, 100.0, 50.0, 10.0, 80.0])
    pd = gd + np.array([4.0, 4.0, 2.0, -3.5, 3.9])
    _, d1 = disparity_metrics(pd, gd)
    d1_ok = abs(d1 - 40.0) <= 1e-9

    rng = np.random.default_rng(8)
    depth = rng.uniform(1, 99, (40, 40))
    gtm = DepthMap(depth, np.ones_like(depth, bool))
    pred = DepthMap(depth + rng.normal(0, 1.5, depth.shape) + 2.0, np.ones_like(depth, bool))
    whole = depth_metrics(pred, gtm)[0].rmse_mm
    parts = depth_metrics(pred, gtm, parse_buckets("0-20,20-100"))
    rec = combine_rmse(parts)
    rec_ok = abs(rec - whole) <= 1e-9 * whole and sum(p.valid_count for p in parts) == depth.size
    ok = mae_ok and d1_ok and rec_ok
    return report(8, ok, f"MAE {r.mae_mm:.9f} mm, iMAE {r.imae:.9f} 1/km, D1 {d1:.9f}%, "
                          f"bucket recombination diff {abs(rec - whole):.1e} mm")


# -- 9: thread-count determinism -------------------------------------------

def check_9(tmp) -> bool:
    import os

    scene = os.path.join(tmp, "scene")
    if cli_main(["synth", "--layout", "two_box:8,25", "--seed", "7", "--out", scene]) != 0:
        return report(9, False, "synth failed")
    digests = {}
    for n in (1, 2, 8):
        out = os.path.join(tmp, f"t{n}")
        code = cli_main(["run", "--left", f"{scene}/left.png", "--right", f"{scene}/right.png",
                         "--lidar", f"{scene}/lidar.png", "--rig", "0.54,721", "--seed", "7",
                         "--threads", str(n), "--out", out])
        if code != 0:
            return report(9, False, f"run with {n} threads exited {code}")
        digests[n] = tuple(open(os.path.join(out, f), "rb").read() for f in OUTPUT_FILES)
    parallel.set_threads(1)
    same = digests[1] == digests[2] == digests[8]
    return report(9, same, f"{len(OUTPUT_FILES)} output files byte-identical for 1, 2 and 8 threads: {same}")


# -- pytest entry points ---------------------------------------------------

@pytest.mark.parametrize("n", range(1, 9))
def test_criterion(n, capsys):
    with capsys.disabled():
        ok = globals()[f"check_{n}"]()
    assert ok


def test_criterion_9(tmp_path, capsys):
    with capsys.disabled():
        ok = check_9(str(tmp_path))
    assert ok


if __name__ == "__main__":
    import tempfile

    results = [globals()[f"check_{n}"]() for n in range(1, 9)]
    with tempfile.TemporaryDirectory() as tmp:
        results.append(check_9(tmp))
    sys.exit(0 if all(results) else 1)
