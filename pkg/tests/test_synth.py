import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdgfuse.depth import warp_error_map
from sdgfuse.grid import CameraRig, ImageGrid
from sdgfuse.synth import Layout, SceneSpec, render_scene, sample_hints

RIG = CameraRig(0.54, 721.0)


def scene(layout, **kw):
    kw.setdefault("size", (96, 160))
    return render_scene(SceneSpec(Layout.parse(layout), **kw))


def test_fronto_disparity_example():
    sc = scene("fronto_plane:5.4")
    assert np.allclose(sc.gt_disparity, 72.1)


def test_full_density_hints_equal_ground_truth():
    sc = scene("slanted_plane:10,1.0", hint_density=1.0)
    assert sc.hints.valid_mask.all()
    assert np.array_equal(sc.hints.disparity, sc.gt_disparity)


@pytest.mark.parametrize("near,far", [(8.0, 25.0), (5.0, 12.0)])
def test_occlusion_band_width(near, far):
    sc = scene(f"two_box:{near},{far}", size=(96, 384))
    dn, df = RIG.bf / near, RIG.bf / far
    h, w = sc.gt_disparity.shape
    c0 = (3 * w) // 8
    for y in range(h // 4 + 2, (3 * h) // 4 - 2):
        row = ~sc.visible_mask[y, int(np.ceil(df)) + 1 : c0]
        assert abs(int(row.sum()) - (dn - df)) <= 1.0


def test_hint_count_within_binomial_bound():
    gt = np.full((250, 400), 20.0)
    n = gt.size
    count = int(sample_hints(gt, 0.05, seed=3).valid_mask.sum())
    assert abs(count - 0.05 * n) <= 3 * np.sqrt(n * 0.05 * 0.95)


def test_hint_noise_and_clamp():
    gt = np.full((50, 50), 0.5)
    hints = sample_hints(gt, 1.0, noise_px=2.0, seed=1)
    assert np.all(hints.disparity >= 0) and np.any(hints.disparity == 0)
    assert np.array_equal(sample_hints(gt, 0.3, 1.0, seed=9).disparity,
                          sample_hints(gt, 0.3, 1.0, seed=9).disparity)


def test_same_spec_same_bytes():
    a = scene("two_box:8,25", texture_seed=4, hint_noise_px=0.5)
    b = scene("two_box:8,25", texture_seed=4, hint_noise_px=0.5)
    for x, y in [(a.left.data, b.left.data), (a.right.data, b.right.data),
                 (a.hints.disparity, b.hints.disparity), (a.gt_disparity, b.gt_disparity)]:
        assert x.tobytes() == y.tobytes()
    c = scene("two_box:8,25", texture_seed=5)
    assert not np.array_equal(a.left.data, c.left.data)


@settings(max_examples=10)
@given(st.sampled_from(["fronto_plane:7", "slanted_plane:10,1.0", "slanted_plane:12,-0.8",
                        "two_box:8,25"]), st.integers(0, 1000))
def test_photometric_consistency(layout, seed):
    sc = scene(layout, texture_seed=seed)
    err = warp_error_map(sc.left, sc.right, sc.gt_disparity)
    ok = sc.visible_mask & err.valid_mask
    assert ok.mean() > 0.5
    assert np.abs(err.error[ok]).max() < 1e-3


@pytest.mark.parametrize("layout", ["fronto_plane:7", "slanted_plane:10,1.0", "two_box:8,25"])
def test_depth_times_disparity_is_bf(layout):
    sc = scene(layout)
    assert np.allclose(sc.gt_depth.depth * sc.gt_disparity, RIG.bf, rtol=1e-12)


def test_rejections():
    with pytest.raises(ValueError):
        scene("fronto_plane:2.0")  # 194.7 px on a 160 px wide image
    with pytest.raises(ValueError):
        scene("fronto_plane:250")
    with pytest.raises(ValueError):
        scene("two_box:25,8")
    with pytest.raises(ValueError):
        SceneSpec(Layout.parse("fronto_plane:10"), hint_density=0.0)
    with pytest.raises(ValueError):
        Layout.parse("cube:1")
    assert str(Layout.parse("two_box:8,25")) == "two_box:8.0,25.0"
