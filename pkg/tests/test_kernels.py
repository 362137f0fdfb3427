import numpy as np
import pytest

from sdgfuse import _kernels, parallel

pytestmark = pytest.mark.skipif("cython" not in _kernels.BACKENDS,
                                reason="compiled extension not built")

NP = _kernels.BACKENDS["numpy"]


def cy():
    return _kernels.BACKENDS["cython"]


def coords(rng, h, w, n):
    return rng.uniform(-3, w + 2, (h, w, n)), rng.uniform(-3, h + 2, (h, w, n))


def test_window_weights_agree(rng):
    feats = np.ascontiguousarray(rng.normal(size=(9, 11, 4)))
    xs, ys = coords(rng, 9, 11, 25)
    a = NP.window_weights(feats, xs, ys, 0, 9, 0.3)
    b = cy().window_weights(feats, xs, ys, 0, 9, 0.3)
    assert np.abs(np.asarray(a) - np.asarray(b)).max() < 1e-12


def test_window_propagate_agrees(rng):
    w = rng.random((9, 11, 9))
    w /= w.sum(axis=-1, keepdims=True)
    xs, ys = coords(rng, 9, 11, 9)
    vals = rng.uniform(0, 50, (9, 11))
    mask = (rng.random((9, 11)) < 0.4).astype(np.float64)
    a = NP.window_propagate(w, xs, ys, vals, mask, 2, 7)
    b = cy().window_propagate(w, xs, ys, vals, mask, 2, 7)
    for x, y in zip(a, b):
        assert np.abs(np.asarray(x) - np.asarray(y)).max() < 1e-12


@pytest.mark.parametrize("direction", [(0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (-1, 1), (1, -1), (-1, -1)])
def test_sgm_path_agrees(rng, direction):
    cost = rng.uniform(0, 3, (7, 8, 10))
    p2 = rng.uniform(0.5, 5, (7, 8))
    a = NP.sgm_path(cost, 0.2, p2, *direction)
    b = cy().sgm_path(cost, 0.2, p2, *direction)
    assert np.abs(np.asarray(a) - np.asarray(b)).max() < 1e-12


@pytest.mark.parametrize("inv", [0.0, 200.0])
def test_jbu_agrees(rng, inv):
    low = rng.uniform(0, 20, (5, 6))
    full = rng.random((20, 24))
    guide_low = full.reshape(5, 4, 6, 4).mean(axis=(1, 3))
    a = NP.jbu(low, full, guide_low, 4.0, inv, 3, 17)
    b = cy().jbu(low, full, guide_low, 4.0, inv, 3, 17)
    assert np.abs(np.asarray(a) - np.asarray(b)).max() < 1e-12


def test_row_tiling_is_exact(rng):
    low = rng.uniform(0, 20, (8, 8))
    full = rng.random((32, 32))
    guide_low = full.reshape(8, 4, 8, 4).mean(axis=(1, 3))
    whole = NP.jbu(low, full, guide_low, 4.0, 100.0, 0, 32)
    tiled = parallel.map_rows(lambda r0, r1: NP.jbu(low, full, guide_low, 4.0, 100.0, r0, r1), 32, threads=5)
    assert np.array_equal(whole, tiled)
