import json
import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sdgfuse.grid import DepthMap
from sdgfuse.metrics import (
    combine_rmse,
    depth_metrics,
    disparity_metrics,
    format_reports,
    parse_buckets,
)


def dm(arr):
    arr = np.asarray(arr, dtype=np.float64)
    return DepthMap(arr, arr > 0)


def test_constant_offset_example():
    gt = np.full((4, 4), 10.0)
    (r,) = depth_metrics(dm(gt + 0.1), dm(gt))
    assert r.rmse_mm == pytest.approx(100.0) and r.mae_mm == pytest.approx(100.0)
    assert r.irmse == pytest.approx(1000 / 10 - 1000 / 10.1)
    assert r.valid_count == 16 and r.invalid_pred_count == 0


def test_invalid_ground_truth_ignored_and_penalty_applied():
    gt = np.array([[10.0, 0.0, 10.0]])
    pred = np.array([[10.0, 3.0, 0.0]])
    (skip,) = depth_metrics(dm(pred), dm(gt))
    assert skip.valid_count == 1 and skip.rmse_mm == 0.0 and skip.invalid_pred_count == 1
    (pen,) = depth_metrics(dm(pred), dm(gt), penalty_depth=100.0)
    assert pen.valid_count == 2
    assert pen.rmse_mm == pytest.approx(np.sqrt(90.0**2 / 2) * 1000)


def test_d1_cases():
    gt = np.array([50.0, 100.0, 50.0, 10.0])
    pred = gt + np.array([4.0, 4.0, 2.0, -3.5])
    epe, d1 = disparity_metrics(pred, gt)
    assert epe == pytest.approx(13.5 / 4)
    assert d1 == pytest.approx(50.0)  # first and last exceed both 3 px and 5%


@given(st.integers(0, 10_000))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    gt = rng.uniform(1, 80, 64)
    pred = gt + rng.normal(0, 1, 64)
    perm = rng.permutation(64)
    a = depth_metrics(dm(pred[None]), dm(gt[None]))[0]
    b = depth_metrics(dm(pred[perm][None]), dm(gt[perm][None]))[0]
    assert a.rmse_mm == pytest.approx(b.rmse_mm) and a.imae == pytest.approx(b.imae)


@given(st.integers(0, 10_000))
def test_bucket_recombination(seed):
    rng = np.random.default_rng(seed)
    gt = rng.uniform(1, 99, (8, 8))
    pred = np.abs(gt + rng.normal(0, 2, gt.shape)) + 0.01
    whole = depth_metrics(dm(pred), dm(gt))[0]
    parts = depth_metrics(dm(pred), dm(gt), buckets=parse_buckets("0-20,20-100"))
    assert sum(p.valid_count for p in parts) == whole.valid_count
    assert combine_rmse(parts) == pytest.approx(whole.rmse_mm, rel=1e-9)


@given(st.integers(0, 10_000), st.floats(0.1, 10))
def test_scaling_law(seed, s):
    rng = np.random.default_rng(seed)
    gt = rng.uniform(1, 50, (5, 5))
    pred = gt * rng.uniform(0.8, 1.2, gt.shape)
    a = depth_metrics(dm(pred), dm(gt))[0]
    b = depth_metrics(dm(pred * s), dm(gt * s))[0]
    assert b.rmse_mm == pytest.approx(s * a.rmse_mm, rel=1e-9)
    assert b.irmse == pytest.approx(a.irmse / s, rel=1e-9)


def test_empty_bucket_omitted(caplog):
    gt = np.full((3, 3), 10.0)
    with caplog.at_level(logging.INFO, logger="sdgfuse.metrics"):
        reports = depth_metrics(dm(gt), dm(gt), buckets=[(0, 20), (20, 100)])
    assert [r.bucket for r in reports] == [(0.0, 20.0)]
    assert "omitted" in caplog.text


def test_bucket_parsing():
    assert parse_buckets("0-20, 20-100") == [(0.0, 20.0), (20.0, 100.0)]
    for bad in ("20", "30-10", "a-b"):
        with pytest.raises(ValueError):
            parse_buckets(bad)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        depth_metrics(dm(np.ones((2, 2))), dm(np.ones((2, 3))))
    with pytest.raises(ValueError):
        disparity_metrics(np.zeros(3), np.zeros(3))


def test_formats():
    gt = np.full((2, 2), 10.0)
    reports = depth_metrics(dm(gt + 1), dm(gt), buckets=[(0, 20)])
    rows = [json.loads(line) for line in format_reports(reports, "json-lines").splitlines()]
    assert rows[0]["bucket"] == [0, 20] and rows[0]["rmse_mm"] == pytest.approx(1000.0)
    csv = format_reports(reports, "csv").splitlines()
    assert csv[0].startswith("bucket,rmse_mm") and csv[1].startswith("0-20,1000.0000")
    assert "rmse_mm" in format_reports(reports)
    with pytest.raises(ValueError):
        format_reports(reports, "xml")
