"""End-to-end stereo + LiDAR depth: propagation, guided cascade, triangulation."""

from __future__ import annotations

import json
import os
import platform
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__, _kernels, parallel
from .aggregation import (
    AggregationParams,
    CascadeParams,
    CascadeResult,
    coarse_to_fine,
    fill_out_of_view,
    upsample_bilinear,
    upsample_disparity,
)
from .config import Config
from .cost_volume import ModulationParams
from .depth import (
    ErrorMap,
    ResidualMaps,
    external_residuals,
    lidar_anchored_residuals,
    triangulate,
    warp_error_map,
)
from .features import CostParams, FeatureMap, extract_features
from .grid import CameraRig, DepthMap, ImageGrid, SparseHintMap, build_pyramid, downsample_hints
from .io import (
    FormatError,
    read_depth_png,
    read_image,
    require_file,
    write_depth_png,
    write_pfm,
    write_pfm_stack,
)
from .metrics import MetricReport, depth_metrics, disparity_metrics
from .propagation import SemiDenseHint, make_offset_field, propagate, propagation_weights

BASE_FACTOR = 4


class InputError(Exception):
    """Unreadable, missing or inconsistent inputs."""


class StageError(Exception):
    """A compute stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage


class _Timer:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, stage: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            out = fn(*args, **kwargs)
        except (InputError, StageError):
            raise
        except Exception as exc:
            raise StageError(stage, exc) from exc
        self.timings[stage] = self.timings.get(stage, 0.0) + time.perf_counter() - t0
        return out


def cascade_params(cfg: Config, use_hints: bool = True) -> CascadeParams:
    return CascadeParams(
        d_max=cfg["volume.d_max"],
        cost=CostParams(cfg["cost.census_w"], cfg["cost.grad_w"], cfg["cost.max_cost"]),
        modulation=ModulationParams(cfg["cg.k"], cfg["cg.omega"], cfg["cg.rho"]),
        aggregation=AggregationParams(cfg["agg.p1"], cfg["agg.p2"], cfg["agg.paths"],
                                      cfg["agg.lambda_u"], cfg["agg.r_min"], cfg["agg.edge_scale"]),
        modulate=cfg["cg.enable"] and use_hints,
        hint_weight=cfg["volume.hint_weight"] if use_hints else 0.0,
        tau=cfg["volume.tau"],
        temperature=cfg["volume.temperature"],
        fine_paths=cfg["agg.fine_paths"],
        base_factor=BASE_FACTOR,
    )


def lidar_to_disparity(lidar: DepthMap, rig: CameraRig) -> SparseHintMap:
    disp = np.divide(rig.bf, lidar.depth, out=np.zeros(lidar.shape), where=lidar.valid_mask)
    return SparseHintMap(disp, lidar.valid_mask)


def check_geometry(shape, cfg: Config) -> None:
    """Reject images too small for the configured pyramid."""
    levels = cfg["pyramid.levels"]
    need = BASE_FACTOR * 2 ** (levels - 1)
    if min(shape) < need * 4:
        raise InputError(f"image {shape[0]}x{shape[1]} is too small for {levels} cascade levels "
                         f"(need at least {need * 4} px per side)")


def feature_pyramid(image: ImageGrid, cfg: Config) -> tuple[list[ImageGrid], list[FeatureMap]]:
    """Pyramid entries at 1/4, 1/8, ... with their features, finest first."""
    pyr = build_pyramid(image, cfg["pyramid.levels"] + 2)[2:]
    feats = [extract_features(g, cfg["census_window"], cfg["context_radii"]) for g in pyr]
    return pyr, feats


def propagate_hints(features: FeatureMap, hints: SparseHintMap, cfg: Config) -> SemiDenseHint:
    """Sparse full-resolution disparity hints to a semi-dense 1/4-resolution map."""
    low = downsample_hints(hints, BASE_FACTOR)
    if low.shape != features.shape:
        raise InputError(f"hints reduce to {low.shape} but features are {features.shape}")
    window = cfg["propagation.window"]
    dilation = cfg["propagation.dilation"]
    offsets = make_offset_field(
        cfg["propagation.offset_source"], window, shape=low.shape, features=features,
        path=cfg["propagation.offsets_path"] or None, dilation=dilation,
        edge_scale=cfg["propagation.edge_scale"],
    )
    weights = propagation_weights(features, offsets, dilation, cfg["propagation.temperature"])
    return propagate(low, weights, offsets, normalize=cfg["propagation.normalize"])


@dataclass
class StereoResult:
    disparity: np.ndarray  # full resolution
    confidence: np.ndarray  # full resolution
    hint: SemiDenseHint | None
    cascade: CascadeResult
    timings: dict = field(default_factory=dict)


def stereo(left: ImageGrid, right: ImageGrid, hints: SparseHintMap | None, cfg: Config,
           use_hints: bool = True, keep_volumes: bool = False, timer: _Timer | None = None
           ) -> StereoResult:
    """Full-resolution disparity from a rectified pair and optional disparity hints.

    ``use_hints=False`` runs the same cascade with the hint channel and the
    modulation switched off; the propagated hint still feeds the out-of-view
    fill when ``hints`` is given.
    """
    timer = timer or _Timer()
    if left.shape != right.shape:
        raise InputError(f"left {left.shape} and right {right.shape} differ in size")
    if hints is not None and hints.shape != left.shape:
        raise InputError(f"hints {hints.shape} do not match images {left.shape}")
    check_geometry(left.shape, cfg)
    imgs, lf = timer.run("features", feature_pyramid, left, cfg)
    _, rf = timer.run("features", feature_pyramid, right, cfg)
    hint = None
    if hints is not None:
        hint = timer.run("propagate", propagate_hints, lf[0], hints, cfg)
    params = cascade_params(cfg, use_hints)
    result = timer.run("cascade", coarse_to_fine, lf, rf, imgs,
                       hint if use_hints else None, params, keep_volumes)
    dq = result.disparity
    if hint is not None and cfg["agg.fill_out_of_view"]:
        dq = fill_out_of_view(dq, hint, cfg["cg.rho"], cfg["census_window"] // 2)
    sigma = cfg["upsample.sigma_range"] or None
    disp = timer.run("upsample", upsample_disparity, dq, left, BASE_FACTOR, sigma)
    if hint is not None:
        conf = np.clip(upsample_bilinear(hint.confidence, left.shape, float(BASE_FACTOR)), 0.0, 1.0)
    else:
        conf = np.zeros(left.shape)
    return StereoResult(disp, conf, hint, result, timer.timings)


def residuals_for(cfg: Config, disparity: np.ndarray, rig: CameraRig,
                  lidar: DepthMap | None) -> ResidualMaps:
    mode = cfg["ddc.residuals"]
    if mode == "zero" or (mode == "lidar" and lidar is None):
        return ResidualMaps.zeros(disparity.shape)
    if mode == "lidar":
        return lidar_anchored_residuals(
            disparity, rig, SparseHintMap(lidar.depth, lidar.valid_mask),
            window=cfg["propagation.window"], dilation=cfg["propagation.dilation"],
            rho=cfg["cg.rho"], factor=BASE_FACTOR, d_eps=cfg["ddc.d_eps"],
        )
    path = mode[len("file:"):]
    try:
        return external_residuals(path, disparity.shape)
    except (OSError, FormatError) as exc:
        raise InputError(f"residual maps {path}: {exc}") from exc


@dataclass
class PipelineResult:
    disparity: np.ndarray
    confidence: np.ndarray
    depth: DepthMap
    residuals: ResidualMaps
    error_map: ErrorMap
    stereo: StereoResult
    timings: dict
    metrics: list[MetricReport] | None = None


def run_arrays(left: ImageGrid, right: ImageGrid, lidar: DepthMap | None, rig: CameraRig,
               cfg: Config, gt: DepthMap | None = None, use_hints: bool = True,
               keep_volumes: bool = False, gt_disparity: np.ndarray | None = None
               ) -> PipelineResult:
    """In-memory pipeline; ``lidar`` holds metric depth at full resolution."""
    timer = _Timer()
    if lidar is not None and lidar.shape != left.shape:
        raise InputError(f"lidar {lidar.shape} does not match images {left.shape}")
    hints = lidar_to_disparity(lidar, rig) if lidar is not None else None
    st = stereo(left, right, hints, cfg, use_hints, keep_volumes, timer)
    res = timer.run("residuals", residuals_for, cfg, st.disparity, rig, lidar)
    depth = timer.run("triangulate", triangulate, st.disparity, rig, res, cfg["ddc.d_eps"])
    err = timer.run("error_map", warp_error_map, left, right, st.disparity)
    reports = None
    if gt is not None:
        reports = timer.run("eval", evaluate, depth, gt, rig, cfg, st.disparity, gt_disparity)
    return PipelineResult(st.disparity, st.confidence, depth, res, err, st, timer.timings, reports)


def evaluate(depth: DepthMap, gt: DepthMap, rig: CameraRig, cfg: Config,
             disparity: np.ndarray | None = None, gt_disparity: np.ndarray | None = None,
             buckets=None) -> list[MetricReport]:
    """Depth metrics with invalid predictions charged at the ``d_eps`` depth."""
    penalty = rig.bf / cfg["ddc.d_eps"]
    reports = depth_metrics(depth, gt, buckets, penalty_depth=penalty)
    if disparity is not None and gt_disparity is not None:
        epe, d1 = disparity_metrics(disparity, gt_disparity, gt.valid_mask)
        reports = [_with_disp(r, epe, d1) for r in reports]
    return reports


def _with_disp(r: MetricReport, epe: float, d1: float) -> MetricReport:
    return replace(r, epe_px=epe, d1_pct=d1)


# file outputs of a run, in write order
OUTPUT_FILES = ("disparity.pfm", "depth.png", "confidence.pfm", "error_map.pfm")


def load_inputs(left_path, right_path, lidar_path=None):
    try:
        left = read_image(require_file(left_path))
        right = read_image(require_file(right_path))
        lidar = read_depth_png(require_file(lidar_path)) if lidar_path else None
    except (OSError, FormatError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    if left.shape != right.shape:
        raise InputError(f"left {left.shape} and right {right.shape} differ in size")
    if left.channels != right.channels:
        raise InputError("left and right images have different channel counts")
    if lidar is not None and lidar.shape != left.shape:
        raise InputError(f"lidar {lidar.shape} does not match images {left.shape}")
    return left, right, lidar


def write_outputs(out_dir, result: PipelineResult) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, name) for name in OUTPUT_FILES]
    write_pfm(paths[0], result.disparity)
    write_depth_png(paths[1], result.depth)
    write_pfm(paths[2], result.confidence)
    err = result.error_map.error
    write_pfm(paths[3], err[:, :, 0] if err.shape[2] == 1 else err)
    return paths


def dump_volumes(out_dir, cascade: CascadeResult) -> list[str]:
    """One PFM stack per cascade level, planes ordered by disparity."""
    paths = []
    for lvl in cascade.levels:
        if lvl.volume is None:
            continue
        path = os.path.join(out_dir, f"volume_1_{lvl.factor}.pfm")
        write_pfm_stack(path, np.moveaxis(lvl.volume.cost, 2, 0))
        paths.append(path)
    return paths


def versions() -> dict:
    return {
        "sdgfuse": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "backend": _kernels.BACKEND,
    }


def write_manifest(out_dir, cfg: Config, result: PipelineResult, inputs: dict, seed: int | None,
                   outputs: list[str]) -> str:
    manifest = {
        "config": cfg.as_dict(),
        "inputs": inputs,
        "seed": seed,
        "threads": parallel.get_threads(),
        "timings_s": {k: round(v, 6) for k, v in result.timings.items()},
        "versions": versions(),
        "outputs": [os.path.basename(p) for p in outputs],
    }
    if result.metrics:
        manifest["metrics"] = [r.as_dict() for r in result.metrics]
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def run_pipeline(left_path, right_path, lidar_path, rig: CameraRig, cfg: Config, out_dir,
                 gt_path=None, seed: int | None = None, dump_volume: bool = False) -> PipelineResult:
    """File-level pipeline.  Nothing is written unless every stage succeeds."""
    left, right, lidar = load_inputs(left_path, right_path, lidar_path)
    gt = None
    if gt_path:
        try:
            gt = read_depth_png(require_file(gt_path))
        except (OSError, FormatError, ValueError) as exc:
            raise InputError(str(exc)) from exc
        if gt.shape != left.shape:
            raise InputError(f"ground truth {gt.shape} does not match images {left.shape}")
    check_geometry(left.shape, cfg)
    result = run_arrays(left, right, lidar, rig, cfg, gt, keep_volumes=dump_volume)
    outputs = write_outputs(out_dir, result)
    if dump_volume:
        outputs += dump_volumes(out_dir, result.stereo.cascade)
    inputs = {"left": os.fspath(left_path), "right": os.fspath(right_path),
              "lidar": os.fspath(lidar_path) if lidar_path else None,
              "rig": [rig.baseline_m, rig.focal_px], "gt": os.fspath(gt_path) if gt_path else None}
    write_manifest(out_dir, cfg, result, inputs, seed, outputs)
    return result
