"""``sdg-fuse`` command line: synth, propagate, match, depth, eval, run."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__, parallel
from .config import ConfigError, help_text, parse_config
from .depth import triangulate, warp_error_map
from .grid import CameraRig, DepthMap, ImageGrid
from .io import (
    FormatError,
    read_depth_png,
    read_image,
    read_pfm,
    require_file,
    write_depth_png,
    write_image_png,
    write_pfm,
)
from .metrics import depth_metrics, format_reports, parse_buckets
from .pipeline import (
    InputError,
    StageError,
    dump_volumes,
    evaluate,
    feature_pyramid,
    lidar_to_disparity,
    load_inputs,
    propagate_hints,
    residuals_for,
    run_pipeline,
    stereo,
)
from .synth import Layout, SceneSpec, render_scene

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_COMPUTE = 0, 2, 3, 4

log = logging.getLogger("sdgfuse")


def _rig(text: str) -> CameraRig:
    try:
        return CameraRig.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must be HxW, got {text!r}") from None
    return h, w


def _read(fn, path):
    try:
        return fn(require_file(path))
    except (OSError, FormatError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_synth(args, cfg) -> None:
    try:
        spec = SceneSpec(Layout.parse(args.layout), args.rig, args.size, args.seed,
                         args.density, args.noise)
        sc = render_scene(spec)
    except ValueError as exc:
        raise InputError(f"scene: {exc}") from exc
    out = args.out
    os.makedirs(out, exist_ok=True)
    write_image_png(os.path.join(out, "left.png"), sc.left)
    write_image_png(os.path.join(out, "right.png"), sc.right)
    lidar = sc.hint_depth()
    write_depth_png(os.path.join(out, "lidar.png"), DepthMap(lidar.disparity, lidar.valid_mask))
    write_depth_png(os.path.join(out, "gt_depth.png"), sc.gt_depth)
    write_pfm(os.path.join(out, "gt_disparity.pfm"), sc.gt_disparity)
    write_image_png(os.path.join(out, "nonoccluded.png"),
                    ImageGrid(sc.visible_mask.astype(np.float64)), bits=8)
    meta = {"layout": str(spec.layout), "rig": [spec.rig.baseline_m, spec.rig.focal_px],
            "size": list(spec.size), "seed": args.seed, "hint_density": args.density,
            "hint_noise_px": args.noise, "version": __version__}
    with open(os.path.join(out, "scene.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def cmd_propagate(args, cfg) -> None:
    left = _read(read_image, args.left)
    lidar = _read(read_depth_png, args.lidar)
    if lidar.shape != left.shape:
        raise InputError(f"lidar {lidar.shape} does not match image {left.shape}")
    _, feats = feature_pyramid(left, cfg)
    hint = propagate_hints(feats[0], lidar_to_disparity(lidar, args.rig), cfg)
    os.makedirs(args.out, exist_ok=True)
    write_pfm(os.path.join(args.out, "hint_disparity.pfm"), hint.disparity)
    write_pfm(os.path.join(args.out, "hint_confidence.pfm"), hint.confidence)


def cmd_match(args, cfg) -> None:
    if args.lidar and args.rig is None:
        raise InputError("--lidar needs --rig to convert depth to disparity")
    left, right, lidar = load_inputs(args.left, args.right, args.lidar)
    hints = lidar_to_disparity(lidar, args.rig) if lidar is not None else None
    st = stereo(left, right, hints, cfg, use_hints=not args.no_hints, keep_volumes=args.dump_volume)
    os.makedirs(args.out, exist_ok=True)
    write_pfm(os.path.join(args.out, "disparity.pfm"), st.disparity)
    write_pfm(os.path.join(args.out, "confidence.pfm"), st.confidence)
    if args.dump_volume:
        dump_volumes(args.out, st.cascade)


def cmd_depth(args, cfg) -> None:
    left, right, lidar = load_inputs(args.left, args.right, args.lidar)
    disparity = _read(read_pfm, args.disparity)
    if disparity.shape != left.shape:
        raise InputError(f"disparity {disparity.shape} does not match images {left.shape}")
    if args.residuals:
        cfg.set("ddc.residuals", args.residuals, "--residuals: ")
    res = residuals_for(cfg, disparity, args.rig, lidar)
    depth = triangulate(disparity, args.rig, res, cfg["ddc.d_eps"])
    err = warp_error_map(left, right, disparity).error
    os.makedirs(args.out, exist_ok=True)
    write_depth_png(os.path.join(args.out, "depth.png"), depth)
    write_pfm(os.path.join(args.out, "error_map.pfm"), err[:, :, 0] if err.shape[2] == 1 else err)
    if res.clamped_count:
        log.warning("%d residual values were clamped", res.clamped_count)


def _gt_rig(gt_dir, rig):
    if rig is not None:
        return rig
    meta = os.path.join(gt_dir, "scene.json")
    if os.path.isfile(meta):
        with open(meta, encoding="utf-8") as fh:
            b, f = json.load(fh)["rig"]
        return CameraRig(b, f)
    return None


def cmd_eval(args, cfg) -> None:
    pred = _read(read_depth_png, os.path.join(args.pred, "depth.png"))
    gt = _read(read_depth_png, os.path.join(args.gt, "gt_depth.png"))
    if pred.shape != gt.shape:
        raise InputError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    mask_path = os.path.join(args.gt, "nonoccluded.png")
    if args.nonoccluded:
        mask = _read(read_image, mask_path).data[:, :, 0] > 0.5
        gt = DepthMap(gt.depth, gt.valid_mask & mask)
    disp = gt_disp = None
    if os.path.isfile(os.path.join(args.pred, "disparity.pfm")) and \
            os.path.isfile(os.path.join(args.gt, "gt_disparity.pfm")):
        disp = _read(read_pfm, os.path.join(args.pred, "disparity.pfm"))
        gt_disp = _read(read_pfm, os.path.join(args.gt, "gt_disparity.pfm"))
    rig = _gt_rig(args.gt, args.rig)
    buckets = parse_buckets(args.buckets) if args.buckets else None
    if rig is None:
        reports = depth_metrics(pred, gt, buckets)
    else:
        reports = evaluate(pred, gt, rig, cfg, disp, gt_disp, buckets)
    if not reports:
        raise InputError("no pixel is valid in both prediction and ground truth")
    print(format_reports(reports, args.format))


def cmd_run(args, cfg) -> None:
    result = run_pipeline(args.left, args.right, args.lidar, args.rig, cfg, args.out,
                          gt_path=args.gt, seed=args.seed, dump_volume=args.dump_volume)
    if result.metrics:
        print(format_reports(result.metrics, "table"))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--threads", type=int, default=1, help="worker threads (0 = all cores)")
    common.add_argument("--seed", type=int, default=0, help="seed recorded in the manifest / used by synth")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--dump-volume", action="store_true", help="write per-level cost volumes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(
        prog="sdg-fuse", description="Stereo depth guided by sparse LiDAR.",
        epilog=help_text(), formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="render a synthetic scene")
    s.add_argument("--layout", required=True, help="fronto_plane:Z | slanted_plane:Z0,slope | two_box:Zn,Zf")
    s.add_argument("--size", type=_size, default=(384, 512), help="HxW")
    s.add_argument("--rig", type=_rig, default=CameraRig(0.54, 721.0), help="baseline_m,focal_px")
    s.add_argument("--density", type=float, default=0.05, help="hint density")
    s.add_argument("--noise", type=float, default=0.0, help="hint noise stddev (px)")
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("propagate", parents=[common], help="sparse LiDAR to semi-dense 1/4 hints")
    s.add_argument("--left", required=True)
    s.add_argument("--lidar", required=True, help="16-bit depth PNG")
    s.add_argument("--rig", type=_rig, required=True)
    s.set_defaults(fn=cmd_propagate)

    s = sub.add_parser("match", parents=[common], help="guided stereo to a full-res disparity")
    s.add_argument("--left", required=True)
    s.add_argument("--right", required=True)
    s.add_argument("--lidar")
    s.add_argument("--rig", type=_rig)
    s.add_argument("--no-hints", action="store_true", help="hint channel and modulation off")
    s.set_defaults(fn=cmd_match)

    s = sub.add_parser("depth", parents=[common], help="triangulate a disparity map")
    s.add_argument("--left", required=True)
    s.add_argument("--right", required=True)
    s.add_argument("--disparity", required=True)
    s.add_argument("--lidar")
    s.add_argument("--rig", type=_rig, required=True)
    s.add_argument("--residuals", help="zero | lidar | file:DIR (overrides ddc.residuals)")
    s.set_defaults(fn=cmd_depth)

    s = sub.add_parser("eval", parents=[common], help="score a prediction directory")
    s.add_argument("--pred", required=True, help="directory with depth.png [disparity.pfm]")
    s.add_argument("--gt", required=True, help="directory with gt_depth.png [gt_disparity.pfm]")
    s.add_argument("--buckets", default="0-20,20-100", help="LO-HI,... in meters ('' for none)")
    s.add_argument("--format", choices=("table", "csv", "json-lines"), default="table")
    s.add_argument("--rig", type=_rig, help="sets the invalid-prediction penalty depth")
    s.add_argument("--nonoccluded", action="store_true", help="restrict to gt nonoccluded.png")
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("run", parents=[common], help="full pipeline")
    s.add_argument("--left", required=True)
    s.add_argument("--right", required=True)
    s.add_argument("--lidar")
    s.add_argument("--rig", type=_rig, required=True)
    s.add_argument("--gt", help="ground-truth depth PNG for metrics")
    s.set_defaults(fn=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"sdg-fuse: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 0:
        print("sdg-fuse: config error: --threads must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    parallel.set_threads(args.threads)
    try:
        args.fn(args, cfg)
    except ConfigError as exc:
        print(f"sdg-fuse: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"sdg-fuse: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StageError as exc:
        print(f"sdg-fuse: compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except (ValueError, FormatError) as exc:
        print(f"sdg-fuse: compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
