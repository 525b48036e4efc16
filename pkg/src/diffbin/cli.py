"""Command-line front end.

Exit codes: 0 success, 1 validation/acceptance failure, 2 input or format error.
Option precedence: command-line flags, then ``--config`` JSON, then built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .boxform import (
    MIN_AREA_RECT,
    POLYGON,
    BoxformParams,
    form_boxes,
    format_detection,
    parse_detection_line,
)
from .dbcore import DbParams, db_loss_grads, db_map, finite_diff_check, total_loss
from .errors import DiffBinError, FormatError, InputError
from .evaluation import evaluate
from .labelgen import LabelSet, format_annotation, generate_labels, read_annotations
from .maps import DISTANCE, BinaryMap, fmap_read, fmap_write, png_export
from .synth import SHAPE_KINDS, SceneSpec, gen_scene, suite_specs

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
GRADCHECK_TOL = 1e-4
LABEL_FILES = ("prob_label", "thresh_label", "band_mask", "train_mask")


def _shared() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("shared options")
    g.add_argument("--config", help="JSON file of option defaults (keys are option names with underscores)")
    g.add_argument("--k", type=float, default=50.0, help="amplifying factor (default 50)")
    g.add_argument("--shrink-ratio", type=float, default=0.4, help="label shrink ratio r (default 0.4)")
    g.add_argument("--unclip-ratio", type=float, default=1.5, help="unclip ratio r' (default 1.5)")
    g.add_argument("--binarize-thresh", type=float, default=0.2, help="box-formation threshold (default 0.2)")
    g.add_argument("--score-thresh", type=float, default=0.5, help="minimum region score (default 0.5)")
    g.add_argument("--iou-thresh", type=float, default=0.5, help="evaluation IoU threshold (default 0.5)")
    g.add_argument("--t-min", type=float, default=0.3, help="threshold label minimum (default 0.3)")
    g.add_argument("--t-max", type=float, default=0.7, help="threshold label maximum (default 0.7)")
    g.add_argument("--min-side", type=float, default=3.0)
    g.add_argument("--approx-eps-ratio", type=float, default=0.01)
    g.add_argument("--output-mode", choices=(POLYGON, MIN_AREA_RECT), default=POLYGON)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output file or directory")
    return p


def _scene_flags(p: argparse.ArgumentParser, height: int = 512, width: int = 512) -> None:
    p.add_argument("--height", type=int, default=height)
    p.add_argument("--width", type=int, default=width)
    p.add_argument("--shape-kind", choices=SHAPE_KINDS, default="rotated_rect")
    p.add_argument("--side-min", type=float, default=40.0)
    p.add_argument("--side-max", type=float, default=120.0)
    p.add_argument("--min-gap", type=float, default=10.0)
    p.add_argument("--noise-sigma", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    shared = _shared()
    parser = argparse.ArgumentParser(prog="diffbin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"diffbin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-labels", parents=[shared], help="annotation file -> label FMAPs")
    p.add_argument("annotations")
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--png", action="store_true", help="also write PNG previews")

    p = sub.add_parser("boxform", parents=[shared], help="probability FMAP -> detection lines")
    p.add_argument("prob_map")

    p = sub.add_parser("gradcheck", parents=[shared], help="finite-difference check of the loss gradients")
    p.add_argument("--k-values", default="1,10,50", help="comma-separated k values")
    p.add_argument("--x-min", type=float, default=-1.0)
    p.add_argument("--x-max", type=float, default=1.0)
    p.add_argument("--x-step", type=float, default=0.01)
    p.add_argument("--h", type=float, default=1e-5, help="central-difference step")
    p.add_argument("--inject-sign-flip", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("roundtrip", parents=[shared], help="synthetic scenes -> boxes -> P/R/F")
    _scene_flags(p, 800, 800)
    p.add_argument("--num-scenes", type=int, default=100)
    p.add_argument("--min-regions", type=int, default=3)
    p.add_argument("--max-regions", type=int, default=8)
    p.add_argument("--f-threshold", type=float, default=1.0, help="exit 1 when F is below this")

    p = sub.add_parser("eval", parents=[shared], help="evaluate a detections dir against a ground-truth dir")
    p.add_argument("dets_dir")
    p.add_argument("gts_dir")
    p.add_argument("--verbose", action="store_true", help="also print the key-value report block")

    p = sub.add_parser("synth", parents=[shared], help="write one synthetic scene (annotations + FMAP)")
    _scene_flags(p)
    p.add_argument("--num-regions", type=int, default=5)
    p.add_argument("--png", action="store_true")

    p = sub.add_parser("export-png", parents=[shared], help="FMAP -> 8-bit grayscale PNG")
    p.add_argument("fmap")

    p = sub.add_parser("loss", parents=[shared], help="total training loss of predicted maps against labels")
    p.add_argument("--prob", required=True, help="predicted probability FMAP")
    p.add_argument("--thresh", required=True, help="predicted threshold FMAP")
    p.add_argument("--binary", help="approximate binary FMAP (default: computed from --prob/--thresh with --k)")
    p.add_argument("--labels", required=True, help="directory written by gen-labels")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=10.0)
    p.add_argument("--neg-ratio", type=float, default=3.0)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config file must hold a JSON object")
        unknown = sorted(set(cfg) - set(vars(args)) | ({"command", "config"} & set(cfg)))
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        sub.choices[args.command].set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _echo_config(args) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items())}
    print(f"# config {json.dumps(cfg, sort_keys=True)}", file=sys.stderr)


def _boxform_params(args) -> BoxformParams:
    return BoxformParams(
        const_thresh=args.binarize_thresh,
        r_prime=args.unclip_ratio,
        score_thresh=args.score_thresh,
        min_side=args.min_side,
        approx_eps_ratio=args.approx_eps_ratio,
        output_mode=args.output_mode,
    )


def _write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_labels(labels: LabelSet, out: Path, png: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name in LABEL_FILES:
        m = getattr(labels, name)
        fm = m.to_float() if isinstance(m, BinaryMap) else m
        fmap_write(fm, out / f"{name}.fmap")
        if png:
            png_export(fm, out / f"{name}.png")


def cmd_gen_labels(args) -> int:
    annots = read_annotations(args.annotations)
    labels = generate_labels(annots, args.height, args.width, args.shrink_ratio, args.t_min, args.t_max)
    out = Path(args.out or ".")
    _write_labels(labels, out, args.png)
    print(f"wrote {len(LABEL_FILES)} label maps ({args.height}x{args.width}) to {out}")
    return EXIT_OK


def cmd_boxform(args) -> int:
    dets = form_boxes(fmap_read(args.prob_map), _boxform_params(args))
    body = "".join(format_detection(d) + "\n" for d in dets)
    if args.out:
        _write_text(args.out, body)
    else:
        sys.stdout.write(body)
    return EXIT_OK


def _flipped_grads(x, k):
    dl_pos, dl_neg = db_loss_grads(x, k)
    return -dl_pos, dl_neg


def cmd_gradcheck(args) -> int:
    ks = [float(v) for v in args.k_values.split(",") if v.strip()]
    n = int(round((args.x_max - args.x_min) / args.x_step)) + 1
    xs = np.linspace(args.x_min, args.x_max, n)
    grad_fn = _flipped_grads if args.inject_sign_flip else db_loss_grads
    ok = True
    for k in ks:
        err = finite_diff_check(k, xs, args.h, grad_fn=grad_fn)
        passed = err < GRADCHECK_TOL
        ok &= passed
        print(f"k={k:g} max_rel_error={err:.3e} {'PASS' if passed else 'FAIL'}")
    print("gradcheck PASS" if ok else "gradcheck FAIL")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_roundtrip(args) -> int:
    specs = suite_specs(
        args.seed,
        args.num_scenes,
        (args.min_regions, args.max_regions),
        height=args.height,
        width=args.width,
        shape_kind=args.shape_kind,
        side_range=(args.side_min, args.side_max),
        min_gap=args.min_gap,
        noise_sigma=args.noise_sigma,
    )
    params = _boxform_params(args)
    dets, gts = [], []
    for spec in specs:
        scene = gen_scene(spec, args.shrink_ratio, args.t_min, args.t_max)
        dets.append(form_boxes(scene.ideal_p, params))
        gts.append(scene.annotations)
    report = evaluate(dets, gts, args.iou_thresh)
    print(report.line())
    print(report.block())
    return EXIT_OK if report.fmeasure >= args.f_threshold else EXIT_FAIL


def _read_detections(path: Path):
    with open(path, encoding="utf-8") as fh:
        return [parse_detection_line(line, i) for i, line in enumerate(fh, 1) if line.strip()]


def cmd_eval(args) -> int:
    dets_dir, gts_dir = Path(args.dets_dir), Path(args.gts_dir)
    gt_names = sorted(p.name for p in gts_dir.iterdir() if p.is_file())
    det_names = sorted(p.name for p in dets_dir.iterdir() if p.is_file())
    for name in gt_names:
        if name not in det_names:
            raise InputError(f"no detection file for ground truth {gts_dir / name}")
    for name in det_names:
        if name not in gt_names:
            raise InputError(f"no ground-truth file for detections {dets_dir / name}")
    dets, gts = {}, {}
    for name in gt_names:
        try:
            dets[name] = _read_detections(dets_dir / name)
            gts[name] = read_annotations(gts_dir / name)
        except FormatError as exc:
            raise FormatError(f"{name}: {exc}") from None
    report = evaluate(dets, gts, args.iou_thresh)
    print(report.line())
    if args.verbose:
        print(report.block())
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SceneSpec(
        seed=args.seed,
        height=args.height,
        width=args.width,
        num_regions=args.num_regions,
        shape_kind=args.shape_kind,
        side_range=(args.side_min, args.side_max),
        min_gap=args.min_gap,
        noise_sigma=args.noise_sigma,
    )
    scene = gen_scene(spec, args.shrink_ratio, args.t_min, args.t_max)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "annotations.txt", "".join(format_annotation(a) + "\n" for a in scene.annotations))
    fmap_write(scene.ideal_p, out / "prob.fmap")
    if args.png:
        png_export(scene.ideal_p, out / "prob.png")
    print(f"wrote {len(scene.annotations)} regions to {out}")
    return EXIT_OK


def cmd_export_png(args) -> int:
    fmap = fmap_read(args.fmap, role=DISTANCE)
    out = args.out or str(Path(args.fmap).with_suffix(".png"))
    png_export(fmap, out)
    return EXIT_OK


def cmd_loss(args) -> int:
    P = fmap_read(args.prob)
    T = fmap_read(args.thresh)
    B_hat = fmap_read(args.binary) if args.binary else db_map(P, T, args.k)
    d = Path(args.labels)
    maps = {name: fmap_read(d / f"{name}.fmap") for name in LABEL_FILES}
    labels = LabelSet(
        prob_label=BinaryMap(maps["prob_label"].data > 0.5),
        thresh_label=maps["thresh_label"],
        band_mask=BinaryMap(maps["band_mask"].data > 0.5),
        train_mask=BinaryMap(maps["train_mask"].data > 0.5),
    )
    params = DbParams(k=args.k, alpha=args.alpha, beta=args.beta, neg_ratio=args.neg_ratio)
    rep = total_loss(P, B_hat, T, labels, params)
    print(
        f"L_s={rep.l_s:.6f} L_b={rep.l_b:.6f} L_t={rep.l_t:.6f} total={rep.total:.6f} "
        f"positives={rep.positives} sampled_negatives={rep.sampled_negatives}"
    )
    return EXIT_OK


COMMANDS = {
    "gen-labels": cmd_gen_labels,
    "boxform": cmd_boxform,
    "gradcheck": cmd_gradcheck,
    "roundtrip": cmd_roundtrip,
    "eval": cmd_eval,
    "synth": cmd_synth,
    "export-png": cmd_export_png,
    "loss": cmd_loss,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    _echo_config(args)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        warnings.showwarning = lambda msg, *a, **kw: print(f"warning: {msg}", file=sys.stderr)
        try:
            return COMMANDS[args.command](args)
        except (DiffBinError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
