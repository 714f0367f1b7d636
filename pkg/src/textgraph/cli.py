"""Command-line entry point: corpus generation, training, inference,
evaluation, ablation, and SVG visualization.

Every command is a pure function of (config file, flags, seed, input files);
reruns reproduce outputs byte-identically.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import config as config_mod
from . import pipeline, serial, viz
from .errors import InputMismatch, TextGraphError
from .gcn import load_link_model, save_link_model
from .seeding import derive_seed
from .synth import generate_scene, simulate_detector


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="textgraph")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override a config value (repeatable)",
        )

    p = sub.add_parser("synth", help="generate a scene corpus (and optional detections)")
    common(p)
    p.add_argument("--count", type=int, default=20, help="number of scenes")
    p.add_argument("--out", required=True, help="output .scenes file")
    p.add_argument("--prims-out", default=None, help="also simulate the detector into .prims")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("train", help="train the link model on a scene corpus")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", default=None, help="training log (TSV)")

    p = sub.add_parser("infer", help="group detected primitives into text instances")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--scenes", default=None, help="simulate the detector on these scenes")
    p.add_argument("--prims", default=None, help="or use precomputed detections")
    p.add_argument("--out", required=True, help="output .dets file")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("eval", help="score detections against ground truth")
    common(p)
    p.add_argument("--dets", required=True)
    p.add_argument("--gt", required=True, help="ground-truth .scenes file")
    p.add_argument("--iou", type=float, default=None)
    p.add_argument("--out", default=None, help="write the full report as JSON")

    p = sub.add_parser("ablate", help="grid runs over model depth or grouping strategy")
    common(p)
    p.add_argument("--grid", required=True, help="axis=v1,v2,... (depth, mlp_depth, grouping)")
    p.add_argument("--train-scenes", required=True)
    p.add_argument("--eval-scenes", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("viz", help="render one scene (plus detections) to SVG")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--scene-id", type=int, default=0)
    p.add_argument("--dets", default=None)
    p.add_argument("--prims", default=None)
    p.add_argument("--out", required=True)
    return ap


def _load_cfg(args) -> config_mod.Config:
    cfg = config_mod.load_config(args.config)
    return config_mod.apply_overrides(cfg, args.overrides)


def _gen_one(payload):
    synth_cfg, seed = payload
    return generate_scene(synth_cfg, seed)


def _cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    seeds = [derive_seed(args.seed, "scene", i) for i in range(args.count)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            scenes = list(pool.map(_gen_one, [(cfg.synth, s) for s in seeds]))
    else:
        scenes = [generate_scene(cfg.synth, s) for s in seeds]
    serial.write_scenes(args.out, scenes)
    if args.prims_out:
        prims = [
            simulate_detector(scene, cfg.detector, derive_seed(args.seed, "detect", i))
            for i, scene in enumerate(scenes)
        ]
        serial.write_primitives(args.prims_out, prims)
    return 0


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    scenes = serial.read_scenes(args.scenes)
    model, log = pipeline.train(scenes, cfg.model, cfg.train, args.seed)
    thresholds = {
        "link_threshold": repr(cfg.infer.link_threshold),
        "polygon_nms_iou": repr(cfg.infer.polygon_nms_iou),
        "textness_threshold": repr(cfg.detector.textness_threshold),
        "detection_nms_iou": repr(cfg.detector.nms_iou),
        "knn_k": str(cfg.train.knn_k),
    }
    save_link_model(args.out, model, thresholds)
    if args.log:
        serial.write_train_log(args.log, log)
    return 0


def _infer_one(payload):
    model_path, prims_record, infer_cfg = payload
    model, _ = load_link_model(model_path)
    prims = serial.parse_primitives(prims_record)
    return pipeline.detect_and_group(model, prims, infer_cfg)


def _cmd_infer(args) -> int:
    cfg = _load_cfg(args)
    if (args.scenes is None) == (args.prims is None):
        raise InputMismatch("provide exactly one of --scenes or --prims")
    model, _ = load_link_model(args.model)
    start = time.perf_counter()
    if args.prims:
        prims_per_scene = serial.read_primitives(args.prims)
    else:
        scenes = serial.read_scenes(args.scenes)
        prims_per_scene = [
            simulate_detector(scene, cfg.detector, derive_seed(args.seed, "detect", i))
            for i, scene in enumerate(scenes)
        ]
    if args.jobs > 1:
        payloads = [
            (args.model, serial.primitives_record(prims, i), cfg.infer)
            for i, prims in enumerate(prims_per_scene)
        ]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            dets = list(pool.map(_infer_one, payloads))
    else:
        dets = [pipeline.detect_and_group(model, prims, cfg.infer) for prims in prims_per_scene]
    serial.write_detections(args.out, dets)
    elapsed = time.perf_counter() - start
    n_dets = sum(len(d) for d in dets)
    print(f"scenes={len(prims_per_scene)} detections={n_dets} seconds={elapsed:.3f}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    dets = serial.read_detections(args.dets)
    scenes = serial.read_scenes(args.gt)
    if len(dets) != len(scenes):
        raise InputMismatch(
            f"{len(dets)} detection records vs {len(scenes)} ground-truth scenes"
        )
    gts = [[inst.polygon() for inst in s.instances] for s in scenes]
    iou = args.iou if args.iou is not None else cfg.eval.iou_threshold
    report = pipeline.evaluate(dets, gts, iou)
    print(f"P={report.precision:.4f} R={report.recall:.4f} F={report.f_score:.4f}")
    if args.out:
        serial.write_report(args.out, report)
    return 0


def _cmd_ablate(args) -> int:
    cfg = _load_cfg(args)
    axis, _, raw = args.grid.partition("=")
    if not raw:
        raise ValueError(f"grid must look like axis=v1,v2,... got {args.grid!r}")
    values: list = [v for v in raw.split(",") if v]
    if axis in ("depth", "mlp_depth"):
        values = [int(v) for v in values]
    rows = pipeline.ablate(
        serial.read_scenes(args.train_scenes),
        serial.read_scenes(args.eval_scenes),
        {axis: values},
        cfg.model,
        cfg.train,
        cfg.detector,
        cfg.infer,
        cfg.eval,
        args.seed,
    )
    print(f"{axis}\tP\tR\tF")
    for row in rows:
        print(
            f"{row[axis]}\t{row['precision']:.4f}\t{row['recall']:.4f}\t{row['f_score']:.4f}"
        )
    if args.out:
        import json

        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(rows, sort_keys=True, separators=(",", ":")) + "\n")
    return 0


def _cmd_viz(args) -> int:
    scenes = serial.read_scenes(args.scenes)
    if not (0 <= args.scene_id < len(scenes)):
        raise InputMismatch(f"scene id {args.scene_id} not in corpus of {len(scenes)}")
    scene = scenes[args.scene_id]
    dets = None
    if args.dets:
        all_dets = serial.read_detections(args.dets)
        if args.scene_id >= len(all_dets):
            raise InputMismatch(f"no detection record for scene {args.scene_id}")
        dets = all_dets[args.scene_id]
    prims = None
    if args.prims:
        all_prims = serial.read_primitives(args.prims)
        if args.scene_id >= len(all_prims):
            raise InputMismatch(f"no primitive record for scene {args.scene_id}")
        prims = all_prims[args.scene_id]
    viz.write_svg(args.out, viz.render_svg(scene, detections=dets, primitives=prims))
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "infer": _cmd_infer,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "viz": _cmd_viz,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (TextGraphError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
