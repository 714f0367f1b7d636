"""Line-delimited record formats (.scenes, .prims, .dets), the metrics report,
and the training log. One JSON record per line, keys sorted, floats in their
shortest round-trip form, so identical inputs serialize byte-identically."""

from __future__ import annotations

import json
from typing import Sequence

from .geom import Point, Polygon, Quad
from .graph import Primitive
from .levels import LEVEL_BY_NAME
from .pipeline import DetectionResult, EvalReport, TrainLogRow
from .synth import Scene, TextInstance


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _points(pts) -> list[list[float]]:
    return [[float(p[0]), float(p[1])] for p in pts]


# ---------------------------------------------------------------------------
# scenes


def scene_record(scene: Scene, scene_id: int) -> str:
    return _dumps(
        {
            "scene_id": scene_id,
            "width": scene.width,
            "height": scene.height,
            "seed": scene.seed,
            "instances": [
                {
                    "instance_id": inst.instance_id,
                    "upper": _points(inst.upper_anchors),
                    "lower": _points(inst.lower_anchors),
                    "char_spans": [[float(a), float(b)] for a, b in inst.char_spans],
                }
                for inst in scene.instances
            ],
        }
    )


def parse_scene(line: str) -> Scene:
    rec = json.loads(line)
    instances = [
        TextInstance(
            upper_anchors=tuple(Point(x, y) for x, y in inst["upper"]),
            lower_anchors=tuple(Point(x, y) for x, y in inst["lower"]),
            instance_id=int(inst["instance_id"]),
            char_spans=tuple((a, b) for a, b in inst["char_spans"]),
        )
        for inst in rec["instances"]
    ]
    return Scene(
        width=int(rec["width"]),
        height=int(rec["height"]),
        instances=instances,
        seed=int(rec["seed"]),
    )


def write_scenes(path: str, scenes: Sequence[Scene]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, scene in enumerate(scenes):
            fh.write(scene_record(scene, i) + "\n")


def read_scenes(path: str) -> list[Scene]:
    with open(path, "r", encoding="utf-8") as fh:
        return [parse_scene(line) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# primitives


def primitives_record(prims: Sequence[Primitive], scene_id: int) -> str:
    return _dumps(
        {
            "scene_id": scene_id,
            "primitives": [
                {
                    "id": p.id,
                    "level": p.level.name,
                    "quad": _points(p.quad.vertices),
                    "score": float(p.score),
                    "truth": p.truth,
                }
                for p in prims
            ],
        }
    )


def parse_primitives(line: str) -> list[Primitive]:
    rec = json.loads(line)
    out = []
    for p in rec["primitives"]:
        quad = Quad.from_points(p["quad"])
        out.append(
            Primitive.create(
                id=int(p["id"]),
                quad=quad,
                level=LEVEL_BY_NAME[p["level"]],
                score=float(p["score"]),
                truth=None if p["truth"] is None else int(p["truth"]),
            )
        )
    return out


def write_primitives(path: str, prims_per_scene: Sequence[Sequence[Primitive]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, prims in enumerate(prims_per_scene):
            fh.write(primitives_record(prims, i) + "\n")


def read_primitives(path: str) -> list[list[Primitive]]:
    with open(path, "r", encoding="utf-8") as fh:
        return [parse_primitives(line) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# detections


def detections_record(dets: Sequence[DetectionResult], scene_id: int) -> str:
    return _dumps(
        {
            "scene_id": scene_id,
            "detections": [
                {
                    "polygon": _points(d.polygon.vertices),
                    "score": float(d.score),
                    "member_ids": list(d.member_ids),
                    "level": d.level.name,
                }
                for d in dets
            ],
        }
    )


def parse_detections(line: str) -> list[DetectionResult]:
    rec = json.loads(line)
    return [
        DetectionResult(
            polygon=Polygon(tuple(Point(x, y) for x, y in d["polygon"])),
            score=float(d["score"]),
            member_ids=[int(i) for i in d["member_ids"]],
            level=LEVEL_BY_NAME[d["level"]],
        )
        for d in rec["detections"]
    ]


def write_detections(path: str, dets_per_scene: Sequence[Sequence[DetectionResult]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, dets in enumerate(dets_per_scene):
            fh.write(detections_record(dets, i) + "\n")


def read_detections(path: str) -> list[list[DetectionResult]]:
    with open(path, "r", encoding="utf-8") as fh:
        return [parse_detections(line) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# reports and logs


def write_report(path: str, report: EvalReport) -> None:
    payload = {
        "precision": report.precision,
        "recall": report.recall,
        "f_score": report.f_score,
        "iou_threshold": report.iou_threshold,
        "per_image": [
            {
                "scene_index": pi.scene_index,
                "tp": pi.tp,
                "fp": pi.fp,
                "fn": pi.fn,
                "matches": [[d, g, iou] for d, g, iou in pi.matches],
            }
            for pi in report.per_image
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dumps(payload) + "\n")


def write_train_log(path: str, rows: Sequence[TrainLogRow]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration\tloss\tlr\n")
        for r in rows:
            fh.write(f"{r.iteration}\t{r.loss!r}\t{r.learning_rate!r}\n")
