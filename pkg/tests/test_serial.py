import numpy as np

from textgraph.levels import P3
from textgraph.pipeline import DetectionResult
from textgraph.geom import Point, Polygon
from textgraph.serial import (
    detections_record,
    parse_detections,
    parse_primitives,
    parse_scene,
    primitives_record,
    scene_record,
)
from textgraph.synth import NoiseConfig, SynthConfig, generate_scene, simulate_detector


def test_scene_roundtrip_exact():
    scene = generate_scene(SynthConfig(), 19)
    rec = scene_record(scene, 0)
    back = parse_scene(rec)
    assert back.width == scene.width and back.seed == scene.seed
    assert len(back.instances) == len(scene.instances)
    for a, b in zip(scene.instances, back.instances):
        assert a.upper_anchors == b.upper_anchors
        assert a.lower_anchors == b.lower_anchors
        assert a.char_spans == b.char_spans
        assert a.instance_id == b.instance_id
    assert scene_record(back, 0) == rec


def test_primitives_roundtrip_exact():
    scene = generate_scene(SynthConfig(), 23)
    prims = simulate_detector(scene, NoiseConfig(), 5)
    rec = primitives_record(prims, 3)
    back = parse_primitives(rec)
    assert len(back) == len(prims)
    for a, b in zip(prims, back):
        assert np.array_equal(a.quad.as_array(), b.quad.as_array())
        assert a.level == b.level and a.score == b.score and a.truth == b.truth
        # derived fields recomputed identically
        assert a.center == b.center
        assert (a.aabb.x, a.aabb.w) == (b.aabb.x, b.aabb.w)
    assert primitives_record(back, 3) == rec


def test_detections_roundtrip_exact():
    ring = [(0.0, 0.0), (10.5, 0.25), (10.0, 8.0), (-0.5, 7.75)]
    det = DetectionResult(
        polygon=Polygon(tuple(Point(*p) for p in ring)),
        score=0.875,
        member_ids=[3, 1, 4],
        level=P3,
    )
    rec = detections_record([det], 0)
    back = parse_detections(rec)
    assert len(back) == 1
    assert back[0].member_ids == [3, 1, 4]
    assert back[0].level == P3
    assert detections_record(back, 0) == rec
