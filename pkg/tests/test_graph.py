import inspect

import numpy as np
import pytest

from textgraph.geom import Point, Quad
from textgraph.graph import (
    DEFAULT_K,
    NONTEXT,
    EdgeLabel,
    Primitive,
    build_graph,
    build_training_graph,
    connected_components,
)
from textgraph.levels import LEVELS, P2, P3
from textgraph.synth import (
    NoiseConfig,
    Scene,
    SceneLabels,
    SynthConfig,
    enumerate_gt_primitives,
    generate_scene,
)

from oracles import bfs_components


def prim_at(i, x, y, level=P2, w=10.0, h=6.0, score=1.0, truth=None):
    quad = Quad.from_points([(x - w / 2, y - h / 2), (x + w / 2, y - h / 2),
                             (x + w / 2, y + h / 2), (x - w / 2, y + h / 2)])
    return Primitive.create(id=i, quad=quad, level=level, score=score, truth=truth)


def test_default_k_is_ten():
    assert DEFAULT_K == 10
    assert inspect.signature(build_graph).parameters["k"].default == 10


def test_three_collinear_nodes_k2_full_edges():
    prims = [prim_at(i, 50.0 * i, 0.0, w=8, h=8) for i in range(3)]
    graph = build_graph(prims, k=2)
    assert len(graph.edges) == 6
    assert {(e.src, e.dst) for e in graph.edges} == {
        (0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)
    }


def test_knn_matches_brute_force_oracle():
    rng = np.random.default_rng(31)
    prims = []
    for i in range(200):
        level = P2 if i % 2 == 0 else P3
        prims.append(prim_at(i, float(rng.uniform(0, 500)), float(rng.uniform(0, 500)), level))
    graph = build_graph(prims, k=10)
    incoming = {}
    for e in graph.edges:
        incoming.setdefault(e.dst, set()).add(e.src)
    for level in (P2, P3):
        ids = [p.id for p in graph.nodes if p.level == level]
        for j in ids:
            cj = graph.nodes[j].center
            others = [i for i in ids if i != j]
            ranked = sorted(
                others,
                key=lambda i: (
                    (graph.nodes[i].center.x - cj.x) ** 2 + (graph.nodes[i].center.y - cj.y) ** 2,
                    i,
                ),
            )
            assert incoming.get(j, set()) == set(ranked[:10])


def test_indegree_invariant():
    rng = np.random.default_rng(8)
    prims = [prim_at(i, float(rng.uniform(0, 300)), float(rng.uniform(0, 300))) for i in range(14)]
    for k in (3, 10, 20):
        graph = build_graph(prims, k)
        indeg = [0] * len(prims)
        for e in graph.edges:
            indeg[e.dst] += 1
        expected = min(k, len(prims) - 1)
        assert all(d == expected for d in indeg)


def test_no_cross_level_edges_and_singleton_level():
    prims = [prim_at(0, 0, 0, P2), prim_at(1, 5, 0, P2), prim_at(2, 100, 100, P3)]
    graph = build_graph(prims, k=4)
    for e in graph.edges:
        assert graph.nodes[e.src].level == graph.nodes[e.dst].level
    assert all(2 not in (e.src, e.dst) for e in graph.edges)


def _training_graph(scene, seed=0, ratio=0.5, k=10):
    labels = SceneLabels(scene)
    gt = [g for lvl in LEVELS for g in enumerate_gt_primitives(scene, lvl, labels)]
    return build_training_graph(gt, labels, k=k, seed=seed, nontext_ratio=ratio)


def _rect_scene(n_lines=1, y_step=60.0, h=30.0):
    from test_synth import rect_instance

    instances = [
        rect_instance(x0=80, y0=120 + i * y_step, length=360, h=h, instance_id=i)
        for i in range(n_lines)
    ]
    return Scene(width=640, height=640, instances=instances, seed=0)


def test_training_graph_gt_only_chain_positive():
    scene = _rect_scene(1)
    graph = _training_graph(scene, ratio=0.0)
    assert graph.nodes
    assert all(p.truth == 0 for p in graph.nodes)
    assert all(p.score == 1.0 for p in graph.nodes)
    assert graph.edges
    assert all(e.label == EdgeLabel.POSITIVE for e in graph.edges)


def test_training_graph_parallel_instances_negative():
    scene = _rect_scene(2, y_step=80.0)
    graph = _training_graph(scene, ratio=0.0)
    cross = [
        e
        for e in graph.edges
        if graph.nodes[e.src].truth != graph.nodes[e.dst].truth
    ]
    assert cross
    assert all(e.label == EdgeLabel.NEGATIVE for e in cross)


def test_training_graph_nontext_edges_ignored():
    scene = _rect_scene(1)
    graph = _training_graph(scene, seed=3, ratio=3.0)
    saw_ignored = saw_negative = False
    for e in graph.edges:
        a, b = graph.nodes[e.src].truth, graph.nodes[e.dst].truth
        if a == NONTEXT and b == NONTEXT:
            assert e.label == EdgeLabel.IGNORED_NEGATIVE
            saw_ignored = True
        elif NONTEXT in (a, b):
            assert e.label == EdgeLabel.NEGATIVE
            saw_negative = True
    assert saw_ignored and saw_negative


def test_training_graph_nms_postcondition():
    scene = _rect_scene(2)
    graph = _training_graph(scene, seed=1, ratio=1.0)
    for level in LEVELS:
        nodes = [p for p in graph.nodes if p.level == level]
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                assert nodes[i].aabb.iou(nodes[j].aabb) <= 0.3


def test_training_graph_reproducible():
    cfg = SynthConfig()
    scene = generate_scene(cfg, 9)
    a = _training_graph(scene, seed=5)
    b = _training_graph(scene, seed=5)
    assert len(a.nodes) == len(b.nodes)
    for pa, pb in zip(a.nodes, b.nodes):
        assert np.array_equal(pa.quad.as_array(), pb.quad.as_array())
        assert pa.truth == pb.truth
    assert [(e.src, e.dst, e.label) for e in a.edges] == [
        (e.src, e.dst, e.label) for e in b.edges
    ]


def test_training_graph_label_symmetry():
    scene = _rect_scene(2)
    graph = _training_graph(scene, seed=2, ratio=1.0)
    labels = {(e.src, e.dst): e.label for e in graph.edges}
    for (s, d), lab in labels.items():
        if (d, s) in labels:
            assert labels[(d, s)] == lab


def test_connected_components_transitive():
    assert connected_components([1, 2, 3], [(1, 2), (2, 3)]) == [[1, 2, 3]]


def test_connected_components_singletons():
    assert connected_components([1, 2, 3], []) == [[1], [2], [3]]


def test_connected_components_matches_bfs():
    rng = np.random.default_rng(17)
    nodes = list(range(120))
    links = [
        (int(rng.integers(0, 120)), int(rng.integers(0, 120)))
        for _ in range(500)
    ]
    links = [(a, b) for a, b in links if a != b]
    assert connected_components(nodes, links) == bfs_components(nodes, links)
