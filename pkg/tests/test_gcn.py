import math

import numpy as np
import pytest

from textgraph.errors import DegenerateGeometry, EmptyBatch
from textgraph.gcn import (
    DESCRIPTOR_DIM,
    GcnLayer,
    ModelConfig,
    box_delta,
    classify_edges,
    compute_descriptors,
    edge_targets,
    encode_nodes,
    gcn_forward,
    gcn_layer,
    graph_tensors,
    init_link_model,
    link_forward,
    link_loss,
    link_loss_taped,
    link_probabilities,
    normalized_adjacency,
    ohem_select,
    spatial_feature,
)
from textgraph.geom import Aabb
from textgraph.graph import DirectedEdge, EdgeLabel, PrimitiveGraph, build_graph
from textgraph.levels import P2, P3
from textgraph.nn import Tape, gradcheck, mlp_init
from textgraph.seeding import derive_seed

from test_graph import prim_at


def small_graph(n=12, seed=3, k=4):
    rng = np.random.default_rng(seed)
    prims = [
        prim_at(i, float(rng.uniform(0, 200)), float(rng.uniform(0, 200)))
        for i in range(n)
    ]
    return build_graph(prims, k)


def test_descriptor_shape_and_padding():
    graph = small_graph()
    x = compute_descriptors(graph.nodes)
    assert x.shape == (12, DESCRIPTOR_DIM)
    assert np.all(np.isfinite(x))
    assert np.all(x[:, 15:] == 0.0)


def test_descriptor_deterministic_and_identical_prims():
    a = prim_at(0, 50, 50)
    b = prim_at(1, 50, 50)
    x = compute_descriptors([a, b])
    assert np.array_equal(x[0], x[1])
    y = compute_descriptors([prim_at(0, 50, 50), prim_at(1, 50, 50)])
    assert np.array_equal(x, y)


def test_descriptor_density_counts_neighbours():
    # P2 stride 4: radius 12; two prims 10 apart count each other, third is far
    prims = [prim_at(0, 0, 0), prim_at(1, 10, 0), prim_at(2, 100, 0)]
    x = compute_descriptors(prims)
    assert x[0, 14] == 1.0 and x[1, 14] == 1.0 and x[2, 14] == 0.0


def test_encode_nodes_zero_weights():
    graph = small_graph()
    enc = mlp_init([DESCRIPTOR_DIM, 8, 8], "relu", 0)
    for w in enc.weights:
        w[...] = 0.0
    out = encode_nodes(graph, enc)
    assert np.array_equal(out, np.zeros((12, 8)))


def test_encode_nodes_batch_equals_loop():
    graph = small_graph()
    enc = mlp_init([DESCRIPTOR_DIM, 16, 16], "relu", 5, init_std=0.3)
    batch = encode_nodes(graph, enc)
    for k, p in enumerate(graph.nodes):
        row = enc.apply(p.descriptor[None, :])
        assert np.allclose(batch[k], row[0], atol=1e-12)


def test_alpha_weights_inverse_indegree():
    prims = [prim_at(i, 10.0 * i, 0.0) for i in range(5)]
    edges = [DirectedEdge(src=j, dst=0) for j in range(1, 5)]
    graph = PrimitiveGraph(nodes=prims, edges=edges)
    adj = normalized_adjacency(graph)
    assert np.allclose(adj[0, 1:], 0.25)
    assert np.all(adj[1:] == 0.0)


def test_gcn_layer_zero_parameters():
    graph = small_graph()
    g0 = np.abs(np.random.default_rng(0).normal(size=(12, 8)))
    layer = GcnLayer(mlp_init([8, 8, 8], "linear", 0), mlp_init([8, 8, 8], "linear", 1))
    for w in layer.f_v.weights + layer.f_e.weights:
        w[...] = 0.0
    assert np.array_equal(gcn_layer(g0, layer, graph), np.zeros((12, 8)))


def _naive_gcn_layer(g, layer, graph):
    out = np.zeros((len(graph.nodes), layer.f_v.dims[-1]))
    nbrs = graph.in_neighbors()
    for i in range(len(graph.nodes)):
        h = layer.f_v.apply(g[i : i + 1])[0]
        if nbrs[i]:
            msg = np.zeros_like(h)
            for j in nbrs[i]:
                msg += layer.f_e.apply(g[j : j + 1])[0]
            h = h + msg / len(nbrs[i])
        out[i] = np.maximum(h, 0.0)
    return out


def test_gcn_layer_matches_naive_loop():
    rng = np.random.default_rng(41)
    graph = small_graph(n=30, seed=4, k=6)
    g0 = rng.normal(size=(30, 10))
    layer = GcnLayer(
        mlp_init([10, 10, 10], "linear", rng, init_std=0.5),
        mlp_init([10, 10, 10], "linear", rng, init_std=0.5),
    )
    assert np.allclose(gcn_layer(g0, layer, graph), _naive_gcn_layer(g0, layer, graph), atol=1e-9)


def test_gcn_forward_single_layer_equivalence():
    rng = np.random.default_rng(6)
    graph = small_graph()
    g0 = rng.normal(size=(12, 8))
    layer = GcnLayer(
        mlp_init([8, 8], "linear", rng, init_std=0.4),
        mlp_init([8, 8], "linear", rng, init_std=0.4),
    )
    assert np.array_equal(gcn_forward(g0, [layer], graph), gcn_layer(g0, layer, graph))


def test_receptive_field_limited_to_depth():
    # directed path 0 -> 1 -> ... -> 7; positive weights keep signals alive
    n, dim, depth = 8, 4, 3
    prims = [prim_at(i, 30.0 * i, 0.0) for i in range(n)]
    edges = [DirectedEdge(src=i, dst=i + 1) for i in range(n - 1)]
    graph = PrimitiveGraph(nodes=prims, edges=edges)
    rng = np.random.default_rng(2)
    layers = []
    for _ in range(depth):
        f_v = mlp_init([dim, dim], "linear", rng)
        f_e = mlp_init([dim, dim], "linear", rng)
        for w in f_v.weights + f_e.weights:
            w[...] = np.abs(rng.normal(0.5, 0.2, size=w.shape))
        layers.append(GcnLayer(f_v, f_e))
    g0 = np.abs(rng.normal(1.0, 0.3, size=(n, dim)))
    base = gcn_forward(g0, layers, graph)
    g0_pert = g0.copy()
    g0_pert[0] += 1.0
    pert = gcn_forward(g0_pert, layers, graph)
    changed = np.abs(pert - base).max(axis=1) > 1e-12
    assert changed[0]
    assert all(changed[: depth + 1])  # distance 0..L along the path
    assert not any(changed[depth + 1 :])  # beyond the receptive field


def test_box_delta_identity():
    b = Aabb(10, 20, 4, 2)
    assert np.allclose(box_delta(b, b), np.zeros(6))


def test_box_delta_worked_example():
    b_i = Aabb(10, 20, 4, 2)
    b_j = Aabb(12, 21, 8, 4)
    expected = np.array([-0.5, -0.5, -0.6931, -0.6931, 0.25, 0.25])
    assert np.allclose(box_delta(b_i, b_j), expected, atol=1e-4)


def test_box_delta_translation_invariance():
    rng = np.random.default_rng(9)
    for _ in range(50):
        bi = Aabb(*rng.uniform(5, 50, 2), *rng.uniform(1, 20, 2))
        bj = Aabb(*rng.uniform(5, 50, 2), *rng.uniform(1, 20, 2))
        tx, ty = rng.uniform(-100, 100, 2)
        bi_t = Aabb(bi.x + tx, bi.y + ty, bi.w, bi.h)
        bj_t = Aabb(bj.x + tx, bj.y + ty, bj.w, bj.h)
        assert np.allclose(box_delta(bi, bj), box_delta(bi_t, bj_t), atol=1e-9)


def test_box_delta_rejects_bad_dims():
    with pytest.raises(DegenerateGeometry):
        Aabb(0, 0, -1.0, 2.0)


def test_spatial_feature_equal_boxes_zero():
    b = Aabb(5, 5, 3, 2)
    assert np.allclose(spatial_feature(b, b), np.zeros(18))


def test_spatial_feature_union_components_hand_computed():
    b_i = Aabb(10, 20, 4, 2)
    b_j = Aabb(12, 21, 8, 4)
    feat = spatial_feature(b_i, b_j)
    # union box equals b_j here, so the middle block repeats delta(b_i, b_j)
    # and the last block is all zeros
    assert np.allclose(feat[0:6], feat[6:12], atol=1e-12)
    assert np.allclose(feat[12:18], np.zeros(6), atol=1e-12)
    expected_mid = np.array([-0.5, -0.5, math.log(0.5), math.log(0.5), 0.25, 0.25])
    assert np.allclose(feat[6:12], expected_mid, atol=1e-9)


def test_spatial_feature_scale_invariance():
    rng = np.random.default_rng(13)
    for _ in range(50):
        bi = Aabb(*rng.uniform(5, 50, 2), *rng.uniform(1, 20, 2))
        bj = Aabb(*rng.uniform(5, 50, 2), *rng.uniform(1, 20, 2))
        s = float(rng.uniform(0.2, 5.0))
        bi_s = Aabb(bi.x * s, bi.y * s, bi.w * s, bi.h * s)
        bj_s = Aabb(bj.x * s, bj.y * s, bj.w * s, bj.h * s)
        assert np.allclose(spatial_feature(bi, bj), spatial_feature(bi_s, bj_s), atol=1e-9)


def test_classify_edges_zero_parameters_gives_half():
    graph = small_graph()
    model = init_link_model(ModelConfig(hidden_dim=8), seed=0)
    for _, arr, _ in model.classifier.named_params("clf"):
        arr[...] = 0.0
    g_final = np.zeros((len(graph.nodes), 8))
    probs = classify_edges(graph, g_final, model.classifier)
    assert np.allclose(probs, 0.5)


def test_classify_edges_batch_equals_loop():
    graph = small_graph()
    model = init_link_model(ModelConfig(hidden_dim=8), seed=1)
    rng = np.random.default_rng(3)
    g_final = rng.normal(size=(len(graph.nodes), 8))
    probs = classify_edges(graph, g_final, model.classifier)
    tensors = graph_tensors(graph)
    for k in range(len(graph.edges)):
        xe = np.concatenate(
            [g_final[tensors.src[k]], tensors.efeat[k], g_final[tensors.dst[k]]]
        )[None, :]
        assert np.allclose(probs[k], model.classifier.apply(xe)[0, 0], atol=1e-12)


def test_directional_probabilities_differ():
    graph = small_graph(seed=9)
    model = init_link_model(ModelConfig(hidden_dim=8, init_std=0.3), seed=7)
    probs = link_probabilities(model, graph)
    pair = {}
    asym = 0
    for k, e in enumerate(graph.edges):
        if (e.dst, e.src) in pair:
            if abs(probs[k] - pair[(e.dst, e.src)]) > 1e-9:
                asym += 1
        pair[(e.src, e.dst)] = probs[k]
    assert asym > 0


def test_spec_op_composition_matches_link_probabilities():
    graph = small_graph(seed=12)
    model = init_link_model(ModelConfig(hidden_dim=8, init_std=0.2), seed=4)
    g0 = encode_nodes(graph, model.encoder)
    g_final = gcn_forward(g0, model.layers, graph)
    probs_ops = classify_edges(graph, g_final, model.classifier)
    assert np.allclose(probs_ops, link_probabilities(model, graph), atol=1e-12)


def _labeled_graph(pos_probs, neg_probs):
    n = len(pos_probs) + len(neg_probs) + 1
    prims = [prim_at(i, 12.0 * i, 0.0) for i in range(n)]
    edges = []
    for k in range(len(pos_probs)):
        edges.append(DirectedEdge(src=k, dst=k + 1, label=EdgeLabel.POSITIVE))
    for k in range(len(neg_probs)):
        edges.append(DirectedEdge(src=k, dst=k + 1, label=EdgeLabel.NEGATIVE))
    graph = PrimitiveGraph(nodes=prims, edges=edges)
    return graph, np.asarray(list(pos_probs) + list(neg_probs))


def test_ohem_selects_lowest_64_positives():
    pos = [k / 100.0 for k in range(100)]
    graph, probs = _labeled_graph(pos, [])
    sel = ohem_select(graph, probs, n_pos=64, n_neg=64)
    chosen = probs[sel]
    assert len(sel) == 64
    assert chosen.max() == pytest.approx(0.63)


def test_ohem_clamps_short_classes():
    graph, probs = _labeled_graph([0.2] * 5, [0.8] * 10)
    sel = ohem_select(graph, probs, n_pos=64, n_neg=64)
    assert len(sel) == 15


def test_ohem_matches_full_sort_oracle():
    rng = np.random.default_rng(77)
    pos = list(rng.uniform(0, 1, size=90))
    neg = list(rng.uniform(0, 1, size=200))
    graph, probs = _labeled_graph(pos, neg)
    sel = set(ohem_select(graph, probs, 64, 64).tolist())
    pos_idx = list(range(90))
    neg_idx = list(range(90, 290))
    pos_rank = sorted(pos_idx, key=lambda k: (probs[k], k))[:64]
    neg_rank = sorted(neg_idx, key=lambda k: (-probs[k], k))[:64]
    assert sel == set(pos_rank) | set(neg_rank)


def test_ohem_ignores_ignored_negatives_and_raises_empty():
    prims = [prim_at(i, 12.0 * i, 0.0) for i in range(3)]
    edges = [DirectedEdge(0, 1, EdgeLabel.IGNORED_NEGATIVE), DirectedEdge(1, 2, EdgeLabel.NEGATIVE)]
    graph = PrimitiveGraph(nodes=prims, edges=edges)
    with pytest.raises(EmptyBatch):
        ohem_select(graph, np.array([0.5, 0.5]), 64, 64)


def test_link_loss_values():
    assert link_loss(np.full(10, 0.5), np.ones(10)) == pytest.approx(math.log(2.0))
    assert link_loss(np.array([1.0, 0.0]), np.array([1.0, 0.0])) < 1e-6
    rng = np.random.default_rng(3)
    p = rng.uniform(0.05, 0.95, size=33)
    t = rng.integers(0, 2, size=33).astype(float)
    manual = -np.mean(t * np.log(p) + (1 - t) * np.log(1 - p))
    assert link_loss(p, t) == pytest.approx(manual, abs=1e-12)
    with pytest.raises(EmptyBatch):
        link_loss(np.zeros(0), np.zeros(0))


def test_end_to_end_gradcheck_small_model():
    graph = small_graph(n=8, seed=21, k=3)
    model = init_link_model(
        ModelConfig(hidden_dim=6, gcn_layers=3, mlp_depth=2, init_std=0.3), seed=2
    )
    tensors = graph_tensors(graph)
    targets = np.asarray([(k % 2) * 1.0 for k in range(len(graph.edges))])
    sel = np.arange(len(graph.edges), dtype=np.intp)

    tape = Tape()
    probs, pvars = link_forward(model, tensors, tape)
    loss = link_loss_taped(tape, probs, targets, sel)
    tape.backward(loss)
    params = model.param_arrays()
    grads = {
        name: (pvars[name].grad if pvars[name].grad is not None else np.zeros_like(arr))
        for name, arr in params.items()
    }

    def loss_only():
        t2 = Tape(grad_enabled=False)
        p2, _ = link_forward(model, tensors, t2)
        return link_loss(p2.value[sel, 0], targets[sel])

    err = gradcheck(loss_only, params, grads, h=1e-4, max_entries=40,
                    rng=np.random.default_rng(0))
    assert err < 1e-4
