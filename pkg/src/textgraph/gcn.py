"""Link prediction over primitive graphs: geometric node descriptors, a node
encoder, stacked graph-convolution layers, 18-d spatial edge features, the
edge classifier, OHEM edge selection, and the link loss.

Layer-wise propagation for node i with in-neighbours N(i):

    g_i^(l+1) = ReLU( f_v(g_i^(l)) + sum_{j in N(i)} (1/|N(i)|) * f_e(g_j^(l)) )

where f_v and f_e are independent MLPs with ReLU between their layers and a
linear output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateGeometry, EmptyBatch, ShapeError
from .geom import Aabb
from .graph import EdgeLabel, Primitive, PrimitiveGraph
from .levels import LEVELS
from .nn import (
    Mlp,
    Tape,
    Var,
    add,
    bce_loss,
    bce_mean,
    concat_cols,
    gather_rows,
    matmul,
    mlp_init,
    relu,
    save_checkpoint,
    load_checkpoint,
)

DESCRIPTOR_DIM = 32
DESCRIPTOR_VERSION = 1
SPATIAL_FEATURE_DIM = 18
DENSITY_RADIUS_STRIDES = 3.0


def compute_descriptors(prims: Sequence[Primitive]) -> np.ndarray:
    """32-d geometric descriptor per primitive (also stored on the node).

    Stride-normalized quad vertex offsets from the center (8), aabb w/h (2),
    orientation sin/cos (2), textness score (1), log mean extent (1), local
    density = same-level neighbour count within 3 strides (1), zero padding.
    """
    n = len(prims)
    out = np.zeros((n, DESCRIPTOR_DIM), dtype=np.float64)
    density = np.zeros(n)
    for level in LEVELS:
        idx = [k for k, p in enumerate(prims) if p.level == level]
        if not idx:
            continue
        centers = np.asarray([[prims[k].center.x, prims[k].center.y] for k in idx])
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        radius = DENSITY_RADIUS_STRIDES * level.stride
        counts = ((dist <= radius).sum(axis=1) - 1).astype(np.float64)
        for kk, k in enumerate(idx):
            density[k] = counts[kk]
    for k, p in enumerate(prims):
        stride = float(p.level.stride)
        arr = p.quad.as_array()
        c = np.asarray([p.center.x, p.center.y])
        out[k, 0:8] = ((arr - c) / stride).ravel()
        out[k, 8] = p.aabb.w / stride
        out[k, 9] = p.aabb.h / stride
        left = (arr[0] + arr[3]) / 2.0
        right = (arr[1] + arr[2]) / 2.0
        ang = math.atan2(right[1] - left[1], right[0] - left[0])
        out[k, 10] = math.sin(ang)
        out[k, 11] = math.cos(ang)
        out[k, 12] = p.score
        out[k, 13] = math.log((p.aabb.w + p.aabb.h) / 2.0 / stride)
        out[k, 14] = density[k]
        p.descriptor = out[k]
    return out


# ---------------------------------------------------------------------------
# spatial edge features (box deltas)


def _delta_arrays(bi: np.ndarray, bj: np.ndarray) -> np.ndarray:
    """Vectorized 6-d box delta for (n,4) center-format boxes [x, y, w, h]."""
    if np.any(bi[:, 2:] <= 0) or np.any(bj[:, 2:] <= 0):
        raise DegenerateGeometry("box delta needs positive widths and heights")
    tx_ij = (bi[:, 0] - bj[:, 0]) / bi[:, 2]
    ty_ij = (bi[:, 1] - bj[:, 1]) / bi[:, 3]
    tw = np.log(bi[:, 2] / bj[:, 2])
    th = np.log(bi[:, 3] / bj[:, 3])
    tx_ji = (bj[:, 0] - bi[:, 0]) / bj[:, 2]
    ty_ji = (bj[:, 1] - bi[:, 1]) / bj[:, 3]
    return np.stack([tx_ij, ty_ij, tw, th, tx_ji, ty_ji], axis=1)


def _as_box_row(b: Aabb) -> np.ndarray:
    return np.asarray([[b.x, b.y, b.w, b.h]], dtype=np.float64)


def box_delta(b_i: Aabb, b_j: Aabb) -> np.ndarray:
    """(t_x^ij, t_y^ij, t_w^ij, t_h^ij, t_x^ji, t_y^ji); natural log ratios."""
    return _delta_arrays(_as_box_row(b_i), _as_box_row(b_j))[0]


def _union_arrays(bi: np.ndarray, bj: np.ndarray) -> np.ndarray:
    x0 = np.minimum(bi[:, 0] - bi[:, 2] / 2, bj[:, 0] - bj[:, 2] / 2)
    y0 = np.minimum(bi[:, 1] - bi[:, 3] / 2, bj[:, 1] - bj[:, 3] / 2)
    x1 = np.maximum(bi[:, 0] + bi[:, 2] / 2, bj[:, 0] + bj[:, 2] / 2)
    y1 = np.maximum(bi[:, 1] + bi[:, 3] / 2, bj[:, 1] + bj[:, 3] / 2)
    return np.stack([(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0], axis=1)


def _spatial_arrays(bi: np.ndarray, bj: np.ndarray) -> np.ndarray:
    bu = _union_arrays(bi, bj)
    return np.concatenate(
        [_delta_arrays(bi, bj), _delta_arrays(bi, bu), _delta_arrays(bj, bu)], axis=1
    )


def spatial_feature(b_i: Aabb, b_j: Aabb) -> np.ndarray:
    """18-d compatibility vector: deltas of (b_i,b_j), (b_i,b_ij), (b_j,b_ij)
    with b_ij the tightest axis-aligned box containing both."""
    return _spatial_arrays(_as_box_row(b_i), _as_box_row(b_j))[0]


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class ModelConfig:
    descriptor_dim: int = DESCRIPTOR_DIM
    hidden_dim: int = 512
    gcn_layers: int = 3  # L
    mlp_depth: int = 2  # layers inside each f_v / f_e
    init_std: float = 0.01


@dataclass
class GcnLayer:
    f_v: Mlp
    f_e: Mlp


@dataclass
class LinkModel:
    encoder: Mlp
    layers: list[GcnLayer]
    classifier: Mlp
    config: ModelConfig

    def named_params(self) -> list[tuple[str, np.ndarray, bool]]:
        out = list(self.encoder.named_params("encoder"))
        for li, layer in enumerate(self.layers):
            out += layer.f_v.named_params(f"gcn{li}.fv")
            out += layer.f_e.named_params(f"gcn{li}.fe")
        out += self.classifier.named_params("classifier")
        return out

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {name: arr for name, arr, _ in self.named_params()}


def init_link_model(config: ModelConfig, seed: int = 0) -> LinkModel:
    """Gaussian(0, init_std) weights, zero biases, drawn from one seeded rng."""
    rng = np.random.default_rng(seed)
    h = config.hidden_dim
    encoder = mlp_init([config.descriptor_dim, h, h], "relu", rng, config.init_std)
    layers = []
    mlp_dims = [h] * (config.mlp_depth + 1)
    for _ in range(config.gcn_layers):
        f_v = mlp_init(mlp_dims, "linear", rng, config.init_std)
        f_e = mlp_init(mlp_dims, "linear", rng, config.init_std)
        layers.append(GcnLayer(f_v=f_v, f_e=f_e))
    classifier = mlp_init([2 * h + SPATIAL_FEATURE_DIM, h, h, 1], "sigmoid", rng, config.init_std)
    return LinkModel(encoder=encoder, layers=layers, classifier=classifier, config=config)


# ---------------------------------------------------------------------------
# graph tensors and forward passes


@dataclass
class GraphTensors:
    x: np.ndarray  # (n, descriptor_dim)
    adj: np.ndarray  # (n, n); adj[i, j] = 1/|N(i)| for in-neighbour j
    src: np.ndarray  # (E,)
    dst: np.ndarray  # (E,)
    efeat: np.ndarray  # (E, 18)
    labels: np.ndarray  # (E,) EdgeLabel values as objects


def normalized_adjacency(graph: PrimitiveGraph) -> np.ndarray:
    n = len(graph.nodes)
    adj = np.zeros((n, n), dtype=np.float64)
    for i, nbrs in enumerate(graph.in_neighbors()):
        if nbrs:
            adj[i, nbrs] = 1.0 / len(nbrs)
    return adj


def graph_tensors(graph: PrimitiveGraph) -> GraphTensors:
    if any(p.descriptor is None for p in graph.nodes):
        compute_descriptors(graph.nodes)
    x = np.stack([p.descriptor for p in graph.nodes]) if graph.nodes else np.zeros((0, DESCRIPTOR_DIM))
    src = np.asarray([e.src for e in graph.edges], dtype=np.intp)
    dst = np.asarray([e.dst for e in graph.edges], dtype=np.intp)
    boxes = np.asarray(
        [[p.aabb.x, p.aabb.y, p.aabb.w, p.aabb.h] for p in graph.nodes], dtype=np.float64
    )
    if len(src):
        efeat = _spatial_arrays(boxes[src], boxes[dst])
    else:
        efeat = np.zeros((0, SPATIAL_FEATURE_DIM))
    labels = np.asarray([e.label for e in graph.edges], dtype=object)
    return GraphTensors(
        x=x, adj=normalized_adjacency(graph), src=src, dst=dst, efeat=efeat, labels=labels
    )


def make_param_vars(model: LinkModel) -> dict[str, Var]:
    return {name: Var(arr) for name, arr, _ in model.named_params()}


def _mlp_vars(params: dict[str, Var], mlp: Mlp, prefix: str) -> list[Var]:
    out = []
    for k in range(mlp.depth):
        out.append(params[f"{prefix}.w{k}"])
        out.append(params[f"{prefix}.b{k}"])
    return out


def node_representations(
    model: LinkModel, tensors: GraphTensors, tape: Tape, params: dict[str, Var]
) -> Var:
    """Final node representations g^(L): encoder then the GCN stack."""
    x = tape.leaf(tensors.x, const=True)
    g = model.encoder.forward_vars(tape, x, _mlp_vars(params, model.encoder, "encoder"))
    a = tape.leaf(tensors.adj, const=True)
    for li, layer in enumerate(model.layers):
        h = layer.f_v.forward_vars(tape, g, _mlp_vars(params, layer.f_v, f"gcn{li}.fv"))
        m = layer.f_e.forward_vars(tape, g, _mlp_vars(params, layer.f_e, f"gcn{li}.fe"))
        g = relu(tape, add(tape, h, matmul(tape, a, m)))
    return g


def classify_edge_subset(
    model: LinkModel,
    tensors: GraphTensors,
    tape: Tape,
    g: Var,
    edge_idx: np.ndarray,
    params: dict[str, Var],
) -> Var:
    """Taped classifier pass restricted to the given edge indices."""
    gi = gather_rows(tape, g, tensors.src[edge_idx])
    gj = gather_rows(tape, g, tensors.dst[edge_idx])
    xe = concat_cols(tape, [gi, tape.leaf(tensors.efeat[edge_idx], const=True), gj])
    return model.classifier.forward_vars(
        tape, xe, _mlp_vars(params, model.classifier, "classifier")
    )


def edge_probabilities_from_reprs(
    model: LinkModel, g_value: np.ndarray, tensors: GraphTensors
) -> np.ndarray:
    """All-edge probabilities from precomputed node representations (no tape)."""
    if len(tensors.src) == 0:
        return np.zeros(0)
    xe = np.concatenate(
        [g_value[tensors.src], tensors.efeat, g_value[tensors.dst]], axis=1
    )
    return model.classifier.apply(xe)[:, 0]


def link_forward(
    model: LinkModel,
    tensors: GraphTensors,
    tape: Tape,
    params: dict[str, Var] | None = None,
) -> tuple[Var, dict[str, Var]]:
    """Edge probabilities (E,1) through encoder, GCN stack, and classifier."""
    if params is None:
        params = make_param_vars(model)
    g = node_representations(model, tensors, tape, params)
    probs = classify_edge_subset(
        model, tensors, tape, g, np.arange(len(tensors.src), dtype=np.intp), params
    )
    return probs, params


def link_probabilities(model: LinkModel, graph: PrimitiveGraph) -> np.ndarray:
    """Per-directed-edge link probability, aligned with graph.edges."""
    tensors = graph_tensors(graph)
    tape = Tape(grad_enabled=False)
    probs, _ = link_forward(model, tensors, tape)
    return probs.value[:, 0]


# spec-level convenience ops (plain forward, no tape bookkeeping)


def encode_nodes(graph: PrimitiveGraph, encoder: Mlp) -> np.ndarray:
    if any(p.descriptor is None for p in graph.nodes):
        compute_descriptors(graph.nodes)
    return encoder.apply(np.stack([p.descriptor for p in graph.nodes]))


def gcn_layer(g: np.ndarray, layer: GcnLayer, graph: PrimitiveGraph) -> np.ndarray:
    adj = normalized_adjacency(graph)
    return np.maximum(layer.f_v.apply(g) + adj @ layer.f_e.apply(g), 0.0)


def gcn_forward(g0: np.ndarray, layers: Sequence[GcnLayer], graph: PrimitiveGraph) -> np.ndarray:
    g = g0
    for layer in layers:
        g = gcn_layer(g, layer, graph)
    return g


def classify_edges(graph: PrimitiveGraph, g_final: np.ndarray, clf: Mlp) -> np.ndarray:
    tensors = graph_tensors(graph)
    if len(tensors.src) == 0:
        return np.zeros(0)
    xe = np.concatenate([g_final[tensors.src], tensors.efeat, g_final[tensors.dst]], axis=1)
    return clf.apply(xe)[:, 0]


# ---------------------------------------------------------------------------
# OHEM and the link loss


def ohem_select(
    graph: PrimitiveGraph,
    probs: np.ndarray,
    n_pos: int = 64,
    n_neg: int = 64,
) -> np.ndarray:
    """Hard-example indices per level subgraph: the n_pos positives with the
    lowest probability and the n_neg negatives with the highest; short classes
    are taken whole. Ignored negatives never enter the pools."""
    if len(probs) != len(graph.edges):
        raise ShapeError("probability count differs from edge count")
    edge_levels = graph.level_of_edges()
    selected: list[int] = []
    total_pos = 0
    for level in LEVELS:
        pos = [
            k
            for k, e in enumerate(graph.edges)
            if edge_levels[k] == level and e.label == EdgeLabel.POSITIVE
        ]
        neg = [
            k
            for k, e in enumerate(graph.edges)
            if edge_levels[k] == level and e.label == EdgeLabel.NEGATIVE
        ]
        total_pos += len(pos)
        pos.sort(key=lambda k: (probs[k], k))
        neg.sort(key=lambda k: (-probs[k], k))
        selected += pos[:n_pos]
        selected += neg[:n_neg]
    if total_pos == 0:
        raise EmptyBatch("no positive edges in any subgraph")
    return np.asarray(sorted(selected), dtype=np.intp)


def edge_targets(graph: PrimitiveGraph) -> np.ndarray:
    """1.0 for positive edges, 0.0 otherwise (ignored/unknown excluded upstream)."""
    return np.asarray(
        [1.0 if e.label == EdgeLabel.POSITIVE else 0.0 for e in graph.edges], dtype=np.float64
    )


def link_loss(probabilities: np.ndarray, labels: np.ndarray) -> float:
    """Mean BCE over the selected edge set."""
    p = np.asarray(probabilities, dtype=np.float64)
    if p.size == 0:
        raise EmptyBatch("no edges in loss")
    return bce_loss(p, np.asarray(labels, dtype=np.float64))


def link_loss_taped(
    tape: Tape, probs: Var, targets: np.ndarray, selected: np.ndarray
) -> Var:
    if len(selected) == 0:
        raise EmptyBatch("no edges selected")
    sel = gather_rows(tape, probs, selected)
    return bce_mean(tape, sel, targets[selected][:, None])


# ---------------------------------------------------------------------------
# checkpoints


def save_link_model(path: str, model: LinkModel, extra: dict[str, str] | None = None) -> None:
    manifest = {
        "descriptor_version": str(DESCRIPTOR_VERSION),
        "descriptor_dim": str(model.config.descriptor_dim),
        "hidden_dim": str(model.config.hidden_dim),
        "gcn_layers": str(model.config.gcn_layers),
        "mlp_depth": str(model.config.mlp_depth),
        "init_std": repr(model.config.init_std),
    }
    if extra:
        manifest.update(extra)
    save_checkpoint(path, manifest, [(n, a) for n, a, _ in model.named_params()])


def load_link_model(path: str) -> tuple[LinkModel, dict[str, str]]:
    manifest, params = load_checkpoint(path)
    config = ModelConfig(
        descriptor_dim=int(manifest["descriptor_dim"]),
        hidden_dim=int(manifest["hidden_dim"]),
        gcn_layers=int(manifest["gcn_layers"]),
        mlp_depth=int(manifest["mlp_depth"]),
        init_std=float(manifest["init_std"]),
    )
    model = init_link_model(config, seed=0)
    for name, arr, _ in model.named_params():
        arr[...] = params[name]
    return model, manifest
