"""End-to-end orchestration: link thresholding, Union-Find grouping, polygon
reconstruction from grouped primitives, cross-level polygon NMS, a non-learned
distance-linkage baseline, evaluation, training, and the ablation harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateGeometry, EmptyBatch, InsufficientPoints
from .gcn import (
    LinkModel,
    ModelConfig,
    classify_edge_subset,
    edge_probabilities_from_reprs,
    edge_targets,
    graph_tensors,
    init_link_model,
    link_probabilities,
    make_param_vars,
    node_representations,
    ohem_select,
)
from .geom import (
    Point,
    Polygon,
    ScoredShape,
    convex_hull,
    fit_side,
    polygon_iou,
    polygon_nms,
    principal_frame,
)
from .graph import (
    DEFAULT_K,
    NONTEXT_SAMPLE_CAP,
    NONTEXT_SAMPLE_RATIO,
    Primitive,
    PrimitiveGraph,
    build_graph,
    build_training_graph,
    connected_components,
)
from .levels import LEVELS, PyramidLevel
from .nn import SgdState, Tape, bce_mean
from .seeding import derive_seed
from .synth import (
    NoiseConfig,
    Scene,
    SceneLabels,
    enumerate_gt_primitives,
    simulate_detector,
)

LINK_THRESHOLD = 0.7
POLYGON_NMS_IOU = 0.2
OHEM_POSITIVES = 64
OHEM_NEGATIVES = 64
EVAL_IOU = 0.5


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 2000
    learning_rate: float = 0.01
    lr_drop_iters: tuple[int, ...] = (1400,)
    lr_drop_factor: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0005
    ohem_pos: int = OHEM_POSITIVES
    ohem_neg: int = OHEM_NEGATIVES
    knn_k: int = DEFAULT_K
    nontext_ratio: float = NONTEXT_SAMPLE_RATIO
    nontext_cap: int = NONTEXT_SAMPLE_CAP


@dataclass(frozen=True)
class InferConfig:
    link_threshold: float = LINK_THRESHOLD
    polygon_nms_iou: float = POLYGON_NMS_IOU
    knn_k: int = DEFAULT_K
    fit_degree: int = 3
    side_points: int = 7
    min_group_size: int = 1
    baseline_beta: float = 2.0
    baseline_max_angle_deg: float = 30.0


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = EVAL_IOU


@dataclass(frozen=True)
class LinkDecision:
    i: int
    j: int
    linked: bool
    max_prob: float


@dataclass
class DetectionResult:
    polygon: Polygon
    score: float
    member_ids: list[int]
    level: PyramidLevel


@dataclass
class PerImageEval:
    scene_index: int
    tp: int
    fp: int
    fn: int
    matches: list[tuple[int, int, float]]  # (detection idx, gt idx, iou)


@dataclass
class EvalReport:
    precision: float
    recall: float
    f_score: float
    iou_threshold: float
    per_image: list[PerImageEval] = field(default_factory=list)


def links_from_probabilities(
    graph: PrimitiveGraph, probs: np.ndarray, threshold: float = LINK_THRESHOLD
) -> list[LinkDecision]:
    """One decision per unordered node pair carrying at least one directed
    edge: linked iff the max directional probability reaches the threshold."""
    best: dict[tuple[int, int], float] = {}
    for k, e in enumerate(graph.edges):
        key = (min(e.src, e.dst), max(e.src, e.dst))
        p = float(probs[k])
        if key not in best or p > best[key]:
            best[key] = p
    return [
        LinkDecision(i=i, j=j, linked=p >= threshold, max_prob=p)
        for (i, j), p in sorted(best.items())
    ]


def predict_links(
    graph: PrimitiveGraph, model: LinkModel, threshold: float = LINK_THRESHOLD
) -> list[LinkDecision]:
    return links_from_probabilities(graph, link_probabilities(model, graph), threshold)


def group(decisions: Sequence[LinkDecision], node_ids: Sequence[int]) -> list[list[int]]:
    links = [(d.i, d.j) for d in decisions if d.linked]
    return connected_components(node_ids, links)


def _ordered_side_points(members: list[Primitive]) -> tuple[list[Point], list[Point]]:
    centers = np.asarray([[m.center.x, m.center.y] for m in members])
    _, axis, _ = principal_frame(centers)
    order = np.argsort(centers @ axis, kind="stable")
    upper: list[Point] = []
    lower: list[Point] = []
    for idx in order:
        arr = members[int(idx)].quad.as_array()
        top = [arr[0], arr[1]]
        bot = [arr[3], arr[2]]
        if (top[0] @ axis) > (top[1] @ axis):
            top.reverse()
        if (bot[0] @ axis) > (bot[1] @ axis):
            bot.reverse()
        upper += [Point(float(p[0]), float(p[1])) for p in top]
        lower += [Point(float(p[0]), float(p[1])) for p in bot]
    return upper, lower


def reconstruct(
    members: list[Primitive], fit_degree: int = 3, side_points: int = 7
) -> DetectionResult:
    """Polygon for one grouped instance: members ordered along their principal
    axis, quad top/bottom edges fitted as two polynomial sides. Falls back to
    the convex hull of all member vertices when the fit degenerates."""
    if not members:
        raise ValueError("reconstruct needs at least one member")
    score = float(np.mean([m.score for m in members]))
    ids = [m.id for m in members]
    level = members[0].level
    if len(members) == 1:
        return DetectionResult(
            polygon=members[0].quad.polygon(), score=score, member_ids=ids, level=level
        )
    try:
        upper, lower = _ordered_side_points(members)
        top = fit_side(upper, fit_degree, side_points)
        bot = fit_side(lower, fit_degree, side_points)
        polygon = Polygon(tuple(top + list(reversed(bot))))
    except (DegenerateGeometry, InsufficientPoints):
        verts: list[Point] = []
        for m in members:
            verts += list(m.quad.vertices)
        polygon = Polygon(tuple(convex_hull(verts)))
    return DetectionResult(polygon=polygon, score=score, member_ids=ids, level=level)


def aggregate(
    results: Sequence[DetectionResult], iou_threshold: float = POLYGON_NMS_IOU
) -> list[DetectionResult]:
    """Cross-level polygon NMS over all reconstructed detections."""
    if not results:
        return []
    items = [ScoredShape(r.polygon, min(max(r.score, 0.0), 1.0)) for r in results]
    keep = sorted(polygon_nms(items, iou_threshold))
    return [results[k] for k in keep]


def _quad_height(p: Primitive) -> float:
    arr = p.quad.as_array()
    return float(
        (np.linalg.norm(arr[0] - arr[3]) + np.linalg.norm(arr[1] - arr[2])) / 2.0
    )


def _quad_angle(p: Primitive) -> float:
    arr = p.quad.as_array()
    left = (arr[0] + arr[3]) / 2.0
    right = (arr[1] + arr[2]) / 2.0
    return math.atan2(right[1] - left[1], right[0] - left[0])


def baseline_group(
    primitives: Sequence[Primitive],
    beta: float = 2.0,
    max_angle_deg: float = 30.0,
) -> list[list[int]]:
    """Distance-linkage grouping: link same-level pairs whose center distance
    stays within beta times their mean height and whose orientations agree."""
    links: list[tuple[int, int]] = []
    max_angle = math.radians(max_angle_deg)
    heights = [_quad_height(p) for p in primitives]
    angles = [_quad_angle(p) for p in primitives]
    for a in range(len(primitives)):
        for b in range(a + 1, len(primitives)):
            pa, pb = primitives[a], primitives[b]
            if pa.level != pb.level:
                continue
            dist = math.hypot(pa.center.x - pb.center.x, pa.center.y - pb.center.y)
            if dist > beta * (heights[a] + heights[b]) / 2.0:
                continue
            dang = abs(angles[a] - angles[b]) % math.pi
            dang = min(dang, math.pi - dang)
            if dang > max_angle:
                continue
            links.append((pa.id, pb.id))
    return connected_components([p.id for p in primitives], links)


def evaluate(
    detections: Sequence[Sequence[DetectionResult]],
    gt_instances: Sequence[Sequence[Polygon]],
    iou_threshold: float = EVAL_IOU,
) -> EvalReport:
    """Greedy one-to-one matching by descending detection score; micro-averaged
    precision/recall/F over the corpus. With zero detections P is 0."""
    if len(detections) != len(gt_instances):
        raise ValueError("detections and ground truth must cover the same scenes")
    tp = fp = fn = 0
    per_image: list[PerImageEval] = []
    for scene_idx, (dets, gts) in enumerate(zip(detections, gt_instances)):
        order = sorted(range(len(dets)), key=lambda k: (-dets[k].score, k))
        matched_gt: set[int] = set()
        matches: list[tuple[int, int, float]] = []
        s_tp = s_fp = 0
        for k in order:
            best_iou = 0.0
            best_g = -1
            for g, gt in enumerate(gts):
                if g in matched_gt:
                    continue
                iou = polygon_iou(dets[k].polygon, gt)
                if iou > best_iou:
                    best_iou, best_g = iou, g
            if best_g >= 0 and best_iou >= iou_threshold:
                matched_gt.add(best_g)
                matches.append((k, best_g, best_iou))
                s_tp += 1
            else:
                s_fp += 1
        s_fn = len(gts) - len(matched_gt)
        tp, fp, fn = tp + s_tp, fp + s_fp, fn + s_fn
        per_image.append(
            PerImageEval(scene_index=scene_idx, tp=s_tp, fp=s_fp, fn=s_fn, matches=matches)
        )
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f_score = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return EvalReport(
        precision=precision,
        recall=recall,
        f_score=f_score,
        iou_threshold=iou_threshold,
        per_image=per_image,
    )


# ---------------------------------------------------------------------------
# inference over detected primitives


def _components_to_detections(
    nodes: Sequence[Primitive], components: list[list[int]], cfg: InferConfig
) -> list[DetectionResult]:
    by_id = {p.id: p for p in nodes}
    results = []
    for comp in components:
        if len(comp) < cfg.min_group_size:
            continue
        members = [by_id[i] for i in comp]
        results.append(reconstruct(members, cfg.fit_degree, cfg.side_points))
    return aggregate(results, cfg.polygon_nms_iou)


def detect_and_group(
    model: LinkModel, primitives: Sequence[Primitive], cfg: InferConfig
) -> list[DetectionResult]:
    """Learned path: KNN graph, GCN link prediction, threshold, Union-Find,
    polygon fitting, cross-level polygon NMS."""
    if not primitives:
        return []
    graph = build_graph(primitives, cfg.knn_k)
    decisions = predict_links(graph, model, cfg.link_threshold)
    comps = group(decisions, [p.id for p in graph.nodes])
    return _components_to_detections(graph.nodes, comps, cfg)


def baseline_detect(primitives: Sequence[Primitive], cfg: InferConfig) -> list[DetectionResult]:
    """Non-learned path: distance-linkage grouping, same reconstruction tail."""
    if not primitives:
        return []
    graph = build_graph(primitives, cfg.knn_k)  # normalizes ids to positions
    comps = baseline_group(graph.nodes, cfg.baseline_beta, cfg.baseline_max_angle_deg)
    return _components_to_detections(graph.nodes, comps, cfg)


def oracle_detect(primitives: Sequence[Primitive], cfg: InferConfig) -> list[DetectionResult]:
    """Perfect-link reference: groups primitives by their true instance id."""
    if not primitives:
        return []
    graph = build_graph(primitives, cfg.knn_k)
    groups: dict[int, list[int]] = {}
    for p in graph.nodes:
        if p.truth is not None and p.truth >= 0:
            groups.setdefault(p.truth, []).append(p.id)
    comps = [sorted(v) for _, v in sorted(groups.items())]
    return _components_to_detections(graph.nodes, comps, cfg)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainLogRow:
    iteration: int
    loss: float
    learning_rate: float


def _training_graphs(scenes: Sequence[Scene], cfg: TrainConfig, seed: int) -> list[tuple]:
    prepared = []
    for i, scene in enumerate(scenes):
        labels = SceneLabels(scene)
        gt = [
            g
            for level in LEVELS
            for g in enumerate_gt_primitives(scene, level, labels)
        ]
        graph = build_training_graph(
            gt,
            labels,
            k=cfg.knn_k,
            seed=derive_seed(seed, "traingraph", i),
            nontext_ratio=cfg.nontext_ratio,
            nontext_cap=cfg.nontext_cap,
        )
        prepared.append((graph, graph_tensors(graph), edge_targets(graph)))
    return prepared


def train(
    scenes: Sequence[Scene],
    model_config: ModelConfig,
    train_config: TrainConfig,
    seed: int = 0,
) -> tuple[LinkModel, list[TrainLogRow]]:
    """Deterministic training loop: one scene's training graph per iteration,
    OHEM edge selection, mean BCE, SGD with momentum. Iterations without
    positive edges are skipped and logged with a NaN loss."""
    if not scenes:
        raise ValueError("training needs at least one scene")
    prepared = _training_graphs(scenes, train_config, seed)
    model = init_link_model(model_config, derive_seed(seed, "init"))
    sgd = SgdState(
        learning_rate=train_config.learning_rate,
        momentum=train_config.momentum,
        weight_decay=train_config.weight_decay,
    )
    order_rng = np.random.default_rng(derive_seed(seed, "order"))
    perm = order_rng.permutation(len(prepared))
    log: list[TrainLogRow] = []
    for it in range(train_config.iterations):
        if it > 0 and it % len(prepared) == 0:
            perm = order_rng.permutation(len(prepared))
        graph, tensors, targets = prepared[perm[it % len(prepared)]]
        drops = sum(1 for d in train_config.lr_drop_iters if it >= d)
        lr = train_config.learning_rate * (train_config.lr_drop_factor**drops)
        sgd.learning_rate = lr
        if len(graph.edges) == 0:
            log.append(TrainLogRow(it, float("nan"), lr))
            continue
        tape = Tape()
        pvars = make_param_vars(model)
        g = node_representations(model, tensors, tape, pvars)
        # hardness ranking needs every edge's probability but no gradients;
        # the taped classifier pass then covers only the selected edges
        probs_all = edge_probabilities_from_reprs(model, g.value, tensors)
        try:
            sel = ohem_select(graph, probs_all, train_config.ohem_pos, train_config.ohem_neg)
        except EmptyBatch:
            log.append(TrainLogRow(it, float("nan"), lr))
            continue
        probs_sel = classify_edge_subset(model, tensors, tape, g, sel, pvars)
        loss = bce_mean(tape, probs_sel, targets[sel][:, None])
        tape.backward(loss)
        updates = []
        for name, arr, is_bias in model.named_params():
            grad = pvars[name].grad
            if grad is None:
                grad = np.zeros_like(arr)
            updates.append((name, arr, grad, is_bias))
        sgd.step(updates)
        log.append(TrainLogRow(it, float(loss.value), lr))
    return model, log


# ---------------------------------------------------------------------------
# corpus-level runs and the ablation harness


def run_inference(
    model: LinkModel | None,
    scenes: Sequence[Scene],
    noise: NoiseConfig,
    cfg: InferConfig,
    seed: int,
    grouping: str = "gcn",
) -> tuple[list[list[DetectionResult]], list[list[Primitive]]]:
    """Simulate the detector per scene, then group; grouping is one of
    'gcn', 'linkage', or 'oracle'."""
    detections: list[list[DetectionResult]] = []
    all_prims: list[list[Primitive]] = []
    for i, scene in enumerate(scenes):
        prims = simulate_detector(scene, noise, derive_seed(seed, "detect", i))
        all_prims.append(prims)
        if grouping == "gcn":
            if model is None:
                raise ValueError("gcn grouping needs a model")
            detections.append(detect_and_group(model, prims, cfg))
        elif grouping == "linkage":
            detections.append(baseline_detect(prims, cfg))
        elif grouping == "oracle":
            detections.append(oracle_detect(prims, cfg))
        else:
            raise ValueError(f"unknown grouping {grouping!r}")
    return detections, all_prims


def ablate(
    train_scenes: Sequence[Scene],
    eval_scenes: Sequence[Scene],
    grid: dict[str, list],
    model_config: ModelConfig,
    train_config: TrainConfig,
    noise: NoiseConfig,
    infer_config: InferConfig,
    eval_config: EvalConfig,
    seed: int = 0,
) -> list[dict]:
    """One row per grid cell. Supported axes: depth (GCN layers), mlp_depth,
    grouping ('gcn'/'linkage'). Each learned cell trains from scratch with a
    cell-derived seed."""
    axes = list(grid.items())
    if not axes:
        axes = [("depth", [model_config.gcn_layers])]
    if len(axes) != 1:
        raise ValueError("ablation grid varies one axis at a time")
    axis, values = axes[0]
    gts = [[inst.polygon() for inst in s.instances] for s in eval_scenes]
    rows: list[dict] = []
    for value in values:
        cell_cfg = model_config
        grouping = "gcn"
        if axis == "depth":
            cell_cfg = replace(model_config, gcn_layers=int(value))
        elif axis == "mlp_depth":
            cell_cfg = replace(model_config, mlp_depth=int(value))
        elif axis == "grouping":
            grouping = str(value)
        else:
            raise ValueError(f"unknown ablation axis {axis!r}")
        cell_seed = derive_seed(seed, f"ablate:{axis}", values.index(value))
        model = None
        if grouping == "gcn":
            model, _ = train(train_scenes, cell_cfg, train_config, cell_seed)
        dets, _ = run_inference(
            model, eval_scenes, noise, infer_config, derive_seed(cell_seed, "eval"), grouping
        )
        report = evaluate(dets, gts, eval_config.iou_threshold)
        rows.append(
            {
                axis: value,
                "precision": report.precision,
                "recall": report.recall,
                "f_score": report.f_score,
            }
        )
    return rows
