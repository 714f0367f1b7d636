"""Directed text-primitive graphs: KNN construction per pyramid level,
training graphs with synthesized non-text nodes and edge labels, and
Union-Find connected components."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .geom import Aabb, Point, Quad, ScoredShape, nms
from .levels import LEVELS, PyramidLevel, RegionLabel

if TYPE_CHECKING:  # pragma: no cover
    from .synth import GtPrimitive, SceneLabels

NONTEXT = -1  # truth value for synthesized / false-alarm primitives
TRAINING_NMS_IOU = 0.3
DEFAULT_K = 10
NONTEXT_SAMPLE_RATIO = 0.5
NONTEXT_SAMPLE_CAP = 256


class EdgeLabel(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    IGNORED_NEGATIVE = "ignored-negative"
    UNKNOWN = "unknown"


@dataclass
class Primitive:
    """One detected or ground-truth text segment (a graph node).

    truth: instance id (>= 0), NONTEXT for synthesized/false primitives, or
    None when unknown (inference on real detections).
    """

    id: int
    quad: Quad
    level: PyramidLevel
    score: float
    truth: int | None
    aabb: Aabb
    center: Point
    descriptor: np.ndarray | None = None

    @staticmethod
    def create(
        id: int, quad: Quad, level: PyramidLevel, score: float, truth: int | None = None
    ) -> "Primitive":
        return Primitive(
            id=id,
            quad=quad,
            level=level,
            score=score,
            truth=truth,
            aabb=quad.aabb(),
            center=quad.centroid(),
        )


@dataclass(frozen=True)
class DirectedEdge:
    src: int
    dst: int
    label: EdgeLabel = EdgeLabel.UNKNOWN


@dataclass
class PrimitiveGraph:
    """Directed graph over primitives; edges never cross pyramid levels, so it
    decomposes into disjoint per-level subgraphs."""

    nodes: list[Primitive]
    edges: list[DirectedEdge]
    _in_neighbors: list[list[int]] | None = field(default=None, repr=False)

    def node_by_id(self, node_id: int) -> Primitive:
        return self.nodes[self._index_of(node_id)]

    def _index_of(self, node_id: int) -> int:
        # node ids are positions by construction
        return node_id

    def in_neighbors(self) -> list[list[int]]:
        if self._in_neighbors is None:
            nbrs: list[list[int]] = [[] for _ in self.nodes]
            for e in self.edges:
                nbrs[e.dst].append(e.src)
            self._in_neighbors = nbrs
        return self._in_neighbors

    def level_node_ids(self, level: PyramidLevel) -> list[int]:
        return [p.id for p in self.nodes if p.level == level]

    def level_of_edges(self) -> list[PyramidLevel]:
        return [self.nodes[e.src].level for e in self.edges]


def _knn_edges(prims: Sequence[Primitive], k: int) -> list[DirectedEdge]:
    """Directed edges i->j for every i in the K nearest neighbours of j,
    Euclidean distance between centers, ties broken by ascending node id."""
    edges: list[DirectedEdge] = []
    for level in LEVELS:
        ids = [p.id for p in prims if p.level == level]
        if len(ids) < 2:
            continue
        centers = np.asarray([[prims[i].center.x, prims[i].center.y] for i in ids])
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        for jj, j in enumerate(ids):
            order = sorted(
                (ii for ii in range(len(ids)) if ii != jj),
                key=lambda ii: (dist[ii, jj], ids[ii]),
            )
            for ii in order[: min(k, len(ids) - 1)]:
                edges.append(DirectedEdge(src=ids[ii], dst=j))
    return edges


def build_graph(primitives: Sequence[Primitive], k: int = DEFAULT_K) -> PrimitiveGraph:
    """KNN graph per pyramid level over the given primitives.

    Node ids are reassigned to list positions to keep lookups O(1).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    nodes = []
    for pos, p in enumerate(primitives):
        if p.id != pos:
            p = Primitive(
                id=pos,
                quad=p.quad,
                level=p.level,
                score=p.score,
                truth=p.truth,
                aabb=p.aabb,
                center=p.center,
                descriptor=p.descriptor,
            )
        nodes.append(p)
    return PrimitiveGraph(nodes=nodes, edges=_knn_edges(nodes, k))


def _edge_label(a: Primitive, b: Primitive) -> EdgeLabel:
    if a.truth is None or b.truth is None:
        return EdgeLabel.UNKNOWN
    if a.truth >= 0 and a.truth == b.truth:
        return EdgeLabel.POSITIVE
    if a.truth == NONTEXT and b.truth == NONTEXT:
        return EdgeLabel.IGNORED_NEGATIVE
    return EdgeLabel.NEGATIVE


def build_training_graph(
    gt: Sequence["GtPrimitive"],
    labels: "SceneLabels",
    k: int = DEFAULT_K,
    seed: int = 0,
    nontext_ratio: float = NONTEXT_SAMPLE_RATIO,
    nontext_cap: int = NONTEXT_SAMPLE_CAP,
) -> PrimitiveGraph:
    """Training graph: ground-truth primitives plus sampled non-text nodes.

    Per level: sample non-text points and give each an artificial box of the
    level's average ground-truth width/height; set every score to 1.0,
    shuffle (seeded), run standard NMS at TRAINING_NMS_IOU, build the KNN
    graph on the survivors, and label edges by instance membership
    (non-text<->non-text edges are ignored-negative).
    """
    rng = np.random.default_rng(seed)
    scene = labels.scene
    prims: list[Primitive] = []
    for level in LEVELS:
        level_gt = [g for g in gt if g.level == level]
        if not level_gt:
            continue
        boxes = [g.quad.aabb() for g in level_gt]
        mean_w = float(np.mean([b.w for b in boxes]))
        mean_h = float(np.mean([b.h for b in boxes]))
        n_samples = min(int(round(nontext_ratio * len(level_gt))), nontext_cap)
        entries: list[tuple[Quad, int]] = [(g.quad, g.instance_id) for g in level_gt]
        drawn = 0
        budget = 60 * max(n_samples, 1)
        while drawn < n_samples and budget > 0:
            budget -= 1
            x = float(rng.uniform(mean_w / 2.0, scene.width - mean_w / 2.0))
            y = float(rng.uniform(mean_h / 2.0, scene.height - mean_h / 2.0))
            if labels.label(Point(x, y), level) != RegionLabel.NON_TEXT:
                continue
            quad = Quad.from_points(
                [
                    (x - mean_w / 2, y - mean_h / 2),
                    (x + mean_w / 2, y - mean_h / 2),
                    (x + mean_w / 2, y + mean_h / 2),
                    (x - mean_w / 2, y + mean_h / 2),
                ]
            )
            entries.append((quad, NONTEXT))
            drawn += 1
        perm = rng.permutation(len(entries))
        shuffled = [entries[i] for i in perm]
        items = [ScoredShape(q, 1.0) for q, _ in shuffled]
        keep = sorted(nms(items, TRAINING_NMS_IOU))
        for q, truth in (shuffled[i] for i in keep):
            prims.append(
                Primitive.create(id=len(prims), quad=q, level=level, score=1.0, truth=truth)
            )

    graph = build_graph(prims, k)
    graph.edges = [
        DirectedEdge(e.src, e.dst, _edge_label(graph.nodes[e.src], graph.nodes[e.dst]))
        for e in graph.edges
    ]
    return graph


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, ids: Iterable[int]):
        self.parent = {i: i for i in ids}
        self.size = {i: 1 for i in self.parent}

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]


def connected_components(
    node_ids: Iterable[int], links: Iterable[tuple[int, int]]
) -> list[list[int]]:
    """Union-Find partition of node_ids under the undirected links.

    Components are sorted internally and by their smallest member, so the
    output is a canonical form comparable across traversal orders.
    """
    uf = UnionFind(node_ids)
    for i, j in links:
        uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for i in uf.parent:
        groups.setdefault(uf.find(i), []).append(i)
    comps = [sorted(g) for g in groups.values()]
    comps.sort(key=lambda g: g[0])
    return comps
