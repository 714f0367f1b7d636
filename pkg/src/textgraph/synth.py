"""Synthetic scenes: arbitrary-shaped text instances, label geometry
(core/border regions, per-level assignment, ground-truth primitives), and a
detector simulator standing in for a learned primitive detector.

Instances are geometric only: no glyphs are rasterized. Character cells are
arc-length intervals along the center line; ground-truth primitives spawn
only where a character covers the sliding point, so inter-character spacing
shows up as gaps in the detected primitive chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import Polygon as _ShapelyPolygon

from .errors import DegenerateGeometry, PlacementFailure
from .geom import Point, Polygon, Quad, ScoredShape, nms
from .graph import NONTEXT, Primitive
from .levels import (
    BORDER_EXPAND,
    CORE_SHRINK,
    LEVELS,
    PyramidLevel,
    RegionLabel,
    assign_level,
)

# score bands used by the detector simulator
TRUE_SCORE_RANGE = (0.86, 1.0)
FALSE_ALARM_SCORE_RANGE = (0.85, 0.95)
CLUTTER_SCORE_RANGE = (0.30, 0.84)


@dataclass(frozen=True)
class TextInstance:
    """Arbitrary-shaped text region as paired anchor-point chains.

    char_spans are [start, end] arc intervals along the center line marking
    where characters sit; an empty tuple means the whole line is covered.
    """

    upper_anchors: tuple[Point, ...]
    lower_anchors: tuple[Point, ...]
    instance_id: int
    char_spans: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if len(self.upper_anchors) != len(self.lower_anchors):
            raise DegenerateGeometry("anchor chains differ in length")
        if len(self.upper_anchors) < 2:
            raise DegenerateGeometry("need at least 2 anchor pairs")

    def upper_array(self) -> np.ndarray:
        return np.asarray(self.upper_anchors, dtype=np.float64)

    def lower_array(self) -> np.ndarray:
        return np.asarray(self.lower_anchors, dtype=np.float64)

    def center_line(self) -> np.ndarray:
        return (self.upper_array() + self.lower_array()) / 2.0

    def polygon(self) -> Polygon:
        ring = list(self.upper_anchors) + list(reversed(self.lower_anchors))
        return Polygon(tuple(ring))


@dataclass(frozen=True)
class GtPrimitive:
    """Ground-truth text primitive spawned from one sliding point."""

    quad: Quad
    level: PyramidLevel
    instance_id: int
    sliding_point: Point


@dataclass
class Scene:
    width: int
    height: int
    instances: list[TextInstance]
    seed: int


@dataclass(frozen=True)
class SynthConfig:
    """Scene generator knobs. Spacing/width knobs are in units of the
    instance scale (its height)."""

    width: int = 640
    height: int = 640
    instances_min: int = 2
    instances_max: int = 4
    scale_min: float = 14.0
    scale_max: float = 40.0
    curvature_min: float = 0.0  # total turn angle along the line, radians
    curvature_max: float = 1.0
    chars_min: int = 3
    chars_max: int = 8
    char_width_min: float = 0.5
    char_width_max: float = 0.9
    char_spacing_min: float = 0.1
    char_spacing_max: float = 0.5
    line_spacing_min: float = 0.4  # gap between stacked parallel lines
    line_spacing_max: float = 1.0
    line_block_prob: float = 0.25
    rotation_max_deg: float = 25.0
    anchor_pairs: int = 7  # N; each chain carries N+1 anchors
    min_gap: float = 8.0  # px between expanded polygons of distinct layouts
    margin: float = 8.0
    retry_budget: int = 300


@dataclass(frozen=True)
class NoiseConfig:
    """Detector simulator knobs."""

    vertex_sigma: float = 1.0
    false_alarm_rate: float = 0.2
    clutter_rate: float = 0.1
    textness_threshold: float = 0.85
    nms_iou: float = 0.6


# ---------------------------------------------------------------------------
# polyline helpers


def _cumlen(pts: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def _point_at(pts: np.ndarray, cum: np.ndarray, s: float) -> np.ndarray:
    s = float(np.clip(s, 0.0, cum[-1]))
    k = int(np.searchsorted(cum, s, side="right")) - 1
    k = min(max(k, 0), len(pts) - 2)
    seg_len = cum[k + 1] - cum[k]
    t = 0.0 if seg_len <= 0 else (s - cum[k]) / seg_len
    return pts[k] + t * (pts[k + 1] - pts[k])


def _tangent_at(pts: np.ndarray, cum: np.ndarray, s: float) -> np.ndarray:
    s = float(np.clip(s, 0.0, cum[-1]))
    k = int(np.searchsorted(cum, s, side="right")) - 1
    k = min(max(k, 0), len(pts) - 2)
    d = pts[k + 1] - pts[k]
    n = np.linalg.norm(d)
    if n <= 0:
        raise DegenerateGeometry("zero-length polyline segment")
    return d / n


def _project_many(pts: np.ndarray, cum: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Arc-length position of the closest polyline point for each query."""
    a = pts[:-1][None, :, :]  # (1, nseg, 2)
    d = (pts[1:] - pts[:-1])[None, :, :]
    q = queries[:, None, :]  # (nq, 1, 2)
    seg_len2 = np.maximum((d * d).sum(axis=2), 1e-12)
    t = np.clip(((q - a) * d).sum(axis=2) / seg_len2, 0.0, 1.0)
    proj = a + t[:, :, None] * d
    dist2 = ((q - proj) ** 2).sum(axis=2)
    best = np.argmin(dist2, axis=1)
    rows = np.arange(len(queries))
    seg_norm = np.sqrt(seg_len2[0])
    return cum[best] + t[rows, best] * seg_norm[best]


def _project_one(pts: np.ndarray, cum: np.ndarray, p: np.ndarray) -> float:
    return float(_project_many(pts, cum, p[None, :])[0])


def _line_polyline_hits(
    pts: np.ndarray, cum: np.ndarray, origin: np.ndarray, direction: np.ndarray
) -> list[tuple[float, float]]:
    """(signed distance along direction, arc position) for each crossing of
    the infinite line {origin + t*direction} with the polyline."""
    hits: list[tuple[float, float]] = []
    for k in range(len(pts) - 1):
        a, b = pts[k], pts[k + 1]
        seg = b - a
        det = direction[0] * (-seg[1]) - direction[1] * (-seg[0])
        if abs(det) < 1e-12:
            continue
        rhs = a - origin
        t = (rhs[0] * (-seg[1]) - rhs[1] * (-seg[0])) / det
        u = (direction[0] * rhs[1] - direction[1] * rhs[0]) / det
        if -1e-9 <= u <= 1 + 1e-9:
            seg_len = cum[k + 1] - cum[k]
            hits.append((t, cum[k] + float(np.clip(u, 0.0, 1.0)) * seg_len))
    return hits


# ---------------------------------------------------------------------------
# label geometry


def instance_scale(t: TextInstance) -> float:
    """Shorter-side length: mean length of the anchor-pair connecting lines."""
    d = np.linalg.norm(t.upper_array() - t.lower_array(), axis=1)
    return float(d.mean())


def _scaled_ring(t: TextInstance, factor: float) -> tuple[Point, ...]:
    upper = t.upper_array()
    lower = t.lower_array()
    mid = (upper + lower) / 2.0
    up = mid + (upper - mid) * factor
    lo = mid + (lower - mid) * factor
    ring = np.concatenate([up, lo[::-1]], axis=0)
    return tuple(Point(float(x), float(y)) for x, y in ring)


@dataclass(frozen=True)
class BorderRing:
    """Region between the shrunk core polygon and the expanded polygon."""

    outer: Polygon
    inner: Polygon

    def contains(self, p: Point) -> bool:
        sp = shapely.points(p.x, p.y)
        return bool(self.outer.as_shapely().covers(sp)) and not bool(
            self.inner.as_shapely().covers(sp)
        )


def core_border_regions(t: TextInstance) -> tuple[Polygon, BorderRing]:
    """Shrink each connecting segment to CORE_SHRINK about its midpoint for the
    core; the border is the ring out to the BORDER_EXPAND-scaled polygon."""
    core = Polygon(_scaled_ring(t, CORE_SHRINK))
    expanded = Polygon(_scaled_ring(t, BORDER_EXPAND))
    return core, BorderRing(outer=expanded, inner=core)


class SceneLabels:
    """Per-scene label index: assigned level plus core/expanded/original
    polygons per instance, queryable at any point and level.

    Priority when regions touch: TEXT > BORDER > IGNORE > NON_TEXT.
    """

    def __init__(self, scene: Scene):
        self.scene = scene
        self.entries = []
        for inst in scene.instances:
            scale = instance_scale(inst)
            level = assign_level(scale)
            core, ring = core_border_regions(inst)
            self.entries.append(
                {
                    "instance": inst,
                    "scale": scale,
                    "level": level,
                    "core": core.as_shapely(),
                    "expanded": ring.outer.as_shapely(),
                    "original": inst.polygon().as_shapely(),
                }
            )

    def level_instances(self, level: PyramidLevel) -> list[TextInstance]:
        return [e["instance"] for e in self.entries if e["level"] == level]

    def label(self, p: Point, level: PyramidLevel) -> RegionLabel:
        sp = shapely.points(p.x, p.y)
        ignore = False
        border = False
        for e in self.entries:
            if e["level"] == level:
                if e["core"].covers(sp):
                    return RegionLabel.TEXT
                if e["expanded"].covers(sp):
                    border = True
            elif e["original"].covers(sp):
                ignore = True
        if border:
            return RegionLabel.BORDER
        if ignore:
            return RegionLabel.IGNORE
        return RegionLabel.NON_TEXT


def label_point(p: Point, level: PyramidLevel, scene: Scene) -> RegionLabel:
    return SceneLabels(scene).label(p, level)


def gt_primitive(p: Point, t: TextInstance, level: PyramidLevel) -> GtPrimitive:
    """Ground-truth quad for the sliding point p: drop a perpendicular from the
    center line through p onto both long edges, then walk +/- d along each
    edge (arc length). Walks that leave the line clamp to its endpoints."""
    center = t.center_line()
    upper = t.upper_array()
    lower = t.lower_array()
    c_cum = _cumlen(center)
    u_cum = _cumlen(upper)
    l_cum = _cumlen(lower)
    pt = np.asarray([p.x, p.y], dtype=np.float64)
    s_c = _project_one(center, c_cum, pt)
    tangent = _tangent_at(center, c_cum, s_c)
    normal = np.asarray([-tangent[1], tangent[0]])

    def side_arc(pts: np.ndarray, cum: np.ndarray) -> float:
        hits = _line_polyline_hits(pts, cum, pt, normal)
        if hits:
            return min(hits, key=lambda h: abs(h[0]))[1]
        # end-of-line degeneracy: clamp to the nearer terminal vertex
        d0 = float(np.linalg.norm(pts[0] - pt))
        d1 = float(np.linalg.norm(pts[-1] - pt))
        return 0.0 if d0 <= d1 else float(cum[-1])

    s_u = side_arc(upper, u_cum)
    s_l = side_arc(lower, l_cum)
    d = float(level.d)
    ub = _point_at(upper, u_cum, s_u - d)
    uf = _point_at(upper, u_cum, s_u + d)
    lf = _point_at(lower, l_cum, s_l + d)
    lb = _point_at(lower, l_cum, s_l - d)
    quad = Quad.from_points([tuple(ub), tuple(uf), tuple(lf), tuple(lb)])
    return GtPrimitive(quad=quad, level=level, instance_id=t.instance_id, sliding_point=p)


def _char_covered(t: TextInstance, arcs: np.ndarray) -> np.ndarray:
    if not t.char_spans:
        return np.ones(len(arcs), dtype=bool)
    covered = np.zeros(len(arcs), dtype=bool)
    for a, b in t.char_spans:
        covered |= (arcs >= a) & (arcs <= b)
    return covered


def enumerate_gt_primitives(
    scene: Scene, level: PyramidLevel, labels: SceneLabels | None = None
) -> list[GtPrimitive]:
    """All ground-truth primitives of a level: sliding points on the level's
    stride grid that fall in a core region and under a character cell."""
    labels = labels or SceneLabels(scene)
    out: list[GtPrimitive] = []
    for entry in labels.entries:
        if entry["level"] != level:
            continue
        inst: TextInstance = entry["instance"]
        core = entry["core"]
        x0, y0, x1, y1 = core.bounds
        stride = level.stride
        xs = np.arange(math.floor(x0 / stride), math.ceil(x1 / stride) + 1) * stride + stride / 2.0
        ys = np.arange(math.floor(y0 / stride), math.ceil(y1 / stride) + 1) * stride + stride / 2.0
        if len(xs) == 0 or len(ys) == 0:
            continue
        gx, gy = np.meshgrid(xs, ys)
        gx = gx.ravel()
        gy = gy.ravel()
        inside = shapely.contains_xy(core, gx, gy)
        gx, gy = gx[inside], gy[inside]
        if len(gx) == 0:
            continue
        center = inst.center_line()
        c_cum = _cumlen(center)
        arcs = _project_many(center, c_cum, np.stack([gx, gy], axis=1))
        keep = _char_covered(inst, arcs)
        for x, y in zip(gx[keep], gy[keep]):
            try:
                out.append(gt_primitive(Point(float(x), float(y)), inst, level))
            except DegenerateGeometry:
                # a sliding point at a pathological spot loses its primitive
                continue
    return out


# ---------------------------------------------------------------------------
# scene generation


def _arc_centerline(length: float, turn: float):
    """Return (point_fn, normal_fn) over arc length for a straight segment
    (turn ~ 0) or a circular arc with total turn angle `turn`."""
    if abs(turn) < 1e-3:

        def point(s: float) -> np.ndarray:
            return np.asarray([s, 0.0])

        def normal(s: float) -> np.ndarray:
            return np.asarray([0.0, 1.0])

        return point, normal

    radius = length / turn  # signed

    def point(s: float) -> np.ndarray:
        a = s / radius
        return np.asarray([radius * math.sin(a), radius * (1.0 - math.cos(a))])

    def normal(s: float) -> np.ndarray:
        a = s / radius
        # perp of the tangent (cos a, sin a)
        return np.asarray([-math.sin(a), math.cos(a)])

    return point, normal


def _rotate(pts: np.ndarray, phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    rot = np.asarray([[c, -s], [s, c]])
    return pts @ rot.T


def _make_instance_geometry(rng: np.random.Generator, cfg: SynthConfig):
    """Draw one line layout in local coordinates: possibly a parallel pair."""
    h = float(rng.uniform(cfg.scale_min, cfg.scale_max))
    n_chars = int(rng.integers(cfg.chars_min, cfg.chars_max + 1))
    char_w = float(rng.uniform(cfg.char_width_min, cfg.char_width_max)) * h
    gaps = rng.uniform(cfg.char_spacing_min, cfg.char_spacing_max, size=max(n_chars - 1, 0)) * h
    length = n_chars * char_w + float(gaps.sum())
    spans = []
    s = 0.0
    for k in range(n_chars):
        spans.append((s, s + char_w))
        s += char_w
        if k < n_chars - 1:
            s += float(gaps[k])
    turn = float(rng.uniform(cfg.curvature_min, cfg.curvature_max))
    turn *= 1.0 if rng.random() < 0.5 else -1.0
    # bend radius floor: the expanded polygon must stay simple (R >= 2h) and a
    # primitive's inner chord (sagitta ~ d^2/2r) must stay within the border
    level = assign_level(h)
    d_walk = level.d if level is not None else 12
    r_min = max(2.0 * h, 6.25 * d_walk * d_walk / h + h / 2.0)
    max_turn = length / r_min
    turn = float(np.clip(turn, -max_turn, max_turn))
    phi = math.radians(float(rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg)))

    lines = [(0.0, h, tuple(spans), length)]
    if rng.random() < cfg.line_block_prob:
        gap = float(rng.uniform(cfg.line_spacing_min, cfg.line_spacing_max)) * h
        offset = h + gap
        # second line reuses the curve at a parallel offset; chars redrawn below
        lines.append((offset, h, None, length))
    return h, turn, phi, lines


def _offset_line_points(
    length: float, turn: float, offset: float, n_anchors: int, h: float
) -> tuple[np.ndarray, np.ndarray, float] | None:
    """Anchor chains for a line at perpendicular offset from the base curve.
    Returns (upper, lower, effective_length) in local coords, or None when the
    offset bends the arc too tightly for a valid expanded polygon."""
    point, normal = _arc_centerline(length, turn)
    ss = np.linspace(0.0, length, n_anchors)
    base = np.stack([point(float(s)) for s in ss])
    nrm = np.stack([normal(float(s)) for s in ss])
    center = base + offset * nrm
    if abs(turn) < 1e-3:
        eff_len = length
    else:
        # offsetting a circular arc along +normal keeps the center and maps
        # radius R to R - offset over the same angular span
        radius = length / turn
        scale = (radius - offset) / radius
        if scale <= 0 or abs(radius - offset) < 1.0 * h:
            return None
        eff_len = length * scale
        if eff_len <= h:
            return None
    upper = center - (h / 2.0) * nrm
    lower = center + (h / 2.0) * nrm
    return upper, lower, float(eff_len)


def _char_spans_for_length(
    rng: np.random.Generator, cfg: SynthConfig, h: float, length: float
) -> tuple[tuple[float, float], ...]:
    char_w = float(rng.uniform(cfg.char_width_min, cfg.char_width_max)) * h
    spans = []
    s = 0.0
    while s + char_w <= length + 1e-9:
        spans.append((s, s + char_w))
        s += char_w + float(rng.uniform(cfg.char_spacing_min, cfg.char_spacing_max)) * h
    if not spans:
        spans.append((0.0, length))
    return tuple(spans)


def generate_scene(config: SynthConfig, seed: int) -> Scene:
    """Deterministic scene for (config, seed). Instances (and stacked line
    blocks) are placed so expanded polygons keep min_gap px of clearance."""
    rng = np.random.default_rng(seed)
    target = int(rng.integers(config.instances_min, config.instances_max + 1))
    placed: list[TextInstance] = []
    placed_expanded: list[_ShapelyPolygon] = []
    attempts = 0
    while len(placed) < target:
        if attempts >= config.retry_budget:
            raise PlacementFailure(
                f"placed {len(placed)}/{target} instances in {attempts} attempts"
            )
        attempts += 1
        h, turn, phi, lines = _make_instance_geometry(rng, config)
        n_anchors = config.anchor_pairs + 1
        chains = []
        ok = True
        for offset, hh, spans, length in lines:
            res = _offset_line_points(length, turn, offset, n_anchors, hh)
            if res is None:
                ok = False
                break
            upper, lower, eff_len = res
            if spans is None:
                spans = _char_spans_for_length(rng, config, hh, eff_len)
            else:
                # base-line spans were drawn against the base length
                spans = tuple(spans)
            chains.append((upper, lower, spans))
        if not ok:
            continue

        # rotate and gather bounds
        rot_chains = [(_rotate(u, phi), _rotate(l, phi), spans) for u, l, spans in chains]
        all_pts = np.concatenate([np.concatenate([u, l]) for u, l, _ in rot_chains])
        exp_margin = 0.1 * h + config.margin
        x0, y0 = all_pts.min(axis=0) - exp_margin
        x1, y1 = all_pts.max(axis=0) + exp_margin
        tx_lo, tx_hi = -x0, config.width - x1
        ty_lo, ty_hi = -y0, config.height - y1
        if tx_lo > tx_hi or ty_lo > ty_hi:
            continue
        shift = np.asarray(
            [rng.uniform(tx_lo, tx_hi), rng.uniform(ty_lo, ty_hi)], dtype=np.float64
        )

        candidates = []
        valid = True
        for upper, lower, spans in rot_chains:
            up = upper + shift
            lo = lower + shift
            try:
                inst = TextInstance(
                    upper_anchors=tuple(Point(float(x), float(y)) for x, y in up),
                    lower_anchors=tuple(Point(float(x), float(y)) for x, y in lo),
                    instance_id=len(placed) + len(candidates),
                    char_spans=spans,
                )
                expanded = Polygon(_scaled_ring(inst, BORDER_EXPAND)).as_shapely()
            except DegenerateGeometry:
                valid = False
                break
            if not expanded.is_valid:
                valid = False
                break
            for other in placed_expanded:
                if expanded.distance(other) < config.min_gap:
                    valid = False
                    break
            if not valid:
                break
            candidates.append((inst, expanded))
        if not valid or not candidates:
            continue
        # lines inside one block were built disjoint; verify anyway
        if len(candidates) == 2 and candidates[0][1].intersects(candidates[1][1]):
            continue
        # never overshoot the requested instance count
        candidates = candidates[: target - len(placed)]
        for inst, expanded in candidates:
            placed.append(inst)
            placed_expanded.append(expanded)

    return Scene(width=config.width, height=config.height, instances=placed, seed=seed)


# ---------------------------------------------------------------------------
# detector simulation


def _jitter_quad(quad: Quad, sigma: float, rng: np.random.Generator) -> Quad:
    if sigma <= 0:
        return quad
    arr = quad.as_array()
    for _ in range(4):
        noise = rng.normal(0.0, sigma, size=(4, 2))
        try:
            return Quad.from_points(arr + noise)
        except DegenerateGeometry:
            continue
    return quad


def _background_box(
    rng: np.random.Generator,
    scene: Scene,
    labels: SceneLabels,
    w: float,
    h: float,
    existing: list[Quad],
) -> Quad | None:
    """Axis-aligned box in free background; None when no spot is found."""
    for _ in range(50):
        cx = float(rng.uniform(w / 2.0, scene.width - w / 2.0))
        cy = float(rng.uniform(h / 2.0, scene.height - h / 2.0))
        sp = shapely.points(cx, cy)
        if any(e["expanded"].covers(sp) for e in labels.entries):
            continue
        quad = Quad.from_points(
            [
                (cx - w / 2, cy - h / 2),
                (cx + w / 2, cy - h / 2),
                (cx + w / 2, cy + h / 2),
                (cx - w / 2, cy + h / 2),
            ]
        )
        box = quad.aabb()
        if any(box.iou(q.aabb()) > 0.05 for q in existing):
            continue
        return quad
    return None


def simulate_detector(scene: Scene, noise: NoiseConfig, seed: int) -> list[Primitive]:
    """GT-derived detections: jittered true primitives, background false
    alarms that pass the textness threshold, and sub-threshold clutter that
    exercises it. Threshold then per-level NMS; deterministic per seed."""
    rng = np.random.default_rng(seed)
    labels = SceneLabels(scene)
    prims: list[Primitive] = []
    next_id = 0
    for level in LEVELS:
        gt = enumerate_gt_primitives(scene, level, labels)
        if not gt:
            continue
        true_quads = [_jitter_quad(g.quad, noise.vertex_sigma, rng) for g in gt]
        true_scores = rng.uniform(*TRUE_SCORE_RANGE, size=len(gt))
        # survivor count of the true set fixes the false-alarm budget
        true_items = [ScoredShape(q, float(s)) for q, s in zip(true_quads, true_scores)]
        true_keep = set(nms(true_items, noise.nms_iou))
        n_text = len(true_keep)

        candidates: list[tuple[Quad, float, int]] = []
        for k, (q, s) in enumerate(zip(true_quads, true_scores)):
            candidates.append((q, float(s), gt[k].instance_id))

        kept_true = [true_quads[k] for k in true_keep]
        mean_w = float(np.mean([q.aabb().w for q in kept_true]))
        mean_h = float(np.mean([q.aabb().h for q in kept_true]))
        n_fa = int(rng.binomial(n_text, noise.false_alarm_rate)) if n_text else 0
        fa_quads: list[Quad] = []
        for _ in range(n_fa):
            q = _background_box(rng, scene, labels, mean_w, mean_h, kept_true + fa_quads)
            if q is None:
                continue
            fa_quads.append(q)
            candidates.append((q, float(rng.uniform(*FALSE_ALARM_SCORE_RANGE)), NONTEXT))
        n_cl = int(rng.binomial(n_text, noise.clutter_rate)) if n_text else 0
        for _ in range(n_cl):
            q = _background_box(rng, scene, labels, mean_w, mean_h, kept_true + fa_quads)
            if q is None:
                continue
            candidates.append((q, float(rng.uniform(*CLUTTER_SCORE_RANGE)), NONTEXT))

        # textness threshold, then standard NMS within the level
        strong = [c for c in candidates if c[1] >= noise.textness_threshold]
        items = [ScoredShape(q, s) for q, s, _ in strong]
        keep = sorted(nms(items, noise.nms_iou))
        for k in keep:
            q, s, truth = strong[k]
            prims.append(
                Primitive.create(id=next_id, quad=q, level=level, score=s, truth=truth)
            )
            next_id += 1
    return prims


def gt_polygons(scene: Scene) -> list[Polygon]:
    return [inst.polygon() for inst in scene.instances]
