"""Planar geometry kernel: points, quads, polygons, IoU, NMS variants, side fitting.

All coordinates are pixels in image convention (y grows downward); "clockwise"
means clockwise on screen, which is a positive shoelace sum in this convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np
from shapely.geometry import Polygon as _ShapelyPolygon

from .errors import DegenerateGeometry, InsufficientPoints

_AREA_EPS = 1e-9


class Point(NamedTuple):
    x: float
    y: float


def _ring_array(points: Sequence[Point]) -> np.ndarray:
    arr = np.asarray([(p[0], p[1]) for p in points], dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DegenerateGeometry("non-finite coordinate in ring")
    return arr


def signed_ring_area(vertices: np.ndarray) -> float:
    """Shoelace area; positive for screen-clockwise rings (y-down coordinates)."""
    x = vertices[:, 0]
    y = vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray) -> bool:
    """Proper crossing of open segments ab and cd (shared endpoints do not count)."""

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


@dataclass(frozen=True)
class Quad:
    """Simple quadrilateral with vertices in clockwise order."""

    vertices: tuple[Point, Point, Point, Point]

    def __post_init__(self):
        if len(self.vertices) != 4:
            raise DegenerateGeometry("quad requires exactly 4 vertices")
        arr = _ring_array(self.vertices)
        if signed_ring_area(arr) <= _AREA_EPS:
            raise DegenerateGeometry("quad must be clockwise with positive area")
        if _segments_cross(arr[0], arr[1], arr[2], arr[3]) or _segments_cross(
            arr[1], arr[2], arr[3], arr[0]
        ):
            raise DegenerateGeometry("quad is self-intersecting")

    @staticmethod
    def from_points(points: Sequence[Point | tuple[float, float]]) -> "Quad":
        pts = tuple(Point(float(p[0]), float(p[1])) for p in points)
        if len(pts) != 4:
            raise DegenerateGeometry("quad requires exactly 4 vertices")
        arr = _ring_array(pts)
        if signed_ring_area(arr) < 0:
            pts = tuple(reversed(pts))
        return Quad(pts)  # type: ignore[arg-type]

    def as_array(self) -> np.ndarray:
        return _ring_array(self.vertices)

    def centroid(self) -> Point:
        arr = self.as_array()
        return Point(float(arr[:, 0].mean()), float(arr[:, 1].mean()))

    def aabb(self) -> "Aabb":
        return Aabb.from_points(self.vertices)

    def polygon(self) -> "Polygon":
        return Polygon(self.vertices)

    def area(self) -> float:
        return signed_ring_area(self.as_array())


@dataclass(eq=False)
class Polygon:
    """Simple closed ring of at least 4 vertices with positive area."""

    vertices: tuple[Point, ...]
    _shp: _ShapelyPolygon | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = tuple(Point(float(p[0]), float(p[1])) for p in self.vertices)
        if len(self.vertices) < 4:
            raise DegenerateGeometry("polygon requires at least 4 vertices")
        arr = _ring_array(self.vertices)
        if abs(signed_ring_area(arr)) <= _AREA_EPS:
            raise DegenerateGeometry("polygon ring has no area")
        if not self.as_shapely().is_valid:
            raise DegenerateGeometry("polygon ring is self-intersecting")

    def as_array(self) -> np.ndarray:
        return _ring_array(self.vertices)

    def as_shapely(self) -> _ShapelyPolygon:
        if self._shp is None:
            self._shp = _ShapelyPolygon(self.as_array())
        return self._shp

    def aabb(self) -> "Aabb":
        return Aabb.from_points(self.vertices)


Shape = Union[Quad, Polygon]


def _to_polygon(shape: Shape) -> Polygon:
    return shape.polygon() if isinstance(shape, Quad) else shape


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box with center-point convention."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise DegenerateGeometry(f"box dims must be positive, got w={self.w} h={self.h}")

    @staticmethod
    def from_points(points: Sequence[Point | tuple[float, float]]) -> "Aabb":
        arr = np.asarray([(p[0], p[1]) for p in points], dtype=np.float64)
        x0, y0 = arr.min(axis=0)
        x1, y1 = arr.max(axis=0)
        return Aabb((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)

    def bounds(self) -> tuple[float, float, float, float]:
        return (
            self.x - self.w / 2.0,
            self.y - self.h / 2.0,
            self.x + self.w / 2.0,
            self.y + self.h / 2.0,
        )

    def iou(self, other: "Aabb") -> float:
        ax0, ay0, ax1, ay1 = self.bounds()
        bx0, by0, bx1, by1 = other.bounds()
        iw = min(ax1, bx1) - max(ax0, bx0)
        ih = min(ay1, by1) - max(ay0, by0)
        if iw <= 0 or ih <= 0:
            return 0.0
        inter = iw * ih
        union = self.w * self.h + other.w * other.h - inter
        return inter / union

    def union_box(self, other: "Aabb") -> "Aabb":
        ax0, ay0, ax1, ay1 = self.bounds()
        bx0, by0, bx1, by1 = other.bounds()
        x0, y0 = min(ax0, bx0), min(ay0, by0)
        x1, y1 = max(ax1, bx1), max(ay1, by1)
        return Aabb((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class ScoredShape:
    shape: Shape
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must lie in [0,1], got {self.score}")


def polygon_area(p: Polygon) -> float:
    """Unsigned ring area in px²."""
    arr = p.as_array()
    if len(np.unique(arr, axis=0)) < 3:
        raise DegenerateGeometry("fewer than 3 distinct vertices")
    area = abs(signed_ring_area(arr))
    if area <= _AREA_EPS:
        raise DegenerateGeometry("ring is collinear")
    return area


def polygon_iou(a: Shape, b: Shape) -> float:
    """Intersection-over-union of two simple polygons via exact clipping."""
    pa = _to_polygon(a).as_shapely()
    pb = _to_polygon(b).as_shapely()
    inter = pa.intersection(pb).area
    union = pa.area + pb.area - inter
    if union <= 0.0:
        raise DegenerateGeometry("zero union area")
    return min(max(inter / union, 0.0), 1.0)


def _greedy_nms(n: int, scores: Sequence[float], iou_fn, iou_threshold: float) -> list[int]:
    # ties broken by ascending insertion index for determinism
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    kept: list[int] = []
    suppressed = [False] * n
    for i in order:
        if suppressed[i]:
            continue
        kept.append(i)
        for j in order:
            if j != i and not suppressed[j] and iou_fn(i, j) > iou_threshold:
                suppressed[j] = True
    return kept


def nms(items: Sequence[ScoredShape], iou_threshold: float) -> list[int]:
    """Greedy suppression on axis-aligned bounding boxes; returns kept indices
    in descending-score order."""
    if not items:
        return []
    boxes = [it.shape.aabb() for it in items]
    scores = [it.score for it in items]
    return _greedy_nms(len(items), scores, lambda i, j: boxes[i].iou(boxes[j]), iou_threshold)


def polygon_nms(items: Sequence[ScoredShape], iou_threshold: float) -> list[int]:
    """Greedy suppression with exact polygon IoU as the comparator."""
    if not items:
        return []
    polys = [_to_polygon(it.shape) for it in items]
    scores = [it.score for it in items]
    return _greedy_nms(len(items), scores, lambda i, j: polygon_iou(polys[i], polys[j]), iou_threshold)


def principal_frame(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Centroid, principal axis and its normal for a point set.

    The axis is oriented from the first point toward the last so resampled
    polylines keep the input's reading direction.
    """
    center = arr.mean(axis=0)
    d = arr - center
    cov = d.T @ d
    if float(np.trace(cov)) <= _AREA_EPS:
        raise DegenerateGeometry("points are coincident")
    eigvals, eigvecs = np.linalg.eigh(cov)
    axis = eigvecs[:, int(np.argmax(eigvals))]
    span = arr[-1] - arr[0]
    if float(span @ axis) < 0:
        axis = -axis
    normal = np.array([-axis[1], axis[0]])
    return center, axis, normal


def _fit_in_frame(points: Sequence[Point], degree: int):
    arr = np.asarray([(p[0], p[1]) for p in points], dtype=np.float64)
    if len(arr) < 2:
        raise InsufficientPoints(f"side fit needs >= 2 points, got {len(arr)}")
    center, axis, normal = principal_frame(arr)
    t = (arr - center) @ axis
    v = (arr - center) @ normal
    if t.max() - t.min() <= _AREA_EPS:
        raise DegenerateGeometry("no spread along the principal axis")
    deg = min(degree, len(arr) - 1)
    vander = np.vander(t, deg + 1)
    coef, *_ = np.linalg.lstsq(vander, v, rcond=None)
    residual = float(np.sum((vander @ coef - v) ** 2))
    return center, axis, normal, t, coef, deg, residual


def fit_side(points: Sequence[Point], degree: int = 3, samples: int = 7) -> list[Point]:
    """Least-squares polynomial fit of one long side in its principal-axis frame,
    resampled at `samples` evenly spaced abscissae.

    Degree falls back to len(points)-1 when fewer points are supplied.
    """
    center, axis, normal, t, coef, deg, _ = _fit_in_frame(points, degree)
    ts = np.linspace(t.min(), t.max(), samples)
    vs = np.vander(ts, deg + 1) @ coef
    world = center + ts[:, None] * axis + vs[:, None] * normal
    return [Point(float(x), float(y)) for x, y in world]


def fit_side_residual(points: Sequence[Point], degree: int = 3) -> float:
    """Sum of squared residuals of the side fit at the input points."""
    return _fit_in_frame(points, degree)[-1]


def convex_hull(points: Sequence[Point]) -> list[Point]:
    """Andrew monotone-chain hull, counter-clockwise in y-down convention reversed
    to clockwise; used as the reconstruction fallback."""
    pts = sorted(set((float(p[0]), float(p[1])) for p in points))
    if len(pts) < 3:
        raise DegenerateGeometry("hull needs at least 3 distinct points")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    ring = lower[:-1] + upper[:-1]
    hull = [Point(x, y) for x, y in ring]
    if signed_ring_area(np.asarray(ring)) < 0:
        hull.reverse()
    if len(hull) == 3:
        # pad with an edge midpoint to honour the 4-vertex polygon floor
        mid = Point((hull[0].x + hull[1].x) / 2.0, (hull[0].y + hull[1].y) / 2.0)
        hull = [hull[0], mid, hull[1], hull[2]]
    return hull
