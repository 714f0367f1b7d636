"""Static SVG overlays: ground truth in red, detections in green, primitives
as thin outlines, link decisions as line segments."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import quoteattr

from .graph import Primitive
from .pipeline import DetectionResult, LinkDecision
from .synth import Scene


def _points_attr(pts) -> str:
    return " ".join(f"{float(p[0])!r},{float(p[1])!r}" for p in pts)


def _polygon(pts, stroke: str, width: float) -> str:
    return (
        f'<polygon points={quoteattr(_points_attr(pts))} fill="none" '
        f'stroke="{stroke}" stroke-width="{width!r}"/>'
    )


def render_svg(
    scene: Scene,
    detections: Sequence[DetectionResult] | None = None,
    primitives: Sequence[Primitive] | None = None,
    links: Sequence[LinkDecision] | None = None,
) -> str:
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{scene.width}" '
        f'height="{scene.height}" viewBox="0 0 {scene.width} {scene.height}">',
        f'<rect width="{scene.width}" height="{scene.height}" fill="white"/>',
    ]
    for inst in scene.instances:
        ring = list(inst.upper_anchors) + list(reversed(inst.lower_anchors))
        parts.append(_polygon(ring, "red", 1.5))
    if primitives:
        for p in primitives:
            parts.append(_polygon(p.quad.vertices, "#888888", 0.5))
    if links and primitives:
        by_id = {p.id: p for p in primitives}
        for d in links:
            if not d.linked or d.i not in by_id or d.j not in by_id:
                continue
            a, b = by_id[d.i].center, by_id[d.j].center
            parts.append(
                f'<line x1="{a.x!r}" y1="{a.y!r}" x2="{b.x!r}" y2="{b.y!r}" '
                f'stroke="#6699ff" stroke-width="0.5"/>'
            )
    if detections:
        for det in detections:
            parts.append(_polygon(det.polygon.vertices, "green", 1.5))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path: str, svg: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
