"""textgraph: text-line grouping via KNN primitive graphs and GCN link
prediction, with a synthetic scene generator and detector simulator for a
fully reproducible train/infer/evaluate cycle."""

from .errors import (
    DegenerateGeometry,
    EmptyBatch,
    InputMismatch,
    InsufficientPoints,
    InvalidArchitecture,
    PlacementFailure,
    ShapeError,
    TextGraphError,
)
from .geom import Aabb, Point, Polygon, Quad, ScoredShape, fit_side, nms, polygon_area, polygon_iou, polygon_nms
from .graph import (
    DirectedEdge,
    EdgeLabel,
    Primitive,
    PrimitiveGraph,
    build_graph,
    build_training_graph,
    connected_components,
)
from .levels import LEVELS, P2, P3, P4, PyramidLevel, RegionLabel, assign_level
from .synth import (
    GtPrimitive,
    NoiseConfig,
    Scene,
    SynthConfig,
    TextInstance,
    core_border_regions,
    generate_scene,
    gt_primitive,
    instance_scale,
    label_point,
    simulate_detector,
)

__version__ = "0.1.0"
