"""Pyramid levels, scale binning, and region labels for label geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

CORE_SHRINK = 0.5
BORDER_EXPAND = 1.2
MIN_SCALE = 4.0


@dataclass(frozen=True)
class PyramidLevel:
    """One detection scale band: feature stride, primitive half-extent d,
    and the nominal scale range served by the band."""

    name: str
    stride: int
    d: int
    scale_min: float
    scale_max: float

    def __str__(self) -> str:
        return self.name


P2 = PyramidLevel("P2", stride=4, d=12, scale_min=4.0, scale_max=23.0)
P3 = PyramidLevel("P3", stride=8, d=24, scale_min=24.0, scale_max=48.0)
P4 = PyramidLevel("P4", stride=16, d=81, scale_min=49.0, scale_max=math.inf)

LEVELS = (P2, P3, P4)
LEVEL_BY_NAME = {lvl.name: lvl for lvl in LEVELS}


def assign_level(scale: float) -> PyramidLevel | None:
    """Map an instance scale (shorter-side length, px) to its pyramid level.

    Total and monotone: scales below MIN_SCALE are ignored (None); the gap
    between the nominal small/medium bins goes to the small band so that the
    boundary pairs 23/24 and 48/49 land on distinct levels.
    """
    if scale < MIN_SCALE:
        return None
    if scale < P3.scale_min:
        return P2
    if scale <= P3.scale_max:
        return P3
    return P4


class RegionLabel(Enum):
    TEXT = "text"
    BORDER = "border"
    NON_TEXT = "non-text"
    IGNORE = "ignore"
