"""Exception types shared across the package."""


class TextGraphError(Exception):
    """Base class for all library errors."""


class DegenerateGeometry(TextGraphError):
    """Geometry input has no usable extent (collinear ring, zero area, bad box)."""


class InsufficientPoints(TextGraphError):
    """Too few points for the requested fit."""


class PlacementFailure(TextGraphError):
    """Scene generator could not place the requested instances within its retry budget."""


class InvalidArchitecture(TextGraphError):
    """MLP layer dimensions are empty or inconsistent."""


class ShapeError(TextGraphError):
    """Array shapes do not match the operation's contract."""


class EmptyBatch(TextGraphError):
    """No trainable edges available for a step."""


class InputMismatch(TextGraphError):
    """Paired input files disagree (e.g. scene ids in detections vs. ground truth)."""
