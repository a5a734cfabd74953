from enum import StrEnum


class DataAxis(StrEnum):
    """Axes of the per-sample data-complexity score."""

    SPACE = "x"
    TIME = "y"
    SCALE = "z"
    MODALITY = "m"
    CURVATURE = "n"
