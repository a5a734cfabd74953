from enum import StrEnum


class FunctionClass(StrEnum):
    """Synthetic target families, ordered by growing complexity."""

    LINEAR = "L"
    POLYNOMIAL = "P"
    HIGHLY_NONLINEAR = "H"
    DISCONTINUOUS = "D"
