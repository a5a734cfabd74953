"""Numpy-backed field types for the pydantic models.

Arrays are copied to float64 on validation and marked read-only, so a model
built from caller data never aliases it. They serialise as nested lists.
"""

from typing import Annotated, Any

import numpy as np
from pydantic import BeforeValidator, PlainSerializer


def _readonly(value: Any, dtype) -> np.ndarray:
    try:
        arr = np.array(value, dtype=dtype)
    except TypeError as e:
        raise ValueError(f"not a numeric array: {e}") from e
    arr.setflags(write=False)
    return arr


def _readonly_float(value: Any) -> np.ndarray:
    return _readonly(value, float)


def _readonly_int(value: Any) -> np.ndarray:
    return _readonly(value, np.int64)


def _as_list(arr: np.ndarray) -> list:
    return arr.tolist()


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_readonly_float),
    PlainSerializer(_as_list, return_type=list),
]
IntArray = Annotated[
    np.ndarray,
    BeforeValidator(_readonly_int),
    PlainSerializer(_as_list, return_type=list),
]


def require_ndim(arr: np.ndarray, ndim: int, name: str) -> None:
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")


def require_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
