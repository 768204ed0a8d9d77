"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def require(condition: bool, message: str):
    """Raise ``ValueError`` with ``message`` unless ``condition`` holds."""
    if not condition:
        raise ValueError(message)


def as_count_array(values) -> np.ndarray:
    """Coerce to a 1-d array of non-negative int64 counts."""
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError("counts must be a 1-d sequence")
    if arr.dtype.kind == "f":
        if not np.all(arr == np.floor(arr)):
            raise ValueError("counts must be integers")
        arr = arr.astype(np.int64)
    elif arr.dtype.kind in "iu":
        arr = arr.astype(np.int64)
    else:
        raise ValueError("counts must be numeric")
    if arr.size and arr.min() < 0:
        raise ValueError("counts must be non-negative")
    return arr


def as_grayscale(image) -> np.ndarray:
    """Coerce to a 2-d uint8 grayscale image, at least 8x8 pixels."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError("image must be a 2-d array")
    if arr.shape[0] < 8 or arr.shape[1] < 8:
        raise ValueError("image must be at least 8x8 pixels")
    if arr.dtype != np.uint8:
        if arr.dtype.kind == "f":
            arr = np.clip(np.rint(arr), 0, 255)
        arr = arr.astype(np.uint8)
    return arr


def round_half_up(values):
    """Round to nearest integer, halves away from zero toward +inf."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5).astype(
        np.int64
    )
