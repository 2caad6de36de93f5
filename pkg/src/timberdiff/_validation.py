"""Input validation helpers shared by the functional API and the estimators."""

import os

import numpy as np

from .errors import InvalidParameter, LengthMismatch


def check_points(points, name="points", allow_empty=True):
    """Return ``points`` as a C-contiguous float64 array of shape (n, 3)."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        if not allow_empty:
            raise InvalidParameter(f"{name} must not be empty")
        return np.zeros((0, 3))
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidParameter(f"{name} must have shape (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameter(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def check_parallel(values, n, name):
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape[0] != n:
        raise LengthMismatch(f"{name} has {arr.shape[0]} entries, expected {n}")
    return arr


def check_positive(value, name, strict=True):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InvalidParameter(f"{name} must be a number, got {value!r}") from None
    if not np.isfinite(v) or v < 0 or (strict and v == 0):
        bound = "> 0" if strict else ">= 0"
        raise InvalidParameter(f"{name} must be {bound}, got {value!r}")
    return v


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise InvalidParameter(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def n_workers():
    """Worker count for k-d tree queries, from ``TIMBERDIFF_THREADS`` (0 = auto)."""
    raw = os.environ.get("TIMBERDIFF_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise InvalidParameter(f"TIMBERDIFF_THREADS must be an integer, got {raw!r}") from None
    return -1 if n <= 0 else n
