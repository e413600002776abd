"""Input validation helpers shared by the library and the estimator API."""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError


def check_finite(arr: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return arr


def check_points(x, name: str = "points", min_points: int = 1) -> np.ndarray:
    """Coerce to a float64 (n, 3) array of finite coordinates."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1 and arr.shape == (3,):
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidArgumentError(f"{name} must have shape (n, 3), got {arr.shape}")
    if arr.shape[0] < min_points:
        raise InvalidArgumentError(
            f"{name} needs at least {min_points} points, got {arr.shape[0]}"
        )
    return check_finite(arr, name)


def check_vector(x, n: int, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.shape != (n,):
        raise InvalidArgumentError(f"{name} must have {n} entries, got {arr.shape}")
    return check_finite(arr, name)


def check_labels(y, n_points: int, n_classes: int, name: str = "labels") -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1 or arr.shape[0] != n_points:
        raise InvalidArgumentError(
            f"{name} must be 1-d with {n_points} entries, got shape {arr.shape}"
        )
    if not np.issubdtype(arr.dtype, np.integer):
        raise InvalidArgumentError(f"{name} must be integer-valued")
    if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
        raise InvalidArgumentError(f"{name} values must lie in [0, {n_classes - 1}]")
    return arr.astype(np.uint8)


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise InvalidArgumentError(f"{name} must be positive, got {value}")
    return value


def check_probability(value: float, name: str, inclusive_top: bool = False) -> float:
    value = float(value)
    top_ok = value <= 1.0 if inclusive_top else value < 1.0
    if not (0.0 <= value and top_ok):
        bound = "[0, 1]" if inclusive_top else "[0, 1)"
        raise InvalidArgumentError(f"{name} must lie in {bound}, got {value}")
    return value
