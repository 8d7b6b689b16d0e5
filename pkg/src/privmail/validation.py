"""Input validation helpers shared by the functional API and the estimators."""

import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import DimensionMismatch, ValidationError


def check_matrix(m, name="matrix", min_rows=1):
    """Return ``m`` as a finite 2-D float64 array.

    Wraps :func:`sklearn.utils.check_array` so the error type is ours; NaN/Inf
    and ragged inputs become :class:`ValidationError`.
    """
    try:
        return check_array(
            m,
            dtype=np.float64,
            ensure_all_finite=True,
            ensure_min_samples=min_rows,
            input_name=name,
        )
    except ValueError as exc:
        raise ValidationError(f"{name}: {exc}") from exc


def check_labels(labels, n_rows=None):
    """Return integer class labels as a 1-D int64 array.

    Labels must be nonnegative integers; floats are accepted when integral.
    """
    arr = np.asarray(labels)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValidationError(f"labels must be 1-D, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.issubdtype(arr.dtype, np.floating) or not np.all(np.isfinite(arr)):
            raise ValidationError("labels must be integers")
        if np.any(arr != np.round(arr)):
            raise ValidationError("labels must be integral")
    arr = arr.astype(np.int64)
    if arr.size and arr.min() < 0:
        raise ValidationError("labels must be nonnegative")
    if n_rows is not None and arr.shape[0] != n_rows:
        raise DimensionMismatch(f"{arr.shape[0]} labels for {n_rows} rows")
    return arr


def check_square(lap, n=None, name="laplacian"):
    lap = np.asarray(lap, dtype=float)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {lap.shape}")
    if n is not None and lap.shape[0] != n:
        raise DimensionMismatch(f"{name} is {lap.shape[0]}x{lap.shape[0]}, expected {n}x{n}")
    return lap


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValidationError(f"{name} must be a finite real, got {value!r}")
    if strict and value <= 0:
        raise ValidationError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ValidationError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValidationError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
