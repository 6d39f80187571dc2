"""Small input-validation helpers shared across subpackages."""

from __future__ import annotations

import numbers

import numpy as np


class InvalidParameterError(ValueError):
    """A numeric parameter is outside its allowed range."""


class InvalidShapeError(ValueError):
    """An array does not have the shape an operation requires."""


def check_positive(value, name: str, *, allow_zero: bool = False) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise InvalidParameterError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise InvalidParameterError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_fraction(value, name: str) -> float:
    value = check_positive(value, name, allow_zero=True)
    if value > 1.0:
        raise InvalidParameterError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def as_1d_float(values, name: str, *, allow_empty: bool = False) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidShapeError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise InvalidShapeError(f"{name} must be non-empty")
    return arr


def as_points(values, name: str) -> np.ndarray:
    """Coerce to an (n, 3) float array; a single 3-vector becomes (1, 3)."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidShapeError(f"{name} must have shape (n, 3), got {arr.shape}")
    return arr


class NumericalFailureError(RuntimeError):
    """A linear solve or iteration broke down numerically."""
