"""Small input-validation helpers shared by the estimators and functions."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .exceptions import DimensionMismatch, NegativeEpsilon, NegativeInput, NonFiniteInput


def as_matrix(X, name: str = "X") -> np.ndarray:
    """2-d float64 array with finite entries and at least one row and column."""
    try:
        return check_array(X, dtype=np.float64, ensure_all_finite=True, ensure_min_samples=1,
                           ensure_min_features=1, copy=False)
    except ValueError as exc:
        if "NaN" in str(exc) or "infinity" in str(exc):
            raise NonFiniteInput(f"{name}: {exc}") from exc
        raise DimensionMismatch(f"{name}: {exc}") from exc


def as_vector(x, dim: int | None = None, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-d, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"{name} has dimension {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput(f"{name} contains non-finite values")
    return v


def check_nonneg(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise NegativeInput(f"{name} must be finite and >= 0, got {value}")
    return value


def check_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not np.isfinite(epsilon) or epsilon < 0:
        raise NegativeEpsilon(f"epsilon must be finite and >= 0, got {epsilon}")
    return epsilon
