"""Input validation helpers shared across the package.

All numeric inputs are converted to float64 ndarrays up front so the rest of
the code can assume finite, correctly shaped data.
"""

from __future__ import annotations

import numpy as np

Array = np.ndarray


def as_matrix(a, name: str = "matrix") -> Array:
    """Coerce to a 2-D float64 array and reject empty or non-finite input."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size == 0:
        raise ValueError(f"{name} is empty (shape {m.shape})")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def as_vector(a, name: str = "vector", length: int | None = None) -> Array:
    """Coerce to a 1-D float64 array, optionally enforcing a length."""
    v = np.asarray(a, dtype=np.float64).reshape(-1)
    if length is not None and v.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def require(condition: bool, message: str) -> None:
    """Raise ValueError with `message` unless `condition` holds."""
    if not condition:
        raise ValueError(message)
