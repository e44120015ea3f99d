"""Input validation helpers used at every public API boundary.

The package-wide matrix carrier is a C-contiguous 2-D float64 ndarray
with finite entries; these helpers coerce and check inputs once at the
boundary so numerical code can assume clean arrays.
"""

from __future__ import annotations

import numpy as np

from .exceptions import NotFittedError


def as_matrix(X, name: str = "X", *, min_rows: int = 0) -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D array with finite entries."""
    A = np.ascontiguousarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={A.ndim}")
    if A.shape[0] < min_rows:
        raise ValueError(f"{name} needs at least {min_rows} rows, got {A.shape[0]}")
    if A.size and not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite values")
    return A


def as_labels(y, name: str = "y", *, n_rows: int | None = None) -> np.ndarray:
    """Coerce to a 1-D int64 label vector, optionally matching a row count."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got ndim={arr.ndim}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        # accept float labels only when they are exact integers
        if not np.issubdtype(arr.dtype, np.floating) or not np.all(arr == np.floor(arr)):
            raise ValueError(f"{name} must contain integer class labels")
    out = arr.astype(np.int64)
    if n_rows is not None and out.shape[0] != n_rows:
        raise ValueError(f"{name} has {out.shape[0]} entries for {n_rows} rows")
    return out


def check_n_features(X: np.ndarray, n_features: int, name: str = "X") -> None:
    if X.shape[1] != n_features:
        raise ValueError(
            f"{name} has {X.shape[1]} features, the model was fit with {n_features}"
        )


def check_fitted(estimator, attributes) -> None:
    """Raise NotFittedError unless every named fitted attribute is present."""
    if isinstance(attributes, str):
        attributes = [attributes]
    missing = [a for a in attributes if getattr(estimator, a, None) is None]
    if missing:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first "
            f"(missing {', '.join(missing)})"
        )
