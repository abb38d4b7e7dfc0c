"""Argument checks shared by the estimators and the functional API."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not alpha > 2:
        raise ValueError(f"path-loss exponent must exceed 2, got {alpha!r}")
    return alpha


def check_radii(r, upper: float | None = None):
    """Normalized radii: non-negative, optionally capped."""
    arr = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(arr)):
        raise ValueError("radii must be finite")
    if np.any(arr < 0):
        raise ValueError("normalized radius must be non-negative")
    if upper is not None and np.any(arr > upper + 1e-12):
        raise ValueError(f"normalized radius must not exceed {upper}")
    return arr


def check_points(X) -> np.ndarray:
    """2-D coordinates as a float array of shape (n, 2)."""
    X = check_array(np.atleast_2d(np.asarray(X, dtype=float)), ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected points of shape (n, 2), got {X.shape}")
    return X


def check_fraction(x, name: str, *, open_interval: bool = False) -> float:
    x = float(x)
    ok = 0.0 < x < 1.0 if open_interval else 0.0 <= x <= 1.0
    if not ok:
        interval = "(0, 1)" if open_interval else "[0, 1]"
        raise ValueError(f"{name} must lie in {interval}, got {x!r}")
    return x


def check_positive(x, name: str) -> float:
    x = float(x)
    if not x > 0:
        raise ValueError(f"{name} must be positive, got {x!r}")
    return x
