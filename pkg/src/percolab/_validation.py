"""Input validation helpers in the spirit of sklearn.utils.validation."""

from numbers import Integral, Real

import numpy as np


def check_probability(p, name="p"):
    if isinstance(p, bool) or not isinstance(p, Real):
        raise TypeError(f"{name} must be a real number, got {type(p).__name__}")
    if not 0.0 <= float(p) <= 1.0 or np.isnan(float(p)):
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive(value, name):
    if not isinstance(value, Real) or not float(value) > 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    return float(value)


def check_1d(values, name="values", min_size=1):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_size:
        raise ValueError(f"{name} needs at least {min_size} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def probability_bits(p):
    """Split p into the (p_bits, mode) pair consumed by the bond kernels."""
    from . import _kernels as K

    p = float(p)
    if p <= 0.0:
        return np.uint64(0), K.MODE_CLOSED
    if p >= 1.0:
        return np.uint64(0), K.MODE_OPEN
    return np.uint64(int(p * 2.0**K.PROB_BITS)), K.MODE_MIXED
