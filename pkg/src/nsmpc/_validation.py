"""Small input checking helpers in the spirit of ``sklearn.utils.validation``."""
import numbers

import numpy as np

from .exceptions import ConfigError, DimensionError


def check_vector(v, size=None, name="array"):
    """Return ``v`` as a 1-D float64 array, optionally checking its length."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if size is not None and arr.shape[0] != size:
        raise DimensionError(f"{name} must have length {size}, got {arr.shape[0]}")
    return arr


def check_matrix(a, shape=None, name="matrix"):
    arr = np.atleast_2d(np.asarray(a, dtype=float))
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    return arr


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ConfigError(f"{name} must be a finite real number, got {value!r}", field=name)
    if strict and value <= 0:
        raise ConfigError(f"{name} must be > 0, got {value!r}", field=name)
    if not strict and value < 0:
        raise ConfigError(f"{name} must be >= 0, got {value!r}", field=name)
    return float(value)


def check_int(value, name, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}", field=name)
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value!r}", field=name)
    return int(value)
