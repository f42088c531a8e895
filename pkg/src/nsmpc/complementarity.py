"""Complementarity (NCP) functions for the inequality rows."""
import enum
import math

import numpy as np

from .exceptions import DimensionError

_ORIGIN_PARTIAL = 1.0 - 1.0 / math.sqrt(2.0)


class NcpFunction(enum.Enum):
    FISCHER_BURMEISTER = "fischer_burmeister"


def ncp_eval(a, b):
    """Fischer-Burmeister function ``a + b - sqrt(a^2 + b^2)``."""
    return a + b - math.hypot(a, b)


def ncp_partials(a, b):
    """Partial derivatives of :func:`ncp_eval`; ``(1 - 1/sqrt2, 1 - 1/sqrt2)`` at the origin."""
    r = math.hypot(a, b)
    if r == 0.0:
        return _ORIGIN_PARTIAL, _ORIGIN_PARTIAL
    return 1.0 - a / r, 1.0 - b / r


def psi(g_neg, mu):
    """Elementwise Fischer-Burmeister over paired entries. Pass ``-g(u)`` first."""
    a = np.asarray(g_neg, dtype=float).ravel()
    b = np.asarray(mu, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"psi arguments differ in length: {a.size} vs {b.size}")
    return a + b - np.hypot(a, b)


def psi_partials(g_neg, mu):
    """Vectorized :func:`ncp_partials`; returns two arrays."""
    a = np.asarray(g_neg, dtype=float).ravel()
    b = np.asarray(mu, dtype=float).ravel()
    r = np.hypot(a, b)
    safe = np.where(r > 0.0, r, 1.0)
    da = np.where(r > 0.0, 1.0 - a / safe, _ORIGIN_PARTIAL)
    db = np.where(r > 0.0, 1.0 - b / safe, _ORIGIN_PARTIAL)
    return da, db
