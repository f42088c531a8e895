"""Proximal operators, subgradient membership and prox derivatives.

Three regularizer kinds are supported: the zero function, a scaled l1 norm
``w * ||u||_1`` and a user supplied ``Custom`` regularizer defined through
callbacks.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._validation import check_vector
from .exceptions import CapabilityError, DimensionError

TOL_SUB = 1e-9


def soft_threshold(v, threshold):
    """Elementwise ``sign(v) * max(|v| - threshold, 0)``."""
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    v = check_vector(v, name="v")
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


class Regularizer:
    """Base class. Instances are immutable and cheap to share."""

    def value(self, x):
        raise CapabilityError(f"{type(self).__name__} does not expose its value")

    def prox(self, v, gamma):
        raise NotImplementedError

    def contains_subgradient(self, x, g, tol=TOL_SUB):
        raise NotImplementedError

    def prox_derivative(self, v, gamma):
        raise NotImplementedError


@dataclass(frozen=True)
class Zero(Regularizer):
    def value(self, x):
        return 0.0

    def prox(self, v, gamma):
        return np.array(v, dtype=float)

    def contains_subgradient(self, x, g, tol=TOL_SUB):
        return bool(np.all(np.abs(g) <= tol))

    def prox_derivative(self, v, gamma):
        return np.ones_like(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class ScaledL1(Regularizer):
    """``weight * ||x||_1``."""

    weight: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.weight) or self.weight <= 0:
            raise ValueError(f"ScaledL1 weight must be positive, got {self.weight}")

    def value(self, x):
        return self.weight * float(np.sum(np.abs(x)))

    def prox(self, v, gamma):
        return soft_threshold(v, gamma * self.weight)

    def contains_subgradient(self, x, g, tol=TOL_SUB):
        x = np.asarray(x, dtype=float)
        g = np.asarray(g, dtype=float)
        w = self.weight
        nz = x != 0
        ok_nz = np.abs(g[nz] - w * np.sign(x[nz])) <= tol
        ok_z = np.abs(g[~nz]) <= w + tol
        return bool(np.all(ok_nz) and np.all(ok_z))

    def prox_derivative(self, v, gamma):
        # flat branch at the kink |v_i| == gamma * w
        v = np.asarray(v, dtype=float)
        return (np.abs(v) > gamma * self.weight).astype(float)


@dataclass(frozen=True)
class Custom(Regularizer):
    """Regularizer given by callbacks.

    ``prox_fn(v, gamma)`` is mandatory. ``subgradient_fn(x, g) -> bool`` and
    ``derivative_fn(v, gamma) -> diag`` are optional; operations that need a
    missing callback raise :class:`CapabilityError`.
    """

    prox_fn: Callable
    subgradient_fn: Optional[Callable] = None
    derivative_fn: Optional[Callable] = None
    value_fn: Optional[Callable] = None

    def value(self, x):
        if self.value_fn is None:
            return super().value(x)
        return float(self.value_fn(x))

    def prox(self, v, gamma):
        return np.asarray(self.prox_fn(v, gamma), dtype=float)

    def contains_subgradient(self, x, g, tol=TOL_SUB):
        if self.subgradient_fn is None:
            raise CapabilityError("Custom regularizer has no subgradient membership callback")
        return bool(self.subgradient_fn(x, g))

    def prox_derivative(self, v, gamma):
        if self.derivative_fn is None:
            raise CapabilityError("Custom regularizer has no prox derivative callback")
        return np.asarray(self.derivative_fn(v, gamma), dtype=float)


def _check_gamma(gamma):
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")


def prox_eval(reg, v, gamma):
    """Minimizer of ``reg(x) + ||x - v||^2 / (2 gamma)``."""
    _check_gamma(gamma)
    v = check_vector(v, name="v")
    out = reg.prox(v, gamma)
    if out.shape != v.shape:
        raise DimensionError(f"prox returned shape {out.shape}, expected {v.shape}")
    return out


def subgradient_contains(reg, x, g, tol=TOL_SUB):
    """True iff ``g`` lies in the subdifferential of ``reg`` at ``x`` (within ``tol``)."""
    x = check_vector(x, name="x")
    g = check_vector(g, size=x.shape[0], name="g")
    return reg.contains_subgradient(x, g, tol=tol)


def prox_generalized_jacobian(reg, v, gamma):
    """Diagonal of a selected element of the generalized Jacobian of the prox map at ``v``."""
    _check_gamma(gamma)
    v = check_vector(v, name="v")
    return reg.prox_derivative(v, gamma)
