"""Gaussian kernel ``K_h(t) = phi(t/h)/h`` and its first two derivatives in ``t``."""

from __future__ import annotations

import numpy as np

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _check(h):
    if not h > 0.0:
        raise ValueError(f"bandwidth must be positive, got {h}")


def kernel(h: float, t):
    _check(h)
    z = np.asarray(t, dtype=float) / h
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z) / h


def kernel_d1(h: float, t):
    _check(h)
    z = np.asarray(t, dtype=float) / h
    return -z * _INV_SQRT_2PI * np.exp(-0.5 * z * z) / h**2


def kernel_d2(h: float, t):
    _check(h)
    z = np.asarray(t, dtype=float) / h
    return (z * z - 1.0) * _INV_SQRT_2PI * np.exp(-0.5 * z * z) / h**3


def log_kernel(h: float, t):
    """``log K_h(t)`` computed without underflow."""
    _check(h)
    z = np.asarray(t, dtype=float) / h
    return -0.5 * z * z - np.log(h) + np.log(_INV_SQRT_2PI)
