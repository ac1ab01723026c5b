"""SCAD penalty, its derivative and the LQA majorizer weight."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScadParams:
    lam: float
    a: float = 3.7

    def __post_init__(self):
        if not self.lam >= 0.0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if not self.a > 2.0:
            raise ValueError(f"SCAD shape a must exceed 2, got {self.a}")


def scad(params: ScadParams, theta):
    """SCAD penalty ``p_{lambda,a}(theta)`` for ``theta >= 0``."""
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0.0):
        raise ValueError("SCAD penalty is defined for nonnegative arguments")
    lam, a = params.lam, params.a
    mid = (a * lam * th - 0.5 * (th**2 + lam**2)) / (a - 1.0)
    flat = lam**2 * (a**2 - 1.0) / (2.0 * (a - 1.0))
    out = np.where(th <= lam, lam * th, np.where(th <= a * lam, mid, flat))
    return out[()] if out.ndim == 0 else out


def scad_derivative(params: ScadParams, theta):
    """Derivative of the SCAD penalty for ``theta > 0``."""
    th = np.asarray(theta, dtype=float)
    if np.any(th <= 0.0):
        raise ValueError("SCAD derivative requires positive arguments")
    lam, a = params.lam, params.a
    out = np.where(th <= lam, lam, np.maximum(a * lam - th, 0.0) / (a - 1.0))
    return out[()] if out.ndim == 0 else out


def lqa_weight(params: ScadParams, theta0):
    """Curvature ``p'(theta0) / theta0`` of the local quadratic majorizer."""
    th = np.asarray(theta0, dtype=float)
    if np.any(th <= 0.0):
        raise ValueError("LQA weight requires positive arguments")
    return scad_derivative(params, th) / th
