"""Clamped B-spline bases on [0, 1] and the constant-first reparametrization.

The raw basis ``(B_1(u), ..., B_q(u))`` is evaluated with the Cox-de Boor
recursion. The transformed basis replaces ``B_1`` by the constant function 1
(the sum of all raw functions), so a coefficient block splits into a constant
part and a varying part.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InvalidKnotsError(ValueError):
    """Interior knots are unsorted, duplicated or outside (0, 1)."""


class DomainError(ValueError):
    """An index value lies outside [0, 1]."""


@dataclass(frozen=True)
class SplineBasis:
    """Clamped B-spline basis of a given degree on [0, 1].

    Attributes
    ----------
    degree : int
        Polynomial degree ``d``.
    interior_knots : tuple of float
        Strictly increasing knots inside (0, 1).
    """

    degree: int
    interior_knots: tuple[float, ...] = ()
    knots: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise ValueError(f"degree must be a nonnegative integer, got {self.degree!r}")
        inner = tuple(float(k) for k in self.interior_knots)
        arr = np.asarray(inner, dtype=float)
        if arr.size:
            if not np.all(np.isfinite(arr)) or arr.min() <= 0.0 or arr.max() >= 1.0:
                raise InvalidKnotsError(f"interior knots must lie strictly inside (0, 1): {inner}")
            if np.any(np.diff(arr) <= 0.0):
                raise InvalidKnotsError(f"interior knots must be strictly increasing: {inner}")
        d = int(self.degree)
        full = np.concatenate([np.zeros(d + 1), arr, np.ones(d + 1)])
        full.setflags(write=False)
        object.__setattr__(self, "degree", d)
        object.__setattr__(self, "interior_knots", inner)
        object.__setattr__(self, "knots", full)

    @property
    def n_interior(self) -> int:
        return len(self.interior_knots)

    @property
    def q(self) -> int:
        """Number of basis functions, ``k_n + d + 1``."""
        return self.n_interior + self.degree + 1


def build_basis(degree: int, interior_knots=()) -> SplineBasis:
    """Build a clamped basis; raises :class:`InvalidKnotsError` on bad knots."""
    return SplineBasis(degree, tuple(interior_knots))


def _check_domain(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(u)) or np.any(u < 0.0) or np.any(u > 1.0):
        raise DomainError("index values must lie in [0, 1]")
    return u


def eval_raw(basis: SplineBasis, u) -> np.ndarray:
    """Evaluate the raw B-spline basis at ``u``.

    Parameters
    ----------
    basis : SplineBasis
    u : float or array_like
        Points in [0, 1].

    Returns
    -------
    ndarray
        Shape ``(q,)`` for scalar ``u``, else ``(len(u), q)``.
    """
    u = _check_domain(u)
    scalar = u.ndim == 0
    x = np.atleast_1d(u).ravel()
    t = basis.knots
    d = basis.degree
    m = len(t) - 1  # number of degree-0 spans

    # degree 0: half-open spans, u == 1 goes to the last nonempty span
    span = np.searchsorted(t, x, side="right") - 1
    last = m - d - 1
    span = np.minimum(span, last)
    vals = np.zeros((x.size, m))
    vals[np.arange(x.size), span] = 1.0

    for k in range(1, d + 1):
        nxt = np.zeros((x.size, m - k))
        for i in range(m - k):
            left_den = t[i + k] - t[i]
            right_den = t[i + k + 1] - t[i + 1]
            acc = 0.0
            if left_den > 0.0:
                acc = (x - t[i]) / left_den * vals[:, i]
            if right_den > 0.0:
                acc = acc + (t[i + k + 1] - x) / right_den * vals[:, i + 1]
            nxt[:, i] = acc
        vals = nxt
    return vals[0] if scalar else vals


def eval_transformed(basis: SplineBasis, u) -> np.ndarray:
    """Evaluate ``(1, B_2(u), ..., B_q(u))``, the constant-first basis."""
    out = np.array(eval_raw(basis, u), copy=True)
    out[..., 0] = 1.0
    return out


def transform_matrix(q: int) -> np.ndarray:
    """Matrix ``G`` with ``G @ raw = transformed``: first row all ones."""
    G = np.eye(q)
    G[0, :] = 1.0
    return G


def quantile_knots(u, k: int) -> tuple[float, ...]:
    """Interior knots at the ``j/(k+1)`` sample quantiles of ``u``.

    Duplicate or boundary quantiles (heavily tied data) are dropped.
    """
    if k < 0:
        raise ValueError("knot count must be nonnegative")
    if k == 0:
        return ()
    probs = np.arange(1, k + 1) / (k + 1)
    qs = np.quantile(np.asarray(u, dtype=float), probs)
    qs = qs[(qs > 0.0) & (qs < 1.0)]
    return tuple(np.unique(qs))
