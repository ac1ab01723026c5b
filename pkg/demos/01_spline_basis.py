"""
Clamped B-splines and the constant-first basis
==============================================

Every coefficient function is expanded in a cubic B-spline basis. The
estimator works with a transformed basis whose first function is the
constant 1, so "is this effect constant?" becomes "is the rest of the
block zero?".
"""

# %%
import numpy as np

from modevcm import build_basis, eval_raw, eval_transformed

basis = build_basis(3, [0.25, 0.5, 0.75])
print("q =", basis.q)
print("full knot vector:", basis.knots)

# %%
# The raw functions sum to one everywhere on [0, 1] and at most d + 1 of
# them are active at any point.
grid = np.linspace(0, 1, 1001)
B = eval_raw(basis, grid)
print("max |sum - 1|:", np.abs(B.sum(axis=1) - 1).max())
print("max active functions:", (B > 0).sum(axis=1).max())

# %%
# The transformed basis replaces the first function by their sum. A constant
# curve therefore has coefficients (c, 0, ..., 0).
T = eval_transformed(basis, grid)
coef, *_ = np.linalg.lstsq(T, np.full(grid.size, 2.5), rcond=None)
print("coefficients of the constant 2.5:", np.round(coef, 12))

# %%
# Any smooth curve is still representable: fit sin(2 pi u) both ways.
target = np.sin(2 * np.pi * grid)
for name, M in (("raw", B), ("transformed", T)):
    c, *_ = np.linalg.lstsq(M, target, rcond=None)
    print(f"{name:>12}: max error {np.abs(M @ c - target).max():.2e}")
