"""
SCAD penalty, its quadratic majorizer and the Gaussian kernel
=============================================================

The penalized EM algorithm replaces SCAD by a local quadratic upper bound
at the current estimate. The modal loss enters through Gaussian kernel
values of the residuals.
"""

# %%
import numpy as np

from modevcm.kernel import kernel, kernel_d1, kernel_d2
from modevcm.scad import ScadParams, lqa_weight, scad, scad_derivative

par = ScadParams(lam=1.0, a=3.7)
theta = np.array([0.5, 1.0, 2.0, 3.7, 5.0])
print("penalty   :", np.round(scad(par, theta), 4))
print("derivative:", np.round(scad_derivative(par, theta), 4))

# %%
# Small coefficients are pushed like the lasso, large ones are left alone.
# The quadratic majorizer touches SCAD at theta0 and lies above it elsewhere.
theta0 = 2.0
grid = np.linspace(0, 6, 13)
upper = scad(par, theta0) + 0.5 * lqa_weight(par, theta0) * (grid**2 - theta0**2)
print("majorizer - scad >= 0:", bool(np.all(upper - scad(par, grid) >= -1e-12)))

# %%
# Kernel and derivatives. The bandwidth selector uses the last two.
h = 0.5
t = np.array([-1.0, 0.0, 0.5, 1.0])
for f in (kernel, kernel_d1, kernel_d2):
    print(f"{f.__name__:>9}:", np.round(f(h, t), 5))
