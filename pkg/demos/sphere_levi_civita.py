"""
The round sphere: Weyl connection with w = 0
============================================

On a Riemannian metric, read as a metric on the tangent bundle that does
not depend on y, the canonical nonlinear connection N^i_j = Gamma^i_jk y^k
makes the compatible connection with w = 0 collapse to Levi-Civita.
"""

import math

import numpy as np

from glweyl import GLMetric, PointTM, ScalarField, canonical_N, levi_civita, weyl_connection

# polar angle x1, azimuth x2
g = GLMetric.parse([["1", "0"], ["0", "sin(x1)^2"]])
N = canonical_N(g)
w = [ScalarField.constant(0.0)] * 2
conn = weyl_connection(g, N, w)

p = PointTM((math.pi / 4, 0.3), (0.2, -1.0))
F = conn.F(p)
print("F^1_22 at x1 = pi/4:", F[0, 1, 1])            # -sin cos = -0.5
print("F^2_12 at x1 = pi/4:", F[1, 0, 1])            # cot = 1
print("max |F - Gamma|    :", np.max(np.abs(F - levi_civita(g, p))))

# the coefficients do not move along the fibre
q = PointTM(p.x, (5.0, 3.0))
print("y-dependence       :", np.max(np.abs(conn.F(q) - F)))
