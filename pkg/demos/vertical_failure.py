"""
Why compatibility is only asked of the horizontal part
======================================================

The analogous vertical condition, built from y-derivatives, is not
preserved by a change of gauge: the defect is -2 (df/dx^i) gbar_jk, which
vanishes only for constant f.
"""

import numpy as np

from glweyl import GLMetric, PointTM, ScalarField
from glweyl.connection import vertical_weyl_defect
from glweyl.metric import conformal_scale

g = GLMetric.parse([["1 + y1^2", "0"], ["0", "1 + y2^2"]])
w = [ScalarField.constant(0.0)] * 2
p = PointTM((0.25, -0.5), (0.3, 0.7))

for text in ("0", "x1", "x1*x2"):
    f = ScalarField.parse(text, 2)
    D = vertical_weyl_defect(g, f, w, p)
    df = np.array([f.derivative("x", i)(p) for i in range(2)])
    closed = -2.0 * np.einsum("jk,i->jki", conformal_scale(g, f).at(p), df)
    print(f"f = {text:6s} max|D| = {np.max(np.abs(D)):.4f}   "
          f"gap to closed form = {np.max(np.abs(D - closed)):.1e}")
