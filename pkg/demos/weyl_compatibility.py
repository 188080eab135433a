"""
Compatibility and the conformal gauge
=====================================

Build the compatible connection once from an anchor pair (g0, w0), then
move along the conformal class: g = exp(2f) g0 with w = w0 + 2 df.  The
same connection stays compatible with every representative.
"""

import numpy as np

from glweyl import (
    DerivativeEngine, GLMetric, PointTM, ScalarField, NonlinearConnection, weyl_connection,
)
from glweyl.metric import conformal_scale, shift_form
from glweyl.verify import compatibility_residual

n = 3
g0 = GLMetric.parse([["1 + x1^2 + y1^2 + y2^2 + y3^2" if i == j else "0" for j in range(n)]
                     for i in range(n)])
N = NonlinearConnection.zero(n)
w0 = [ScalarField.parse(t, n) for t in ("x2*0.2", "0", "0")]
conn = weyl_connection(g0, N, w0)

rng = np.random.default_rng(0)
points = [PointTM(rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)) for _ in range(20)]

eng = DerivativeEngine("symbolic")
for text in ("0", "sin(x2)*0.1", "x1*x3 - 0.5*x2^2"):
    f = ScalarField.parse(text, n)
    g, w = conformal_scale(g0, f), shift_form(w0, f, eng)
    worst = max(np.max(np.abs(compatibility_residual(conn, g, N, w, p, eng))) for p in points)
    print(f"f = {text:18s} max |g_jk|i - w_i g_jk| = {worst:.2e}")

# the same numbers with finite differences
fd = DerivativeEngine("fd")
conn_fd = weyl_connection(g0, N, w0, fd)
worst = max(np.max(np.abs(compatibility_residual(conn_fd, g0, N, w0, p, fd))) for p in points)
print(f"finite differences, f = 0: {worst:.2e}")
