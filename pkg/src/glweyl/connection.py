"""Nonlinear connections, d-connections and their covariant derivatives.

Coefficient arrays are evaluated point by point:

* ``N[j, i]``     = N^j_i  (nonlinear connection)
* ``F[i, j, k]``  = F^i_jk (horizontal coefficients)
* ``C[i, j, k]``  = C^i_jk (vertical coefficients)
* covariant derivatives of a (0,2) field are returned as ``R[j, k, i]``,
  the derivative index last.

The metric inverse is always taken numerically at the point; only the
derivatives of metric components go through the derivative engine.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .manifold import SYMBOLIC, DerivativeEngine, DTensorField, PointTM, ScalarField
from .metric import GLMetric, conformal_scale, form_at, inverse, shift_form

__all__ = [
    "NonlinearConnection", "FinslerConnection",
    "delta_x", "delta_gradient", "h_cov_deriv_02", "v_cov_deriv_02",
    "chern_rund", "weyl_connection", "weyl_correction", "vertical_cartan",
    "vertical_weyl_connection", "vertical_weyl_defect", "canonical_N",
    "levi_civita",
]

Coefficients = Callable[[PointTM], np.ndarray]


class NonlinearConnection:
    """Coefficients N^j_i(x, y) of a horizontal distribution.

    Either built from an n x n table of scalar fields (``N[j][i]`` is
    N^j_i) or from a function returning the whole matrix at a point.
    """

    def __init__(self, n: int, fields=None, matrix: Coefficients | None = None):
        if (fields is None) == (matrix is None):
            raise ValueError("give exactly one of fields or matrix")
        self.n = n
        self._fields = None
        if fields is not None:
            self._fields = DTensorField(1, 1, fields)
            if self._fields.n != n:
                raise ValueError("nonlinear connection table has the wrong size")
        self._matrix = matrix

    @classmethod
    def zero(cls, n: int) -> "NonlinearConnection":
        return cls(n, matrix=lambda p: np.zeros((n, n)))

    def matrix(self, p: PointTM) -> np.ndarray:
        if self._fields is not None:
            return self._fields.evaluate(p)
        return np.asarray(self._matrix(p), dtype=float)

    def component(self, j: int, i: int) -> ScalarField:
        if self._fields is not None:
            return self._fields[j, i]
        return ScalarField(func=lambda p: self.matrix(p)[j, i])


class FinslerConnection:
    """A d-connection given by its Christoffel pair (F, C).

    A missing vertical part means C = 0 identically (horizontal connection).
    """

    def __init__(self, n: int, F: Coefficients, C: Coefficients | None = None,
                 name: str = ""):
        self.n = n
        self._F = F
        self._C = C
        self.name = name

    @property
    def horizontal(self) -> bool:
        """True when C vanishes by construction."""
        return self._C is None

    def F(self, p: PointTM) -> np.ndarray:
        return np.asarray(self._F(p), dtype=float)

    def C(self, p: PointTM) -> np.ndarray:
        if self._C is None:
            return np.zeros((self.n,) * 3)
        return np.asarray(self._C(p), dtype=float)

    def component(self, which: str, i: int, j: int, k: int) -> ScalarField:
        get = self.F if which == "F" else self.C
        return ScalarField(func=lambda p: get(p)[i, j, k])

    def perturbed(self, index: tuple[int, int, int], eps: float) -> "FinslerConnection":
        """Copy with F[index] shifted by ``eps`` (C untouched)."""
        def F(p):
            out = self.F(p).copy()
            out[index] += eps
            return out
        return FinslerConnection(self.n, F, self._C, name=f"{self.name}+eps")

    def h_symmetry_defect(self, p: PointTM) -> float:
        F = self.F(p)
        return float(np.max(np.abs(F - F.transpose(0, 2, 1))))

    def v_symmetry_defect(self, p: PointTM) -> float:
        C = self.C(p)
        return float(np.max(np.abs(C - C.transpose(0, 2, 1))))

    def is_horizontal(self, points: Sequence[PointTM]) -> bool:
        return all(not np.any(self.C(p)) for p in points)

    def is_h_symmetric(self, points: Sequence[PointTM], tol: float = 0.0) -> bool:
        return all(self.h_symmetry_defect(p) <= tol for p in points)

    def is_total_symmetric(self, points: Sequence[PointTM], tol: float = 0.0) -> bool:
        return self.is_h_symmetric(points, tol) and all(
            self.v_symmetry_defect(p) <= tol for p in points)


def delta_x(f: ScalarField, i: int, p: PointTM, N: NonlinearConnection,
            eng: DerivativeEngine = SYMBOLIC) -> float:
    """Adapted derivative d f/dx^i - N^j_i d f/dy^j at ``p``."""
    val = eng.partial(f, "x", i, p)
    if f.x_only:
        return val
    Nm = N.matrix(p)
    return val - sum(Nm[j, i] * eng.partial(f, "y", j, p) for j in range(p.n))


def delta_gradient(t: DTensorField, p: PointTM, N: NonlinearConnection,
                   eng: DerivativeEngine = SYMBOLIC) -> np.ndarray:
    """All adapted derivatives of ``t``; the derivative index is last."""
    dx = t.grad_x(p, eng)
    if t.x_only:
        return dx
    dy = t.grad_y(p, eng)
    return dx - np.einsum("...j,ji->...i", dy, N.matrix(p))


def _cov_02(t_val: np.ndarray, dt: np.ndarray, G: np.ndarray) -> np.ndarray:
    # t_jk;i = dt_jk/di - t_ak G^a_ji - t_ja G^a_ki
    return (dt
            - np.einsum("ak,aji->jki", t_val, G)
            - np.einsum("ja,aki->jki", t_val, G))


def h_cov_deriv_02(t: DTensorField, Fc: FinslerConnection, N: NonlinearConnection,
                   p: PointTM, eng: DerivativeEngine = SYMBOLIC) -> np.ndarray:
    """Horizontal covariant derivative of a (0,2) field, as ``R[j, k, i]``."""
    if (t.r, t.s) != (0, 2):
        raise ValueError("expected a (0,2) d-tensor field")
    return _cov_02(t.evaluate(p), delta_gradient(t, p, N, eng), Fc.F(p))


def v_cov_deriv_02(t: DTensorField, Fc: FinslerConnection, p: PointTM,
                   eng: DerivativeEngine = SYMBOLIC) -> np.ndarray:
    """Vertical covariant derivative of a (0,2) field, as ``R[j, k, i]``."""
    if (t.r, t.s) != (0, 2):
        raise ValueError("expected a (0,2) d-tensor field")
    return _cov_02(t.evaluate(p), t.grad_y(p, eng), Fc.C(p))


def _christoffel(ginv: np.ndarray, D: np.ndarray, prefactor: float) -> np.ndarray:
    """prefactor * g^ia (D_ak,j + D_ja,k - D_jk,a) where D[a, b, c] = d_c g_ab."""
    S = D.transpose(0, 2, 1) + D.transpose(1, 0, 2) - D.transpose(2, 0, 1)
    return prefactor * np.einsum("ia,ajk->ijk", ginv, S)


def chern_rund(g: GLMetric, N: NonlinearConnection,
               eng: DerivativeEngine = SYMBOLIC, prefactor: float = 0.5) -> FinslerConnection:
    """Chern-Rund connection of (g, N): Christoffel formula in the adapted
    derivatives, C = 0.

    ``prefactor`` exists only for the diagnostic variant that drops the 1/2,
    which is not metrical.
    """
    def F(p):
        return _christoffel(inverse(g, p), delta_gradient(g.g, p, N, eng), prefactor)
    return FinslerConnection(g.n, F, None, name="chern-rund")


def weyl_correction(G: np.ndarray, ginv: np.ndarray, w: np.ndarray) -> np.ndarray:
    """(1/2)(delta^i_j w_k + delta^i_k w_j - g_jk w^i)."""
    n = len(w)
    I = np.eye(n)
    w_up = ginv @ w
    return 0.5 * (np.einsum("ij,k->ijk", I, w) + np.einsum("ik,j->ijk", I, w)
                  - np.einsum("jk,i->ijk", G, w_up))


def weyl_connection(g: GLMetric, N: NonlinearConnection, w: Sequence[ScalarField],
                    eng: DerivativeEngine = SYMBOLIC) -> FinslerConnection:
    """The horizontal, h-symmetric d-connection with g_jk|i = w_i g_jk."""
    if len(w) != g.n:
        raise ValueError("one-form must have n components")
    if not all(c.x_only for c in w):
        raise ValueError("Weyl one-form components must depend on x only")
    cr = chern_rund(g, N, eng)

    def F(p):
        return cr.F(p) - weyl_correction(g.at(p), inverse(g, p), form_at(w, p))
    return FinslerConnection(g.n, F, None, name="weyl")


def vertical_cartan(g: GLMetric, eng: DerivativeEngine = SYMBOLIC) -> Coefficients:
    """Vertical Christoffel block (1/2) g^ia (dg_ak/dy^j + dg_ja/dy^k - dg_jk/dy^a)."""
    n = g.n

    def C(p):
        if g.y_independent:
            return np.zeros((n, n, n))
        return _christoffel(inverse(g, p), g.g.grad_y(p, eng), 0.5)
    return C


def vertical_weyl_connection(g: GLMetric, w: Sequence[ScalarField],
                             eng: DerivativeEngine = SYMBOLIC) -> FinslerConnection:
    """d-connection with F = 0 and C chosen so that g_jk|_i = w_i g_jk
    (vertical compatibility with g)."""
    cartan = vertical_cartan(g, eng)
    n = g.n

    def C(p):
        return cartan(p) - weyl_correction(g.at(p), inverse(g, p), form_at(w, p))
    return FinslerConnection(n, lambda p: np.zeros((n, n, n)), C, name="vertical-weyl")


def vertical_weyl_defect(g: GLMetric, f: ScalarField, w: Sequence[ScalarField],
                         p: PointTM, eng: DerivativeEngine = SYMBOLIC) -> np.ndarray:
    """How far the vertical notion of compatibility is from being conformally
    invariant.

    The connection is made vertical-compatible with (g, w); the result is
    ``D[j, k, i] = gbar_jk|_i - wbar_i gbar_jk`` for gbar = exp(2f) g and
    wbar = w + 2 df, which equals -2 (df/dx^i) gbar_jk.
    """
    conn = vertical_weyl_connection(g, w, eng)
    gbar = conformal_scale(g, f)
    wbar = form_at(shift_form(w, f, eng), p)
    Gbar = gbar.at(p)
    return v_cov_deriv_02(gbar.g, conn, p, eng) - np.einsum("jk,i->jki", Gbar, wbar)


def levi_civita(g: GLMetric, p: PointTM, eng: DerivativeEngine = SYMBOLIC) -> np.ndarray:
    """Classical Christoffel symbols of a y-independent metric at ``p``."""
    if not g.y_independent:
        raise ValueError("Levi-Civita symbols need a y-independent metric")
    return _christoffel(inverse(g, p), g.g.grad_x(p, eng), 0.5)


def canonical_N(g: GLMetric, eng: DerivativeEngine = SYMBOLIC) -> NonlinearConnection:
    """N^i_j = Gamma^i_jk(x) y^k for a y-independent metric."""
    if not g.y_independent:
        raise ValueError("the canonical nonlinear connection needs a y-independent metric")

    def matrix(p):
        return np.einsum("ijk,k->ij", levi_civita(g, p, eng), np.asarray(p.y))
    return NonlinearConnection(g.n, matrix=matrix)
