"""Independent computation of the connection coefficients with sympy.

Shares nothing with the package except the input strings: sympy parses
them, differentiates, inverts the metric symbolically and the result is
lambdified.
"""

import numpy as np
import sympy as sp


def symbols(n):
    return sp.symbols(f"x1:{n + 1}"), sp.symbols(f"y1:{n + 1}")


def _sym(text, n):
    x, y = symbols(n)
    env = {f"x{i + 1}": x[i] for i in range(n)}
    env.update({f"y{i + 1}": y[i] for i in range(n)})
    env.update({"ln": sp.log, "exp": sp.exp, "sqrt": sp.sqrt, "sin": sp.sin, "cos": sp.cos})
    return sp.sympify(text.replace("^", "**"), locals=env)


class Oracle:
    def __init__(self, g_rows, N_rows=None, w=None):
        n = len(g_rows)
        self.n = n
        x, y = symbols(n)
        self.args = x + y
        G = sp.Matrix(n, n, lambda i, j: _sym(g_rows[i][j], n))
        N = sp.Matrix(n, n, lambda j, i: _sym(N_rows[j][i], n) if N_rows else 0)
        wv = [_sym(t, n) for t in (w or ["0"] * n)]
        Ginv = G.inv()

        def delta(f, i):  # d/dx^i - N^j_i d/dy^j
            return sp.diff(f, x[i]) - sum(N[j, i] * sp.diff(f, y[j]) for j in range(n))

        def cr(i, j, k):
            return sp.Rational(1, 2) * sum(
                Ginv[i, a] * (delta(G[a, k], j) + delta(G[j, a], k) - delta(G[j, k], a))
                for a in range(n))

        w_up = [sum(Ginv[i, a] * wv[a] for a in range(n)) for i in range(n)]
        d = lambda a, b: 1 if a == b else 0
        F_cr, F_w = [], []
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    c = cr(i, j, k)
                    F_cr.append(c)
                    F_w.append(c - sp.Rational(1, 2) * (
                        d(i, j) * wv[k] + d(i, k) * wv[j] - G[j, k] * w_up[i]))
        self._cr = sp.lambdify(self.args, F_cr, "math")
        self._w = sp.lambdify(self.args, F_w, "math")

    def _at(self, fn, p):
        return np.array(fn(*p.x, *p.y), dtype=float).reshape((self.n,) * 3)

    def chern_rund(self, p):
        return self._at(self._cr, p)

    def weyl(self, p):
        return self._at(self._w, p)


def symbolic_compatibility_residual(g_rows, N_rows, w, prefactor=sp.Rational(1, 2)):
    """g_jk|i - w_i g_jk for the Weyl connection with correction weight
    ``prefactor``, simplified by sympy.  Returns the list of n^3 residuals."""
    n = len(g_rows)
    x, y = symbols(n)
    G = sp.Matrix(n, n, lambda i, j: _sym(g_rows[i][j], n))
    N = sp.Matrix(n, n, lambda j, i: _sym(N_rows[j][i], n))
    wv = [_sym(t, n) for t in w]
    Ginv = G.inv()

    def delta(f, i):
        return sp.diff(f, x[i]) - sum(N[j, i] * sp.diff(f, y[j]) for j in range(n))

    d = lambda a, b: 1 if a == b else 0
    w_up = [sum(Ginv[i, a] * wv[a] for a in range(n)) for i in range(n)]
    F = {}
    for i in range(n):
        for j in range(n):
            for k in range(n):
                F[i, j, k] = sp.Rational(1, 2) * sum(
                    Ginv[i, a] * (delta(G[a, k], j) + delta(G[j, a], k) - delta(G[j, k], a))
                    for a in range(n)) - prefactor * (
                    d(i, j) * wv[k] + d(i, k) * wv[j] - G[j, k] * w_up[i])
    out = []
    for j in range(n):
        for k in range(n):
            for i in range(n):
                r = (delta(G[j, k], i)
                     - sum(G[a, k] * F[a, j, i] for a in range(n))
                     - sum(G[j, a] * F[a, k, i] for a in range(n))
                     - wv[i] * G[j, k])
                out.append(sp.simplify(r))
    return out
