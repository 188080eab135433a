"""Points of TM, scalar and d-tensor fields, and the two derivative engines.

Index conventions: Python-side indices are 0-based, so ``partial_x(f, 0, ...)``
is the derivative with respect to x1.  A d-tensor component array has the
upper indices first, e.g. for a (1,2) field ``T[i, j, k] = T^i_jk``.
Gradients append the differentiation index last: ``grad_x(p)[j, k, i]`` is
the derivative of ``T_jk`` with respect to x^i.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import expr as ex

__all__ = [
    "PointTM", "ScalarField", "DTensorField", "DerivativeEngine",
    "SampleBox", "SYMBOLIC", "partial_x", "partial_y", "sample_points",
]


@dataclass(frozen=True)
class PointTM:
    """A point (x, y) of TM in the single fixed chart."""

    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        y = tuple(float(v) for v in self.y)
        if len(x) != len(y) or not x:
            raise ValueError("x and y must have the same positive length")
        if not all(np.isfinite(x + y)):
            raise ValueError("point coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return len(self.x)

    def shifted(self, kind: str, i: int, h: float) -> "PointTM":
        if kind == "x":
            x = list(self.x)
            x[i] += h
            return PointTM(x, self.y)
        y = list(self.y)
        y[i] += h
        return PointTM(self.x, y)

    def scaled_fibre(self, lam: float) -> "PointTM":
        return PointTM(self.x, [lam * v for v in self.y])

    def as_dict(self) -> dict:
        return {"x": list(self.x), "y": list(self.y)}


@dataclass(eq=False)
class ScalarField:
    """A real function on TM backed by an expression or a plain callable.

    For expression-backed fields the x-only flag is derived structurally;
    for callables the caller declares it.
    """

    expr: ex.Expr | None = None
    func: Callable[[PointTM], float] | None = None
    x_only: bool = False
    _derivs: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if (self.expr is None) == (self.func is None):
            raise ValueError("a ScalarField needs exactly one of expr or func")
        if self.expr is not None:
            self.x_only = ex.is_x_only(self.expr)

    @classmethod
    def parse(cls, text: str, n: int) -> "ScalarField":
        return cls(expr=ex.parse(text, n))

    @classmethod
    def constant(cls, value: float) -> "ScalarField":
        return cls(expr=ex.const(value))

    def __call__(self, p: PointTM) -> float:
        if self.expr is not None:
            return ex.evaluate(self.expr, p.x, p.y)
        v = float(self.func(p))
        if not np.isfinite(v):
            raise ArithmeticError(f"field value {v} at {p} is not finite")
        return v

    def derivative(self, kind: str, i: int) -> "ScalarField":
        """Exact partial derivative field (expression-backed fields only).

        ``i`` is 0-based.  Derivatives are memoised on the field.
        """
        if self.expr is None:
            raise TypeError("symbolic differentiation needs an expression-backed field")
        key = (kind, i)
        d = self._derivs.get(key)
        if d is None:
            d = ScalarField(expr=ex.differentiate(self.expr, kind, i + 1))
            self._derivs[key] = d
        return d

    def text(self) -> str:
        if self.expr is None:
            return "<callable>"
        return ex.to_text(self.expr)


@dataclass(frozen=True)
class DerivativeEngine:
    """Partial derivatives either exactly (symbolic) or by central differences.

    The finite-difference step along a coordinate c is
    ``h0 * max(1, |c|)``.
    """

    mode: str = "symbolic"
    h0: float = 1e-5

    def __post_init__(self):
        if self.mode not in ("symbolic", "fd"):
            raise ValueError(f"unknown engine mode {self.mode!r}")
        if not self.h0 > 0:
            raise ValueError("fd step must be positive")

    def step(self, coordinate: float) -> float:
        return self.h0 * max(1.0, abs(coordinate))

    def partial(self, f: ScalarField, kind: str, i: int, p: PointTM) -> float:
        if kind == "y" and f.x_only:
            return 0.0
        if self.mode == "symbolic":
            return f.derivative(kind, i)(p)
        c = p.x[i] if kind == "x" else p.y[i]
        h = self.step(c)
        return (f(p.shifted(kind, i, h)) - f(p.shifted(kind, i, -h))) / (2.0 * h)


SYMBOLIC = DerivativeEngine("symbolic")


def partial_x(f: ScalarField, i: int, p: PointTM,
              eng: DerivativeEngine = SYMBOLIC) -> float:
    """Derivative of ``f`` along x^(i+1) at ``p``."""
    return eng.partial(f, "x", i, p)


def partial_y(f: ScalarField, i: int, p: PointTM,
              eng: DerivativeEngine = SYMBOLIC) -> float:
    """Derivative of ``f`` along y^(i+1) at ``p``; zero for x-only fields."""
    return eng.partial(f, "y", i, p)


class DTensorField:
    """A d-tensor field of type (r, s): n**(r+s) scalar fields."""

    def __init__(self, r: int, s: int, components):
        comps = np.asarray(components, dtype=object)
        rank = r + s
        if comps.ndim != rank or (rank and len(set(comps.shape)) != 1):
            raise ValueError(f"components must be an n^{rank} array")
        for c in comps.flat:
            if not isinstance(c, ScalarField):
                raise TypeError("components must be ScalarField instances")
        self.r, self.s = r, s
        self.n = comps.shape[0] if rank else 1
        self.components = comps

    @classmethod
    def from_function(cls, r: int, s: int, n: int, make) -> "DTensorField":
        """Build components from ``make(*multi_index) -> ScalarField``."""
        comps = np.empty((n,) * (r + s), dtype=object)
        for idx in itertools.product(range(n), repeat=r + s):
            comps[idx] = make(*idx)
        return cls(r, s, comps)

    def __getitem__(self, idx) -> ScalarField:
        return self.components[idx]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.components.shape

    @property
    def x_only(self) -> bool:
        return all(c.x_only for c in self.components.flat)

    @property
    def symbolic(self) -> bool:
        return all(c.expr is not None for c in self.components.flat)

    def evaluate(self, p: PointTM) -> np.ndarray:
        out = np.empty(self.shape)
        for idx in np.ndindex(self.shape):
            out[idx] = self.components[idx](p)
        return out

    def _grad(self, kind: str, p: PointTM, eng: DerivativeEngine) -> np.ndarray:
        n = p.n
        out = np.empty(self.shape + (n,))
        for idx in np.ndindex(self.shape):
            c = self.components[idx]
            for i in range(n):
                out[idx + (i,)] = eng.partial(c, kind, i, p)
        return out

    def grad_x(self, p: PointTM, eng: DerivativeEngine = SYMBOLIC) -> np.ndarray:
        return self._grad("x", p, eng)

    def grad_y(self, p: PointTM, eng: DerivativeEngine = SYMBOLIC) -> np.ndarray:
        return self._grad("y", p, eng)


@dataclass(frozen=True)
class SampleBox:
    """Axis-aligned box in (x, y) with optional exclusion expressions.

    A point is rejected when any exclusion expression has absolute value
    below ``exclusion_eps`` there (or cannot be evaluated).
    """

    x_bounds: tuple[tuple[float, float], ...]
    y_bounds: tuple[tuple[float, float], ...]
    exclusions: tuple[ex.Expr, ...] = ()
    exclusion_eps: float = 1e-3

    def __post_init__(self):
        if len(self.x_bounds) != len(self.y_bounds):
            raise ValueError("x and y bounds must have the same dimension")
        for lo, hi in self.x_bounds + self.y_bounds:
            if not lo <= hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")

    @classmethod
    def uniform(cls, n: int, lo: float = -1.0, hi: float = 1.0, **kw) -> "SampleBox":
        return cls(((lo, hi),) * n, ((lo, hi),) * n, **kw)

    @property
    def n(self) -> int:
        return len(self.x_bounds)

    def admits(self, p: PointTM) -> bool:
        for e in self.exclusions:
            try:
                if abs(ex.evaluate(e, p.x, p.y)) < self.exclusion_eps:
                    return False
            except ex.ExprDomainError:
                return False
        return True

    def describe(self) -> dict:
        return {
            "x": [list(b) for b in self.x_bounds],
            "y": [list(b) for b in self.y_bounds],
            "exclusions": [ex.to_text(e) for e in self.exclusions],
            "exclusion_eps": self.exclusion_eps,
        }


def sample_points(box: SampleBox, count: int, seed: int = 42,
                  accept: Callable[[PointTM], bool] | None = None,
                  max_tries: int = 1000) -> list[PointTM]:
    """Draw ``count`` points uniformly from ``box`` by rejection sampling.

    Deterministic for a given seed.  ``accept`` is an extra validity
    predicate (e.g. the metric's domain).
    """
    if count < 1:
        raise ValueError("need at least one sample point")
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in box.x_bounds + box.y_bounds])
    hi = np.array([b[1] for b in box.x_bounds + box.y_bounds])
    n = box.n
    points: list[PointTM] = []
    tries = 0
    while len(points) < count:
        if tries >= max_tries * count:
            raise RuntimeError(
                f"rejection sampling found only {len(points)} of {count} points")
        tries += 1
        v = rng.uniform(lo, hi)
        p = PointTM(v[:n], v[n:])
        if box.admits(p) and (accept is None or accept(p)):
            points.append(p)
    return points


def as_point(x: Iterable[float], y: Sequence[float] | None = None) -> PointTM:
    x = tuple(x)
    return PointTM(x, tuple(y) if y is not None else (0.0,) * len(x))
