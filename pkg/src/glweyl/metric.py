"""Generalized Lagrange metrics, conformal classes and Weyl structures."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .manifold import SYMBOLIC, DerivativeEngine, DTensorField, PointTM, ScalarField

__all__ = [
    "GLMetric", "SignatureReport", "ConformalClass", "WeylStructure",
    "SingularMetricError", "NONDEGENERACY_THRESHOLD",
    "validate", "inverse", "conformal_scale", "weyl_form", "shift_form",
    "raise_index", "lower_index", "exterior_derivative", "signature_of",
]

NONDEGENERACY_THRESHOLD = 1e-12
SYMMETRY_TOLERANCE = 1e-12


class SingularMetricError(ArithmeticError):
    pass


def _always(p: PointTM) -> bool:
    return True


@dataclass
class GLMetric:
    """Symmetric (0,2) d-tensor field with a signature certificate.

    ``signature`` is (p_plus, p_minus); None means "whatever the first
    validated point shows, as long as it stays constant".
    """

    g: DTensorField
    signature: tuple[int, int] | None = None
    domain: Callable[[PointTM], bool] = field(default=_always, repr=False)

    def __post_init__(self):
        if (self.g.r, self.g.s) != (0, 2):
            raise ValueError("a GL-metric is a (0,2) d-tensor field")
        if self.signature is not None:
            pp, pm = self.signature
            if pp < 0 or pm < 0 or pp + pm != self.g.n:
                raise ValueError(f"signature {self.signature} does not fit n={self.g.n}")
            self.signature = (int(pp), int(pm))

    @classmethod
    def from_exprs(cls, entries: dict[tuple[int, int], ex.Expr], n: int,
                   signature=None, domain=_always) -> "GLMetric":
        """Build from 0-based ``(i, j) -> Expr``; missing entries are zero
        and a missing (j, i) is filled from (i, j)."""
        fields: dict[tuple[int, int], ScalarField] = {}
        for (i, j), e in entries.items():
            mirror = fields.get((j, i))
            # identical mirror entries share one field so g_ij == g_ji exactly
            fields[i, j] = mirror if mirror is not None and mirror.expr == e \
                else ScalarField(expr=e)

        def make(i, j):
            if (i, j) in fields:
                return fields[i, j]
            if (j, i) in fields:
                return fields[j, i]
            return ScalarField.constant(0.0)

        return cls(DTensorField.from_function(0, 2, n, make), signature, domain)

    @classmethod
    def parse(cls, rows: Sequence[Sequence[str]], **kw) -> "GLMetric":
        """Build from a full n x n table of expression strings."""
        n = len(rows)
        entries = {(i, j): ex.parse(rows[i][j], n) for i in range(n) for j in range(n)}
        return cls.from_exprs(entries, n, **kw)

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def y_independent(self) -> bool:
        return self.g.x_only

    def at(self, p: PointTM) -> np.ndarray:
        return self.g.evaluate(p)


@dataclass
class SignatureReport:
    passed: bool
    determinants: list[float]
    sign_counts: list[tuple[int, int]]
    symmetry_defect: float
    signature: tuple[int, int] | None
    min_abs_det: float
    failures: list[str]
    witness: PointTM | None = None


def signature_of(matrix: np.ndarray) -> tuple[int, int]:
    ev = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    return int(np.sum(ev > 0)), int(np.sum(ev < 0))


def validate(g: GLMetric, points: Sequence[PointTM]) -> SignatureReport:
    """Check symmetry, non-degeneracy and constant signature at ``points``."""
    if not points:
        raise ValueError("validation needs a non-empty sample set")
    dets, counts = [], []
    failures: list[str] = []
    witness = None
    sym = 0.0
    expected = g.signature
    for p in points:
        m = g.at(p)
        d = float(np.linalg.det(m))
        s = signature_of(m)
        defect = float(np.max(np.abs(m - m.T)))
        dets.append(d)
        counts.append(s)
        if defect > sym:
            sym = defect
            if defect > SYMMETRY_TOLERANCE and witness is None:
                witness = p
        if abs(d) <= NONDEGENERACY_THRESHOLD and witness is None:
            witness = p
        if expected is None:
            expected = s
        if s != expected and witness is None:
            witness = p
    min_det = min(abs(d) for d in dets)
    if sym > SYMMETRY_TOLERANCE:
        failures.append(f"not symmetric: max|g_ij - g_ji| = {sym:.3e}")
    if min_det <= NONDEGENERACY_THRESHOLD:
        failures.append(f"degenerate: min|det g| = {min_det:.3e}")
    bad = sorted({c for c in counts if c != expected})
    if bad:
        failures.append(f"signature not constant: expected {expected}, saw {bad}")
    return SignatureReport(
        passed=not failures, determinants=dets, sign_counts=counts,
        symmetry_defect=sym, signature=expected, min_abs_det=min_det,
        failures=failures, witness=witness)


def inverse(g: GLMetric, p: PointTM) -> np.ndarray:
    """Matrix inverse g^ij at ``p``."""
    m = g.at(p)
    if abs(np.linalg.det(m)) <= NONDEGENERACY_THRESHOLD:
        raise SingularMetricError(f"metric is degenerate at {p}")
    return np.linalg.inv(m)


def _scaled_field(c: ScalarField, f: ScalarField) -> ScalarField:
    if c.expr is not None and f.expr is not None:
        return ScalarField(expr=ex.mul(ex.exp(ex.mul(ex.const(2.0), f.expr)), c.expr))
    return ScalarField(func=lambda p: np.exp(2.0 * f(p)) * c(p), x_only=c.x_only)


def conformal_scale(g: GLMetric, f: ScalarField) -> GLMetric:
    """The conformally equivalent metric exp(2 f) g for an x-only gauge f."""
    if not f.x_only:
        raise ValueError("conformal gauge must depend on x only")
    cache: dict[int, ScalarField] = {}

    def make(i, j):
        c = g.g[i, j]
        key = id(c)  # keep g_ij and g_ji as one object
        if key not in cache:
            cache[key] = _scaled_field(c, f)
        return cache[key]

    scaled = DTensorField.from_function(0, 2, g.n, make)
    return GLMetric(scaled, g.signature, g.domain)


def shift_form(w: Sequence[ScalarField], f: ScalarField,
               eng: DerivativeEngine = SYMBOLIC) -> list[ScalarField]:
    """Components w_i + 2 df/dx^i.

    Expression-backed inputs give expression-backed output, so later
    derivatives of the result stay exact; otherwise df is taken with ``eng``.
    """
    if not f.x_only:
        raise ValueError("gauge must depend on x only")
    out = []
    for i, wi in enumerate(w):
        if wi.expr is not None and f.expr is not None:
            df = ex.differentiate(f.expr, "x", i + 1)
            out.append(ScalarField(expr=ex.add(wi.expr, ex.mul(ex.const(2.0), df))))
        else:
            out.append(ScalarField(
                func=lambda p, wi=wi, i=i: wi(p) + 2.0 * eng.partial(f, "x", i, p),
                x_only=True))
    return out


@dataclass
class ConformalClass:
    """All metrics exp(2 f) g0 with f a function on the base manifold."""

    anchor: GLMetric

    def representative(self, f: ScalarField) -> GLMetric:
        return conformal_scale(self.anchor, f)


@dataclass
class WeylStructure:
    """Weyl structure stored by its value ``w0`` on the anchor metric.

    Every other representative's one-form follows from the transformation
    rule, so the rule cannot be violated.
    """

    conformal_class: ConformalClass
    w0: list[ScalarField]

    def __post_init__(self):
        if len(self.w0) != self.conformal_class.anchor.n:
            raise ValueError("one-form must have n components")
        for c in self.w0:
            if not c.x_only:
                raise ValueError("Weyl one-form components must depend on x only")

    def form(self, f: ScalarField | None = None,
             eng: DerivativeEngine = SYMBOLIC) -> list[ScalarField]:
        if f is None:
            return list(self.w0)
        return shift_form(self.w0, f, eng)


def weyl_form(W: WeylStructure, f: ScalarField,
              eng: DerivativeEngine = SYMBOLIC) -> list[ScalarField]:
    """One-form attached to the representative exp(2 f) g0."""
    return W.form(f, eng)


def form_at(w: Sequence[ScalarField], p: PointTM) -> np.ndarray:
    return np.array([c(p) for c in w])


def raise_index(w: Sequence[ScalarField], g: GLMetric, p: PointTM) -> np.ndarray:
    """Contravariant components w^i = g^ia w_a at ``p``."""
    return inverse(g, p) @ form_at(w, p)


def lower_index(v: np.ndarray, g: GLMetric, p: PointTM) -> np.ndarray:
    return g.at(p) @ np.asarray(v)


def exterior_derivative(w: Sequence[ScalarField], p: PointTM,
                        eng: DerivativeEngine = SYMBOLIC) -> np.ndarray:
    """(dw)_ij = d_i w_j - d_j w_i at ``p`` (x-derivatives)."""
    n = len(w)
    grad = np.array([[eng.partial(w[j], "x", i, p) for j in range(n)]
                     for i in range(n)])  # grad[i, j] = d_i w_j
    return grad - grad.T
