"""Residual checks of the geometric identities over seeded sample points.

Every check returns a :class:`CheckReport` made of one or more criteria.  A
criterion compares a measured value with a bound (``value <= bound`` for
residuals, ``value > bound`` for quantities that must stay away from zero)
and keeps the witness point where the measured extreme occurred, so a
failure can be replayed standalone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .connection import (
    FinslerConnection, NonlinearConnection, canonical_N, chern_rund,
    h_cov_deriv_02, levi_civita, vertical_weyl_defect, weyl_connection,
)
from .manifold import DerivativeEngine, PointTM, SampleBox, ScalarField, sample_points
from .metric import (
    NONDEGENERACY_THRESHOLD, SYMMETRY_TOLERANCE, ConformalClass, GLMetric,
    WeylStructure, conformal_scale, exterior_derivative, form_at, shift_form, validate,
)

__all__ = [
    "Scenario", "ScenarioError", "Criterion", "CheckReport",
    "ENGINE_TOLERANCE", "CLOSEDNESS_TOLERANCE",
    "check_metric", "check_cr", "check_compatibility", "check_conformal_invariance",
    "check_vertical_failure", "check_closedness", "check_riemannian_reduction",
    "uniqueness_probe", "run_all", "compatibility_residual",
]

ENGINE_TOLERANCE = {"symbolic": 1e-9, "fd": 1e-6}
CLOSEDNESS_TOLERANCE = {"symbolic": 1e-12, "fd": 1e-6}
Y_SENSITIVITY_TOLERANCE = 1e-8
KAPPA_MIN = 0.1
LINEARITY_TOLERANCE = 0.05


class ScenarioError(ValueError):
    """Invalid scenario data.  ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything needed to run the checks: (M, G, W) plus H and a sampler.

    Indices in ``metric`` and ``nonlinear`` are 0-based;
    ``nonlinear[(j, i)]`` is N^j_i.  ``nonlinear`` is a dict, the string
    ``"canonical"`` or None (N = 0).
    """

    name: str
    n: int
    metric: dict
    weyl: tuple = ()
    gauges: tuple = ()
    nonlinear: object = None
    signature: tuple[int, int] | None = None
    box: SampleBox | None = None
    seed: int = 42
    points: int = 64
    engine: str = "symbolic"
    fd_step: float = 1e-5
    tolerance: float | None = None

    def __post_init__(self):
        n = self.n
        if n < 1:
            raise ScenarioError("dimension must be at least 1", "scenario.n")
        if not self.weyl:
            object.__setattr__(self, "weyl", (ex.const(0.0),) * n)
        if len(self.weyl) != n:
            raise ScenarioError(f"weyl form needs {n} components", "weyl")
        if self.box is None:
            object.__setattr__(self, "box", SampleBox.uniform(n))
        if self.box.n != n:
            raise ScenarioError("sampling box dimension differs from n", "scenario.box")
        for (i, j), e in self.metric.items():
            self._check_expr(e, f"metric.g_{i + 1}_{j + 1}", (i, j))
        if not any(True for _ in self.metric):
            raise ScenarioError("metric has no entries", "metric")
        for i, e in enumerate(self.weyl):
            self._check_expr(e, f"weyl.w_{i + 1}", (i,))
            if not ex.is_x_only(e):
                raise ScenarioError("Weyl one-form must depend on x only", f"weyl.w_{i + 1}")
        for k, e in enumerate(self.gauges):
            self._check_expr(e, f"gauges[{k}]", ())
            if not ex.is_x_only(e):
                raise ScenarioError("gauge must depend on x only", f"gauges[{k}]")
        if isinstance(self.nonlinear, dict):
            for (j, i), e in self.nonlinear.items():
                self._check_expr(e, f"nonlinear.N_{j + 1}_{i + 1}", (j, i))
        elif self.nonlinear == "canonical":
            if not all(ex.is_x_only(e) for e in self.metric.values()):
                raise ScenarioError(
                    "canonical nonlinear connection needs a y-independent metric",
                    "nonlinear")
        elif self.nonlinear is not None:
            raise ScenarioError(f"bad nonlinear connection {self.nonlinear!r}", "nonlinear")
        if self.engine not in ENGINE_TOLERANCE:
            raise ScenarioError(f"unknown engine {self.engine!r}", "scenario.engine")
        if self.points < 1:
            raise ScenarioError("points must be positive", "scenario.points")
        if self.signature is not None and sum(self.signature) != n:
            raise ScenarioError("signature does not add up to n", "metric.signature")

    def _check_expr(self, e, where, idx):
        if not isinstance(e, ex.Expr):
            raise ScenarioError(f"{where} is not an expression", where)
        if any(not 0 <= i < self.n for i in idx):
            raise ScenarioError(f"{where}: index outside 1..{self.n}", where)
        if any(k > self.n for _, k in ex.variables(e)):
            raise ScenarioError(f"{where}: variable index outside 1..{self.n}", where)

    # derived objects --------------------------------------------------------

    @cached_property
    def eng(self) -> DerivativeEngine:
        return DerivativeEngine(self.engine, self.fd_step)

    @cached_property
    def g(self) -> GLMetric:
        return GLMetric.from_exprs(self.metric, self.n, self.signature)

    @cached_property
    def N(self) -> NonlinearConnection:
        if self.nonlinear == "canonical":
            return canonical_N(self.g, self.eng)
        if not self.nonlinear:
            return NonlinearConnection.zero(self.n)
        fields = [[ScalarField(expr=self.nonlinear.get((j, i), ex.const(0.0)))
                   for i in range(self.n)] for j in range(self.n)]
        return NonlinearConnection(self.n, fields=fields)

    @cached_property
    def weyl_structure(self) -> WeylStructure:
        return WeylStructure(ConformalClass(self.g), [ScalarField(expr=e) for e in self.weyl])

    @property
    def w0(self) -> list[ScalarField]:
        return self.weyl_structure.w0

    @cached_property
    def gauge_fields(self) -> list[ScalarField]:
        return [ScalarField(expr=e) for e in self.gauges]

    @property
    def tol(self) -> float:
        return self.tolerance if self.tolerance is not None else ENGINE_TOLERANCE[self.engine]

    def _evaluable(self, p: PointTM) -> bool:
        try:
            self.g.at(p)
        except ArithmeticError:
            return False
        return True

    @cached_property
    def sample(self) -> list[PointTM]:
        return sample_points(self.box, self.points, self.seed, accept=self._evaluable)

    def replace(self, **changes) -> "Scenario":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return Scenario(**kw)


# -- reports -----------------------------------------------------------------

@dataclass
class Criterion:
    name: str
    value: float
    bound: float
    relation: str = "<="
    witness: PointTM | None = None
    index: tuple | None = None

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        if self.relation == "<=":
            return self.value <= self.bound
        return self.value > self.bound

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "relation": self.relation,
            "bound": self.bound,
            "pass": self.passed,
            "witness_point": self.witness.as_dict() if self.witness else None,
            "index": list(self.index) if self.index is not None else None,
        }


@dataclass
class CheckReport:
    """Outcome of one check.  The first criterion is the headline one."""

    name: str
    criteria: list[Criterion]
    engine: str
    point_count: int
    seed: int
    domain: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.criteria)

    @property
    def worst_residual(self) -> float | None:
        return self.criteria[0].value if self.criteria else None

    @property
    def tolerance(self) -> float | None:
        return self.criteria[0].bound if self.criteria else None

    @property
    def witness_point(self) -> PointTM | None:
        return self.criteria[0].witness if self.criteria else None

    def criterion(self, name: str) -> Criterion:
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        w = self.witness_point
        return {
            "name": self.name,
            "pass": self.passed,
            "worst_residual": self.worst_residual,
            "witness_point": w.as_dict() if w else None,
            "tolerance": self.tolerance,
            "engine": self.engine,
            "point_count": self.point_count,
            "seed": self.seed,
            "domain": self.domain,
            "criteria": [c.to_dict() for c in self.criteria],
            "details": self.details,
            "error": self.error,
        }


def _report(s: Scenario, name: str, criteria, **kw) -> CheckReport:
    return CheckReport(name, list(criteria), s.engine, len(s.sample), s.seed,
                       s.box.describe(), **kw)


class _Max:
    """Running maximum of |array| entries with the point and index where it
    was attained."""

    def __init__(self):
        self.value = 0.0
        self.point = None
        self.index = None

    def update(self, arr, p: PointTM, prefix: tuple = ()):
        a = np.abs(np.asarray(arr, dtype=float))
        if a.size == 0:
            return
        if not np.all(np.isfinite(a)):
            self.value, self.point = math.inf, p
            self.index = prefix
            return
        flat = int(np.argmax(a))
        v = float(a.flat[flat])
        if self.point is None or v > self.value:
            self.value, self.point = v, p
            self.index = prefix + tuple(int(i) for i in np.unravel_index(flat, a.shape))

    def criterion(self, name, bound, relation="<=") -> Criterion:
        return Criterion(name, self.value, bound, relation, self.point, self.index)


def compatibility_residual(conn: FinslerConnection, g: GLMetric, N: NonlinearConnection,
                           w: Sequence[ScalarField], p: PointTM,
                           eng: DerivativeEngine) -> np.ndarray:
    """g_jk|i - w_i g_jk, indexed [j, k, i]."""
    R = h_cov_deriv_02(g.g, conn, N, p, eng)
    return R - np.einsum("jk,i->jki", g.at(p), form_at(w, p))


def _frozen(conn: FinslerConnection, points: Sequence[PointTM]) -> FinslerConnection:
    """Connection whose coefficients were evaluated once per sample point."""
    F = {p: conn.F(p) for p in points}
    C = None if conn.horizontal else {p: conn.C(p) for p in points}
    return FinslerConnection(conn.n, F.__getitem__, None if C is None else C.__getitem__,
                             name=conn.name)


def _symmetry_criteria(conn: FinslerConnection, points) -> list[Criterion]:
    hsym, cmax = _Max(), _Max()
    for p in points:
        F = conn.F(p)
        hsym.update(F - F.transpose(0, 2, 1), p)
        cmax.update(conn.C(p), p)
    return [hsym.criterion("h_symmetry", SYMMETRY_TOLERANCE),
            cmax.criterion("vertical_coefficients", 0.0)]


# -- checks ------------------------------------------------------------------

def check_metric(s: Scenario) -> CheckReport:
    """Symmetry, non-degeneracy and constant signature of the anchor metric."""
    pts = s.sample
    rep = validate(s.g, pts)
    mismatched = [p for p, c in zip(pts, rep.sign_counts) if c != rep.signature]
    dets = np.abs(rep.determinants)
    worst_det = pts[int(np.argmin(dets))]
    criteria = [
        Criterion("signature_mismatches", float(len(mismatched)), 0.0, "<=",
                  mismatched[0] if mismatched else None),
        Criterion("min_abs_det", rep.min_abs_det, NONDEGENERACY_THRESHOLD, ">", worst_det),
        Criterion("symmetry_defect", rep.symmetry_defect, SYMMETRY_TOLERANCE, "<=",
                  rep.witness if rep.symmetry_defect > SYMMETRY_TOLERANCE else None),
    ]
    return _report(s, "metric", criteria, details={
        "signature": list(rep.signature) if rep.signature else None,
        "failures": rep.failures,
    })


def check_cr(s: Scenario) -> CheckReport:
    """Chern-Rund: horizontal metricity and total symmetry.

    ``details["no_half_residual"]`` records the metricity residual of the
    Christoffel formula without its factor 1/2.
    """
    pts, eng = s.sample, s.eng
    conn = chern_rund(s.g, s.N, eng)
    bad = chern_rund(s.g, s.N, eng, prefactor=1.0)
    res, diag = _Max(), _Max()
    for p in pts:
        res.update(h_cov_deriv_02(s.g.g, conn, s.N, p, eng), p)
        diag.update(h_cov_deriv_02(s.g.g, bad, s.N, p, eng), p)
    criteria = [res.criterion("metricity", s.tol)] + _symmetry_criteria(conn, pts)
    return _report(s, "chern-rund", criteria, details={"no_half_residual": diag.value})


def check_compatibility(s: Scenario) -> CheckReport:
    """g_jk|i = w_i g_jk for the Weyl connection of the anchor pair."""
    pts, eng = s.sample, s.eng
    conn = weyl_connection(s.g, s.N, s.w0, eng)
    res = _Max()
    for p in pts:
        res.update(compatibility_residual(conn, s.g, s.N, s.w0, p, eng), p)
    criteria = [res.criterion("compatibility", s.tol)] + _symmetry_criteria(conn, pts)
    return _report(s, "compatibility", criteria)


def check_conformal_invariance(s: Scenario) -> CheckReport:
    """The connection built once from (g0, w0) stays compatible with every
    gauge-transformed pair (exp(2f) g0, w0 + 2df)."""
    pts, eng = s.sample, s.eng
    conn = _frozen(weyl_connection(s.g, s.N, s.w0, eng), pts)
    res = _Max()
    per_gauge = []
    for k, f in enumerate(s.gauge_fields):
        gbar = conformal_scale(s.g, f)
        wbar = shift_form(s.w0, f, eng)
        m = _Max()
        for p in pts:
            r = compatibility_residual(conn, gbar, s.N, wbar, p, eng)
            m.update(r, p)
            res.update(r, p, (k,))
        per_gauge.append({"gauge": f.text(), "residual": m.value})
    return _report(s, "conformal-invariance", [res.criterion("residual", s.tol)],
                   details={"gauges": per_gauge})


def check_vertical_failure(s: Scenario) -> CheckReport:
    """Vertical compatibility is not conformally invariant: the defect equals
    -2 (df/dx^i) gbar_jk, and is non-zero whenever df is."""
    pts, eng = s.sample, s.eng
    match = _Max()
    criteria = []
    per_gauge = []
    for k, f in enumerate(s.gauge_fields):
        gbar = conformal_scale(s.g, f)
        size, dfmax = _Max(), _Max()
        for p in pts:
            D = vertical_weyl_defect(s.g, f, s.w0, p, eng)
            df = np.array([eng.partial(f, "x", i, p) for i in range(s.n)])
            closed = -2.0 * np.einsum("jk,i->jki", gbar.at(p), df)
            match.update(D - closed, p, (k,))
            size.update(D, p, (k,))
            dfmax.update(df, p)
        per_gauge.append({"gauge": f.text(), "max_defect": size.value, "max_df": dfmax.value})
        if dfmax.value > 0.0:
            criteria.append(size.criterion(f"nonzero_defect[{k}]", s.tol, ">"))
    criteria.insert(0, match.criterion("closed_form", s.tol))
    return _report(s, "vertical-failure", criteria, details={"gauges": per_gauge})


def check_closedness(s: Scenario) -> CheckReport:
    """d(w0 + 2df) = d(w0) for every gauge."""
    pts, eng = s.sample, s.eng
    tol = s.tolerance if s.tolerance is not None else CLOSEDNESS_TOLERANCE[s.engine]
    res, base = _Max(), _Max()
    for p in pts:
        base.update(exterior_derivative(s.w0, p, eng), p)
    for k, f in enumerate(s.gauge_fields):
        wbar = shift_form(s.w0, f, eng)
        for p in pts:
            d = exterior_derivative(wbar, p, eng) - exterior_derivative(s.w0, p, eng)
            res.update(d, p, (k,))
    return _report(s, "closedness", [res.criterion("dw_difference", tol)],
                   details={"max_abs_dw0": base.value})


def _y_sensitivity(conn: FinslerConnection, p: PointTM, h0: float) -> np.ndarray:
    out = []
    for l in range(p.n):
        h = h0 * max(1.0, abs(p.y[l]))
        out.append((conn.F(p.shifted("y", l, h)) - conn.F(p.shifted("y", l, -h))) / (2 * h))
    return np.stack(out, axis=-1)


def riemannian_applicable(s: Scenario) -> bool:
    return s.g.y_independent


def check_riemannian_reduction(s: Scenario) -> CheckReport:
    """With w = 0 and the canonical N, the Weyl connection of a y-independent
    metric is its Levi-Civita connection and does not depend on y."""
    pts, eng = s.sample, s.eng
    if not riemannian_applicable(s):
        raise ScenarioError("riemannian reduction needs a y-independent metric", "metric")
    N = canonical_N(s.g, eng)
    zero = [ScalarField.constant(0.0) for _ in range(s.n)]
    conn = weyl_connection(s.g, N, zero, eng)
    diff, ysens = _Max(), _Max()
    for p in pts:
        diff.update(conn.F(p) - levi_civita(s.g, p, eng), p)
        ysens.update(_y_sensitivity(conn, p, s.fd_step), p)
    return _report(s, "riemannian-reduction", [
        diff.criterion("levi_civita_difference", s.tol),
        ysens.criterion("y_sensitivity", Y_SENSITIVITY_TOLERANCE),
    ])


def uniqueness_probe(s: Scenario, epsilon: float = 1e-3,
                     epsilon_small: float = 1e-4) -> CheckReport:
    """First-order evidence for uniqueness: shifting F^1_11 by epsilon (still
    horizontal and h-symmetric) must break compatibility at a rate
    kappa = residual / epsilon > 0.1, linearly in epsilon."""
    pts, eng = s.sample, s.eng
    base = _frozen(weyl_connection(s.g, s.N, s.w0, eng), pts)

    def residual(conn, p):
        return float(np.max(np.abs(compatibility_residual(conn, s.g, s.N, s.w0, p, eng))))

    big = base.perturbed((0, 0, 0), epsilon)
    small = base.perturbed((0, 0, 0), epsilon_small)
    kappa = Criterion("kappa", math.inf, KAPPA_MIN, ">")
    lin = Criterion("linearity_deviation", 0.0, LINEARITY_TOLERANCE, "<=")
    base_max = big_max = 0.0
    for p in pts:
        r0 = residual(base, p)
        rb, rs = residual(big, p), residual(small, p)
        base_max, big_max = max(base_max, r0), max(big_max, rb)
        k = rb / epsilon if epsilon > 0 else 0.0
        if k < kappa.value:
            kappa.value, kappa.witness = k, p
        ratio = (rb * epsilon_small) / (rs * epsilon) if rs > 0 and epsilon > 0 else math.inf
        dev = abs(ratio - 1.0)
        if lin.witness is None or dev > lin.value:
            lin.value, lin.witness = dev, p
    return _report(s, "uniqueness-probe", [kappa, lin], details={
        "epsilon": epsilon, "epsilon_small": epsilon_small,
        "unperturbed_residual": base_max, "perturbed_residual": big_max,
    })


CHECKS: list[tuple[str, Callable[[Scenario], CheckReport]]] = [
    ("metric", check_metric),
    ("chern-rund", check_cr),
    ("compatibility", check_compatibility),
    ("conformal-invariance", check_conformal_invariance),
    ("vertical-failure", check_vertical_failure),
    ("closedness", check_closedness),
    ("riemannian-reduction", check_riemannian_reduction),
    ("uniqueness-probe", uniqueness_probe),
]


def run_all(s: Scenario) -> tuple[list[CheckReport], list[str]]:
    """Run every applicable check.  Returns (reports, skipped check names).

    Arithmetic failures inside a check (e.g. a degenerate metric) turn into
    a failed report rather than an exception.
    """
    reports, skipped = [], []
    for name, fn in CHECKS:
        if name == "riemannian-reduction" and not riemannian_applicable(s):
            skipped.append(name)
            continue
        try:
            reports.append(fn(s))
        except ArithmeticError as err:
            reports.append(_report(s, name, [], error=f"{type(err).__name__}: {err}"))
    return reports, skipped
