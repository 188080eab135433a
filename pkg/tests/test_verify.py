import json

import pytest

from glweyl import expr as ex
from glweyl.connection import weyl_connection
from glweyl.manifold import PointTM
from glweyl.metric import validate
from glweyl.scenario import CATALOG, load_scenario
from glweyl.verify import (
    Scenario, ScenarioError, check_closedness, check_compatibility,
    check_conformal_invariance, check_cr, check_metric, check_riemannian_reduction,
    check_vertical_failure, compatibility_residual, run_all, uniqueness_probe,
)


def scenario(n=2, metric=None, weyl=(), gauges=(), **kw):
    metric = metric or {(i, i): "1" for i in range(n)}
    return Scenario(
        name=kw.pop("name", "test"), n=n,
        metric={k: ex.parse(v, n) for k, v in metric.items()},
        weyl=tuple(ex.parse(t, n) for t in weyl),
        gauges=tuple(ex.parse(t, n) for t in gauges), **kw)


@pytest.fixture(scope="module")
def catalog():
    return {name: load_scenario(name) for name in CATALOG}


def test_scenario_validation():
    with pytest.raises(ScenarioError):
        scenario(gauges=("y1",))
    with pytest.raises(ScenarioError) as err:
        scenario(weyl=("x1", "y2"))
    assert err.value.field == "weyl.w_2"
    with pytest.raises(ScenarioError):
        scenario(metric={(0, 0): "1 + y1^2", (1, 1): "1"}, nonlinear="canonical")
    with pytest.raises(ScenarioError):
        scenario(engine="spectral")
    with pytest.raises(ScenarioError):
        scenario(weyl=("0",))


def test_check_metric_examples(catalog):
    assert check_metric(catalog["euclidean"]).passed
    bad = scenario(metric={(0, 0): "1", (1, 1): "x1"})
    rep = check_metric(bad)
    assert not rep.passed
    assert rep.criterion("signature_mismatches").value > 0
    sphere = check_metric(catalog["sphere"])
    assert sphere.passed and sphere.details["signature"] == [2, 0]


def test_failing_witness_reproduces_standalone():
    s = scenario(metric={(0, 0): "1", (1, 1): "x1"})
    rep = check_metric(s)
    w = rep.criterion("signature_mismatches").witness
    replay = PointTM(*[json.loads(json.dumps(v)) for v in (w.x, w.y)])
    assert not validate(s.g, [s.sample[0], replay]).passed


def test_failing_residual_witness_reproduces():
    # an absurdly tight tolerance makes the compatibility check fail
    s = scenario(metric={(0, 0): "1 + x1^2 + x2^2", (1, 1): "exp(x1)"},
                 weyl=("0.4*x2", "x1"), tolerance=1e-300)
    rep = check_compatibility(s)
    c = rep.criterion("compatibility")
    assert not rep.passed and c.value > 0
    p = PointTM(*[json.loads(json.dumps(list(v))) for v in (c.witness.x, c.witness.y)])
    conn = weyl_connection(s.g, s.N, s.w0)
    r = compatibility_residual(conn, s.g, s.N, s.w0, p, s.eng)
    assert abs(r[c.index]) == c.value


def test_check_cr(catalog):
    flat = check_cr(catalog["euclidean"])
    assert flat.passed and flat.worst_residual == 0.0
    sphere = check_cr(catalog["sphere"])
    assert sphere.passed and sphere.worst_residual < 1e-9
    assert sphere.details["no_half_residual"] > 1e-2


def test_check_compatibility(catalog):
    # w = 0 reduces to the Chern-Rund metricity
    e = check_compatibility(catalog["euclidean"])
    assert e.passed and e.worst_residual == check_cr(catalog["euclidean"]).worst_residual
    assert check_compatibility(catalog["euclid-weyl"]).worst_residual < 1e-12
    assert check_compatibility(catalog["gl-quadratic"]).worst_residual < 1e-9


def test_check_conformal_invariance(catalog):
    s = catalog["euclid-weyl"]
    rep = check_conformal_invariance(s)
    assert rep.passed and rep.worst_residual < 1e-9
    per = {g["gauge"]: g["residual"] for g in rep.details["gauges"]}
    assert per["0"] == check_compatibility(s).worst_residual
    sph = check_conformal_invariance(catalog["sphere"])
    assert sph.passed and sph.worst_residual < 1e-8


def test_conformal_invariance_uses_one_connection():
    # re-deriving the connection per gauge would make the check vacuous
    s = scenario(metric={(0, 0): "1 + x2^2", (1, 1): "2"}, weyl=("0.5", "x1"),
                 gauges=("0", "x1*x2"))
    import glweyl.verify as v

    original = v.weyl_connection
    calls = []

    def counting(*a, **k):
        calls.append(1)
        return original(*a, **k)

    v.weyl_connection = counting
    try:
        assert check_conformal_invariance(s).passed
    finally:
        v.weyl_connection = original
    assert len(calls) == 1


def test_check_vertical_failure(catalog):
    rep = check_vertical_failure(catalog["euclidean"])
    assert rep.passed
    assert rep.criterion("nonzero_defect[1]").value >= 2.0 - 1e-12
    zero_only = check_vertical_failure(scenario(gauges=("0",)))
    assert zero_only.passed and zero_only.worst_residual == 0.0
    assert [c.name for c in zero_only.criteria] == ["closed_form"]
    gl = check_vertical_failure(catalog["gl-quadratic"])
    assert gl.passed and gl.worst_residual < 1e-9


def test_check_closedness():
    s = scenario(weyl=("-x2", "x1"), gauges=("0", "x1*x2", "sin(x1)*cos(x2)"))
    sym = check_closedness(s)
    assert sym.passed and sym.worst_residual <= 1e-12
    assert sym.details["max_abs_dw0"] == pytest.approx(2.0)
    fd = check_closedness(s.replace(engine="fd"))
    assert fd.passed and fd.worst_residual <= 1e-6


def test_check_riemannian_reduction(catalog):
    e = check_riemannian_reduction(catalog["euclidean"])
    assert e.passed and e.worst_residual == 0.0
    s = check_riemannian_reduction(catalog["sphere"])
    assert s.passed
    assert s.criterion("y_sensitivity").value < 1e-9
    with pytest.raises(ScenarioError):
        check_riemannian_reduction(catalog["gl-quadratic"])


def test_uniqueness_probe(catalog):
    s = catalog["euclid-weyl"]
    zero = uniqueness_probe(s, epsilon=0.0, epsilon_small=1e-4)
    assert zero.details["perturbed_residual"] == zero.details["unperturbed_residual"] < 1e-12
    assert not zero.passed
    rep = uniqueness_probe(s, 1e-3)
    assert rep.passed
    # g_11|1 picks up -2 g_11 eps, so kappa = 2 on the flat metric
    assert rep.criterion("kappa").value == pytest.approx(2.0, rel=1e-9)
    assert rep.criterion("linearity_deviation").value <= 0.05


def test_run_all_reports_errors_as_failures():
    s = scenario(metric={(0, 0): "1", (1, 1): "x1 - x1"})
    reports, skipped = run_all(s)
    assert not all(r.passed for r in reports)
    assert any(r.error for r in reports)
    assert skipped == []


def test_run_all_skips_reduction_for_y_dependent_metric(catalog):
    reports, skipped = run_all(catalog["gl-quadratic"])
    assert skipped == ["riemannian-reduction"]
    assert all(r.passed for r in reports)


def test_report_dict_fields(catalog):
    reports, _ = run_all(catalog["sphere"])
    for r in reports:
        d = r.to_dict()
        for key in ("name", "pass", "worst_residual", "witness_point", "tolerance",
                    "engine", "point_count", "seed"):
            assert key in d
        json.dumps(d)


def test_checks_are_deterministic(catalog):
    a = [r.to_dict() for r in run_all(load_scenario("gl-quadratic"))[0]]
    b = [r.to_dict() for r in run_all(load_scenario("gl-quadratic"))[0]]
    assert json.dumps(a) == json.dumps(b)
