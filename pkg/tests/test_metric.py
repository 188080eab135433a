import math

import numpy as np
import pytest

from glweyl.expr import parse
from glweyl.manifold import DerivativeEngine, PointTM, SampleBox, ScalarField, sample_points
from glweyl.metric import (
    ConformalClass, GLMetric, SingularMetricError, WeylStructure, conformal_scale,
    exterior_derivative, form_at, inverse, lower_index, raise_index, validate, weyl_form,
)

FD = DerivativeEngine("fd")


def metric(rows, **kw):
    return GLMetric.parse(rows, **kw)


def euclid(n=2):
    return metric([["1" if i == j else "0" for j in range(n)] for i in range(n)])


SPHERE = [["1", "0"], ["0", "sin(x1)^2"]]


def pts(n, seed=1, count=32, lo=-1.0, hi=1.0):
    return sample_points(SampleBox.uniform(n, lo, hi), count, seed)


def form(*texts, n=2):
    return [ScalarField.parse(t, n) for t in texts]


def test_validate_euclidean():
    rep = validate(euclid(), pts(2))
    assert rep.passed and rep.signature == (2, 0)
    assert all(d == 1.0 for d in rep.determinants)


def test_validate_sphere_with_exclusion():
    box = SampleBox(((-3.0, 3.0), (-3.0, 3.0)), ((-1.0, 1.0),) * 2,
                    (parse("sin(x1)", 2),))
    points = sample_points(box, 64, 42)
    rep = validate(metric(SPHERE), points)
    assert rep.passed and rep.signature == (2, 0)
    # eigenvalues are 1 and sin^2(x1) > 0, so det = sin^2(x1)
    for p, d in zip(points, rep.determinants):
        assert d == pytest.approx(math.sin(p.x[0]) ** 2, rel=1e-14)


def test_validate_detects_signature_change():
    points = pts(2, count=64)
    assert {p.x[0] > 0 for p in points} == {True, False}
    rep = validate(metric([["1", "0"], ["0", "x1"]]), points)
    assert not rep.passed
    assert any("signature" in f for f in rep.failures)


def test_validate_detects_asymmetry_and_declared_signature():
    g = GLMetric.from_exprs({(0, 0): parse("1", 2), (0, 1): parse("x1", 2),
                             (1, 0): parse("x1 + 0.001", 2), (1, 1): parse("3", 2)}, 2)
    rep = validate(g, pts(2))
    assert not rep.passed and rep.symmetry_defect == pytest.approx(0.001)
    lorentz = metric([["-1", "0"], ["0", "1"]], signature=(2, 0))
    assert not validate(lorentz, pts(2)).passed
    assert validate(metric([["-1", "0"], ["0", "1"]], signature=(1, 1)), pts(2)).passed


def test_validate_needs_points():
    with pytest.raises(ValueError):
        validate(euclid(), [])


def test_inverse_examples():
    p = PointTM([0.4, -0.2], [0.1, 0.3])
    np.testing.assert_array_equal(inverse(euclid(), p), np.eye(2))
    sphere = metric(SPHERE)
    np.testing.assert_allclose(inverse(sphere, PointTM([math.pi / 2, 0], [0, 0])), np.eye(2))
    # 1 / sin^2(pi/6) = 4
    np.testing.assert_allclose(inverse(sphere, PointTM([math.pi / 6, 0], [0, 0])),
                               np.diag([1.0, 4.0]), rtol=1e-14)


def test_inverse_accuracy_and_singularity():
    g = metric([["2 + y1^2", "x1"], ["x1", "1 + x2^2"]])
    for p in pts(2, lo=-0.5, hi=0.5):
        G = g.at(p)
        M = inverse(g, p)
        assert np.max(np.abs(M @ G - np.eye(2))) <= 1e-12 * np.linalg.cond(G)
    with pytest.raises(SingularMetricError):
        inverse(metric([["1", "0"], ["0", "x1"]]), PointTM([0.0, 0.0], [0.0, 0.0]))


def test_conformal_scale_examples():
    g = euclid()
    p0 = PointTM([0.0, 0.7], [0.2, 0.1])
    p1 = PointTM([1.0, 0.7], [0.2, 0.1])
    zero = conformal_scale(g, ScalarField.parse("0", 2))
    for p in pts(2):
        np.testing.assert_array_equal(zero.at(p), g.at(p))
    f = ScalarField.parse("0.3*x1", 2)
    np.testing.assert_array_equal(conformal_scale(g, f).at(p0), np.eye(2))
    assert conformal_scale(g, f).at(p1)[0, 0] == pytest.approx(math.exp(0.6), rel=1e-15)
    assert abs(math.exp(0.6) - 1.8221188) < 1e-7
    with pytest.raises(ValueError):
        conformal_scale(g, ScalarField.parse("y1", 2))


def test_conformal_scale_inverts():
    g = metric([["1 + y1^2 + x2^2", "0.1*x1"], ["0.1*x1", "2 + y2^2"]])
    f = ScalarField.parse("sin(x1) + 0.5*x2", 2)
    back = conformal_scale(conformal_scale(g, f), ScalarField.parse("-(sin(x1) + 0.5*x2)", 2))
    for p in pts(2):
        assert np.max(np.abs(back.at(p) - g.at(p))) <= 1e-12


def test_conformal_scale_keeps_shared_components():
    g = metric([["1", "x1"], ["x1", "2"]])
    assert g.g[0, 1] is g.g[1, 0]
    gb = conformal_scale(g, ScalarField.parse("x2", 2))
    assert gb.g[0, 1] is gb.g[1, 0]


def weyl(w_texts, g=None):
    g = g or euclid()
    return WeylStructure(ConformalClass(g), form(*w_texts))


def test_weyl_form_examples():
    W = weyl(["0.4", "x1"])
    p = PointTM([0.3, -0.9], [0.5, 0.5])
    np.testing.assert_array_equal(form_at(weyl_form(W, ScalarField.parse("0", 2)), p), [0.4, 0.3])
    np.testing.assert_array_equal(
        form_at(weyl_form(weyl(["0", "0"]), ScalarField.parse("x1", 2)), p), [2.0, 0.0])
    # w0 = (x2, 0), f = x1^2 / 2 -> component 1 = x2 + 2 x1 = x2 + 6 at x1 = 3
    W2 = weyl(["x2", "0"])
    q = PointTM([3.0, 0.25], [0.0, 0.0])
    wbar = form_at(weyl_form(W2, ScalarField.parse("0.5*x1*x1", 2)), q)
    assert wbar[0] == pytest.approx(0.25 + 6.0, rel=1e-15) and wbar[1] == 0.0


def test_weyl_form_with_callable_gauge_uses_engine():
    W = weyl(["x2", "0"])
    f = ScalarField(func=lambda p: 0.5 * p.x[0] ** 2, x_only=True)
    q = PointTM([3.0, 0.25], [0.0, 0.0])
    assert form_at(weyl_form(W, f, FD), q)[0] == pytest.approx(6.25, rel=1e-9)


def test_weyl_structure_rejects_y_dependent_form():
    with pytest.raises(ValueError):
        weyl(["y1", "0"])


def test_raise_index_examples():
    p = PointTM([0.2, 0.1], [0.0, 0.0])
    assert list(raise_index(form("1", "2"), euclid(), p)) == [1.0, 2.0]
    np.testing.assert_allclose(
        raise_index(form("0", "8"), metric([["1", "0"], ["0", "4"]]), p), [0.0, 2.0])
    q = PointTM([math.pi / 6, 0.0], [0.0, 0.0])
    np.testing.assert_allclose(raise_index(form("0", "1"), metric(SPHERE), q), [0.0, 4.0],
                               rtol=1e-14)


def test_raise_then_lower_recovers_form():
    g = metric([["2 + y1^2", "x1*0.3"], ["x1*0.3", "1 + x2^2"]])
    w = form("x1 - x2", "cos(x2)")
    for p in pts(2):
        back = lower_index(raise_index(w, g, p), g, p)
        assert np.max(np.abs(back - form_at(w, p))) <= 1e-10


@pytest.mark.parametrize("eng", [None, FD], ids=["symbolic", "fd"])
def test_closedness_is_gauge_invariant(eng):
    eng = eng or DerivativeEngine()
    W = weyl(["-x2", "x1"])
    gauges = [ScalarField.parse(t, 2) for t in ("0", "x1*x2", "sin(x1)*exp(x2)")]
    tol = 1e-12 if eng.mode == "symbolic" else 1e-6
    for p in pts(2):
        d0 = exterior_derivative(W.w0, p, eng)
        # d(-x2 dx1 + x1 dx2) = 2 dx1^dx2
        np.testing.assert_allclose(d0, [[0.0, 2.0], [-2.0, 0.0]], atol=1e-9)
        for f in gauges:
            assert np.max(np.abs(exterior_derivative(weyl_form(W, f), p, eng) - d0)) <= tol
