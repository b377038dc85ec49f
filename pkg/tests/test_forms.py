import pytest
from paracr.expr import evaluate, mul, parse_expr
from paracr.forms import (Chart, ChartMismatchError, DiffForm,
                          exterior_derivative, numeric_d_check,
                          restrict_to_slice, wedge, wedge_all)
from paracr.jetpde import JET_CHART, PdePair, contact_coframe
from paracr.sampling import SampleDomain, is_identically_zero, sample_points

XY = Chart(("x", "y", "z"))


def dc(chart, name):
    return DiffForm.d_coord(chart, name)


def test_wedge_self_is_zero():
    dx = dc(XY, "x")
    assert wedge(dx, dx).is_structurally_zero()


def test_wedge_antisymmetry():
    dx, dy = dc(XY, "x"), dc(XY, "y")
    left = wedge(dx, dy)
    right = wedge(dy, dx)
    for key, c in left.coeffs.items():
        assert right.coefficient(key) == mul(-1, c) or \
            evaluate(right.coefficient(key), {}) == -evaluate(c, {})


def test_wedge_chart_mismatch():
    other = Chart(("u", "v"))
    with pytest.raises(ChartMismatchError):
        wedge(dc(XY, "x"), dc(other, "u"))


def test_contact_volume_form_for_flat_pair():
    pp = PdePair.create(parse_expr("0"), parse_expr("0"))
    forms = contact_coframe(pp)
    vol = wedge_all(forms["lambda"], forms["mu1"], forms["mu2"],
                    forms["nu1"], forms["nu2"], forms["nu3"])
    assert vol.degree == 6
    (key, coeff), = vol.coeffs.items()
    assert key == tuple(range(6))
    assert evaluate(coeff, {n: 0.37 for n in JET_CHART.coords}) == 1.0


def test_exterior_derivative_of_contact_form():
    pp = PdePair.create(parse_expr("0"), parse_expr("0"))
    lam = contact_coframe(pp)["lambda"]
    dlam = exterior_derivative(lam)
    # d(dz - p dx - q dy) = -dp ^ dx - dq ^ dy = dx ^ dp + dy ^ dq
    ix, iy = JET_CHART.index("x"), JET_CHART.index("y")
    ip, iq = JET_CHART.index("p"), JET_CHART.index("q")
    assert evaluate(dlam.coefficient((min(ix, ip), max(ix, ip))), {}) == 1.0
    assert evaluate(dlam.coefficient((min(iy, iq), max(iy, iq))), {}) == 1.0
    assert len(dlam.coeffs) == 2


def test_d_of_coordinate_differential_vanishes():
    assert exterior_derivative(dc(XY, "x")).is_structurally_zero()


def _random_one_form(chart):
    coeffs = {
        "x": parse_expr("x*y + z^2"),
        "y": parse_expr("exp(x)*z"),
        "z": parse_expr("y^3 - x"),
    }
    return DiffForm.one_form(chart, coeffs)


def test_d_squared_is_zero_semantically():
    a = _random_one_form(XY)
    dda = exterior_derivative(exterior_derivative(a))
    dom = SampleDomain.box(XY.coords, -1, 1)
    for coeff in dda.coeffs.values():
        assert is_identically_zero(coeff, dom).is_zero
    # and for the jet-chart contact forms of a curved pair
    pp = PdePair.create(parse_expr("p*q + s^2"), parse_expr("0"))
    for form in contact_coframe(pp).values():
        dd = exterior_derivative(exterior_derivative(form))
        jdom = SampleDomain.box(JET_CHART.coords, 0.3, 1.3)
        for coeff in dd.coeffs.values():
            assert is_identically_zero(coeff, jdom).is_zero


def test_graded_commutativity():
    # coefficient-wise identity as rational functions; evaluations may
    # differ in the last ulp because product flattening reassociates
    a = _random_one_form(XY)
    b = DiffForm.one_form(XY, {"x": parse_expr("z"), "z": parse_expr("x*x")})
    ab, ba = wedge(a, b), wedge(b, a)
    dom = SampleDomain.box(XY.coords, -1, 1, n_samples=10)
    pts, _ = sample_points(dom)
    for key in set(ab.coeffs) | set(ba.coeffs):
        for pt in pts:
            assert evaluate(ab.coefficient(key), pt) == pytest.approx(
                -evaluate(ba.coefficient(key), pt), rel=1e-14, abs=1e-15)
    two_a = wedge(a, a)  # odd degree squares to zero
    for coeff in two_a.coeffs.values():
        for pt in pts:
            assert evaluate(coeff, pt) == pytest.approx(0.0, abs=1e-15)


def test_leibniz_rule_semantically():
    a = _random_one_form(XY)
    f = DiffForm.function(XY, parse_expr("x*z - y^2"))
    lhs = exterior_derivative(wedge(f, a))
    rhs = wedge(exterior_derivative(f), a) + wedge(f, exterior_derivative(a))
    dom = SampleDomain.box(XY.coords, -1, 1, n_samples=20)
    pts, _ = sample_points(dom)
    for key in set(lhs.coeffs) | set(rhs.coeffs):
        for pt in pts:
            assert evaluate(lhs.coefficient(key), pt) == pytest.approx(
                evaluate(rhs.coefficient(key), pt), rel=1e-8, abs=1e-8)


def test_restrict_contact_form_to_slice():
    pp = PdePair.create(parse_expr("0"), parse_expr("0"))
    lam = contact_coframe(pp)["lambda"]
    sliced = restrict_to_slice(lam, {"x": 0.0, "y": 0.0})
    assert sliced.chart.coords == ("z", "p", "q", "s")
    assert len(sliced.coeffs) == 1
    assert evaluate(sliced.coefficient((0,)), {}) == 1.0  # plain dz


def test_restrict_nu3_to_slice():
    pp = PdePair.create(parse_expr("p*q + s^2"), parse_expr("0"))
    nu3 = contact_coframe(pp)["nu3"]
    sliced = restrict_to_slice(nu3, {"x": 0.7, "y": -0.3})
    assert sliced.chart.coords == ("z", "p", "q", "s")
    # only the ds leg survives
    assert set(sliced.coeffs) == {(3,)}
    assert evaluate(sliced.coefficient((3,)), {}) == 1.0


def test_restrict_substitutes_before_dropping():
    form = DiffForm.one_form(XY, {"x": parse_expr("y"), "y": parse_expr("x")})
    sliced = restrict_to_slice(form, {"y": 2.0})
    assert sliced.chart.coords == ("x", "z")
    assert evaluate(sliced.coefficient((0,)), {"x": 5.0}) == 2.0


def test_numeric_d_check_agrees():
    a = _random_one_form(XY)
    pt = {"x": 0.3, "y": -0.4, "z": 0.9}
    assert numeric_d_check(a, pt) < 1e-6


def test_numeric_d_check_on_contact_form():
    pp = PdePair.create(parse_expr("p*q + s^2"), parse_expr("0"))
    nu3 = contact_coframe(pp)["nu3"]
    pt = {n: 0.6 for n in JET_CHART.coords}
    assert numeric_d_check(nu3, pt) < 1e-6


def test_numeric_d_check_guard_violation():
    form = DiffForm.one_form(XY, {"x": parse_expr("1/y")})
    from paracr.expr import NumericDomainError
    with pytest.raises(NumericDomainError):
        numeric_d_check(form, {"x": 0.1, "y": 0.0, "z": 0.2})
