import math

import numpy as np
import pytest

from paracr.curvature import curvature_point_data, curvature_tensors
from paracr.expr import Const, evaluate, parse_expr, sub
from paracr.jetpde import total_derivative_fields
from paracr.ppwave import (GaugeBlowUpError, PpWaveFamily,
                           conformal_flatness_residuals, ricci_flat_gauge,
                           verify_ppwave, z_invariants)
from paracr.sampling import is_identically_zero

CUBIC = PpWaveFamily(r=parse_expr("s^3"), t=parse_expr("s"),
                     s_lo=-0.4, s_hi=0.4)


def test_family_validation():
    with pytest.raises(ValueError):
        PpWaveFamily(r=parse_expr("s + x"), t=parse_expr("0"),
                     s_lo=-1, s_hi=1)
    with pytest.raises(ValueError):
        # r' t' = 1 at s = 0 violates the interval guard
        PpWaveFamily(r=parse_expr("s"), t=parse_expr("s"), s_lo=-1, s_hi=1)


# ---------------------------------------------------------------------------
# the third-order scalars
# ---------------------------------------------------------------------------

def test_scalars_vanish_for_quadratic_r():
    f = PpWaveFamily(r=parse_expr("s^2"), t=parse_expr("0"), s_lo=-1, s_hi=1)
    z1, z2 = z_invariants(f)
    assert isinstance(z1, Const) and z1.value == 0
    assert isinstance(z2, Const) and z2.value == 0


def test_scalar_value_for_cubic_r():
    f = PpWaveFamily(r=parse_expr("s^3"), t=parse_expr("0"), s_lo=-1, s_hi=1)
    z1, z2 = z_invariants(f)
    assert evaluate(z1, {"s": 0.37}) == pytest.approx(-3.0)
    assert isinstance(z2, Const) and z2.value == 0


def test_scalars_vanish_for_trivial_family():
    f = PpWaveFamily(r=parse_expr("0"), t=parse_expr("0"), s_lo=-1, s_hi=1)
    z1, z2 = z_invariants(f)
    assert isinstance(z1, Const) and z1.value == 0
    assert isinstance(z2, Const) and z2.value == 0


def test_flatness_residuals():
    lin = PpWaveFamily(r=parse_expr("1/2 + 2*s"), t=parse_expr("3 - s/5"),
                       s_lo=-1, s_hi=1)
    res_r, res_t = conformal_flatness_residuals(lin)
    assert isinstance(res_r, Const) and res_r.value == 0
    assert isinstance(res_t, Const) and res_t.value == 0
    res_r, _ = conformal_flatness_residuals(CUBIC)
    assert evaluate(res_r, {"s": 0.0}) == pytest.approx(6.0)


def test_total_derivatives_annihilate_scalars():
    pp = CUBIC.to_pde_pair()
    td = total_derivative_fields(pp)
    dom = CUBIC.jet_domain()
    z1, z2 = z_invariants(CUBIC)
    for f in (CUBIC.r, CUBIC.t, z1, z2):
        assert is_identically_zero(td.d_x(f), dom).is_zero
        assert is_identically_zero(td.d_y(f), dom).is_zero


# ---------------------------------------------------------------------------
# the conformal gauge
# ---------------------------------------------------------------------------

def test_gauge_trivial_family_stays_zero():
    f = PpWaveFamily(r=parse_expr("0"), t=parse_expr("0"), s_lo=-1, s_hi=1)
    g = ricci_flat_gauge(f, -1.0, 0.0, 0.0, (-1.0, 1.0), 1e-2)
    assert max(abs(v) for v in g.h) == 0.0


def test_gauge_vanishes_when_t_is_constant():
    f = PpWaveFamily(r=parse_expr("s^2"), t=parse_expr("0"), s_lo=-1, s_hi=1)
    g = ricci_flat_gauge(f, -1.0, 0.0, 0.0, (-1.0, 1.0), 1e-2)
    assert max(abs(v) for v in g.h) == 0.0


def test_gauge_blow_up_detected():
    with pytest.raises(GaugeBlowUpError):
        ricci_flat_gauge(CUBIC, -0.4, 0.0, 0.0, (-0.4, 0.4), 1e-3)


def test_gauge_interpolation_out_of_range():
    g = ricci_flat_gauge(CUBIC, 0.0, 0.0, 0.0, (-0.2, 0.2), 1e-3)
    with pytest.raises(ValueError):
        g.h_at(0.3)


def test_rk4_step_refinement_order():
    ends = []
    for step in (4e-3, 2e-3, 1e-3):
        g = ricci_flat_gauge(CUBIC, 0.0, 0.0, 0.0, (-0.4, 0.4), step)
        ends.append(g.h[-1])
    e_coarse = abs(ends[0] - ends[2])
    e_fine = abs(ends[1] - ends[2])
    assert e_fine > 0
    observed_order = math.log2(e_coarse / e_fine)
    assert observed_order > 3.7


def test_gauge_interpolants_are_consistent():
    g = ricci_flat_gauge(CUBIC, 0.0, 0.0, 0.0, (-0.4, 0.4), 1e-3)
    for s in (-0.33, -0.1, 0.0, 0.2217, 0.395):
        # grid nodes are reproduced exactly by the Hermite interpolant
        assert g.h_at(g.s_grid[10]) == pytest.approx(g.h[10], abs=1e-15)
        # the interpolated derivative matches a central difference of h
        d = 1e-4
        fd = (g.h_at(s + d) - g.h_at(s - d)) / (2 * d)
        assert g.hp_at(s) == pytest.approx(fd, rel=1e-6, abs=1e-8)
        assert g.hpp_at(s) == g.rhs(s, g.hp_at(s))


# ---------------------------------------------------------------------------
# full verification of the slice metric
# ---------------------------------------------------------------------------

def test_trivial_family_report_is_all_zero():
    f = PpWaveFamily(r=parse_expr("0"), t=parse_expr("0"), s_lo=-1, s_hi=1)
    rep = verify_ppwave(f, None, n_samples=10)
    assert rep.ricci_max == 0.0
    assert rep.weyl_max_abs == 0.0
    assert rep.nabla_null_max == 0.0


def test_ungauged_cubic_family():
    rep = verify_ppwave(CUBIC, None, n_samples=15)
    assert rep.ricci_max > 1.0  # not Ricci flat before the gauge
    assert rep.weyl_max_abs > 1e-3
    assert abs(abs(rep.weyl_fit_constant) - 1.0) < 1e-9
    assert rep.weyl_fit_max_rel_error < 1e-6
    assert rep.quad_weyl_max < 1e-7 * rep.weyl_max_abs ** 2
    assert rep.nabla_null_max < 1e-9


def test_gauged_cubic_family_is_ricci_flat():
    gauge = ricci_flat_gauge(CUBIC, 0.0, 0.0, 0.0, (-0.4, 0.4), 1e-3)
    rep = verify_ppwave(CUBIC, gauge, n_samples=15)
    assert rep.ricci_max < 1e-6
    assert rep.nabla_null_max < 1e-6
    assert rep.weyl_fit_max_rel_error < 1e-6  # mixed components unchanged
    assert rep.quad_weyl_max < 1e-7 * max(rep.weyl_max_abs, 1e-9) ** 2


def test_both_scalars_nonzero_family():
    f = PpWaveFamily(r=parse_expr("s^3"), t=parse_expr("s^2"),
                     s_lo=-0.4, s_hi=0.4)
    rep = verify_ppwave(f, None, n_samples=15)
    z1, z2 = z_invariants(f)
    assert abs(evaluate(z1, {"s": 0.2})) > 0.1
    assert abs(evaluate(z2, {"s": 0.2})) > 0.1
    # one global sign constant fits both component families
    assert abs(abs(rep.weyl_fit_constant) - 1.0) < 1e-9
    assert rep.weyl_fit_max_rel_error < 1e-6


def test_lorentzian_family_keeps_pattern_and_type():
    # 1 - r' t' < 0 throughout; the null-type structure persists
    f = PpWaveFamily(r=parse_expr("2*s + s^3"), t=parse_expr("s"),
                     s_lo=-0.4, s_hi=0.4)
    rep = verify_ppwave(f, None, n_samples=12)
    assert abs(abs(rep.weyl_fit_constant) - 1.0) < 1e-9
    assert rep.weyl_fit_max_rel_error < 1e-6
    assert rep.weyl_max_abs > 0.5
    assert rep.quad_weyl_max < 1e-7 * rep.weyl_max_abs ** 2
    assert rep.nabla_null_max < 1e-9


def test_gauge_argument_validation():
    with pytest.raises(ValueError):
        ricci_flat_gauge(CUBIC, 1.0, 0.0, 0.0, (-0.4, 0.4), 1e-3)
    with pytest.raises(ValueError):
        ricci_flat_gauge(CUBIC, 0.0, 0.0, 0.0, (-0.4, 0.4), -1e-3)


def test_linear_families_are_conformally_flat():
    f = PpWaveFamily(r=parse_expr("1/2 + 2*s"), t=parse_expr("3 - s/5"),
                     s_lo=-1, s_hi=1)
    z1, z2 = z_invariants(f)
    assert isinstance(z1, Const) and z1.value == 0
    assert isinstance(z2, Const) and z2.value == 0
    rep = verify_ppwave(f, None, n_samples=15)
    assert rep.weyl_max_abs < 1e-7


def test_numerically_flat_family_has_vanishing_weyl():
    """Integrate the conformal-flatness equation for a family with equal
    legs and check the slice metric is Weyl flat along the grid."""
    # state u = (r', r''):  r''' = -3 r'' (r'^2)' / (2 (1 - r'^2))
    def rhs(u):
        rp, rpp = u
        return np.array([rpp, -3 * rpp * (2 * rp * rpp) / (2 * (1 - rp * rp))])

    step, n = 1e-3, 300
    grid = [np.array([0.5, 0.3])]
    for _ in range(n):
        u = grid[-1]
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * step * k1)
        k3 = rhs(u + 0.5 * step * k2)
        k4 = rhs(u + step * k3)
        grid.append(u + step * (k1 + 2 * k2 + 2 * k3 + k4) / 6)
    worst = 0.0
    for u in grid[:: n // 10]:
        rp, rpp = u
        rppp = rhs(u)[1]
        g = np.zeros((4, 4))
        g[0, 3] = g[3, 0] = 1 - rp * rp
        g[1, 1] = g[2, 2] = rp
        g[1, 2] = g[2, 1] = -1.0
        dg = np.zeros((4, 4, 4))
        dg[3, 0, 3] = dg[3, 3, 0] = -2 * rp * rpp
        dg[3, 1, 1] = dg[3, 2, 2] = rpp
        d2g = np.zeros((4, 4, 4, 4))
        d2g[3, 3, 0, 3] = d2g[3, 3, 3, 0] = -2 * (rpp * rpp + rp * rppp)
        d2g[3, 3, 1, 1] = d2g[3, 3, 2, 2] = rppp
        data = curvature_point_data(g, dg, d2g)
        worst = max(worst, float(np.max(np.abs(data["weyl_lowered"]))))
    assert worst < 1e-6


def test_verify_matches_symbolic_slice_metric():
    """Dual route: the grid-free pointwise evaluator agrees with the fully
    symbolic curvature pipeline on the ungauged slice metric."""
    from paracr.curvature import Metric4
    from paracr.forms import Chart
    from paracr.expr import const, mul
    from paracr.ppwave import _SliceMetricEvaluator
    rp, tp = parse_expr("3*s^2"), parse_expr("1")
    one = sub(parse_expr("1"), mul(rp, tp))
    Z = const(0)
    entries = [[Z] * 4 for _ in range(4)]
    entries[0][3] = entries[3][0] = one
    entries[1][1] = tp
    entries[1][2] = entries[2][1] = const(-1)
    entries[2][2] = rp
    g = Metric4(chart=Chart(("z", "p", "q", "s")),
                entries=tuple(tuple(r) for r in entries))
    rep_sym = curvature_tensors(g)
    evaluator = _SliceMetricEvaluator(CUBIC, None)
    for s in (-0.3, 0.05, 0.28):
        pt = {"z": 0.1, "p": 0.2, "q": 0.3, "s": s}
        data = evaluator.tensors_at(s)
        assert np.allclose(data["ricci"], rep_sym.ricci_at(pt), atol=1e-10)
        assert np.allclose(data["weyl_lowered"],
                           rep_sym.weyl_lowered_at(pt), atol=1e-10)
