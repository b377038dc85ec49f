import pytest

from paracr.expr import (add, differentiate, evaluate, fun, mul, parse_expr,
                         powi, sub, substitute)
from paracr.jetpde import (JET_COORDS, DegeneratePairError, PdePair,
                           check_solution_pde, commutator_residual,
                           contact_weyl_invariants, default_jet_domain,
                           integrability_residual, point_metricity_invariants,
                           torsion_obstructions, total_derivative_fields)
from paracr.sampling import SampleDomain, is_identically_zero


def make_pair(r_text, t_text, **kw):
    return PdePair.create(parse_expr(r_text), parse_expr(t_text), **kw)


DOM = default_jet_domain()


# ---------------------------------------------------------------------------
# total derivatives
# ---------------------------------------------------------------------------

def test_flat_pair_fields():
    td = total_derivative_fields(make_pair("0", "0"))
    assert evaluate(td.dx_t, {n: 0.5 for n in JET_COORDS}) == 0.0
    assert evaluate(td.dy_r, {n: 0.5 for n in JET_COORDS}) == 0.0
    # D_x = dx + p dz + s dq for the flat pair
    names = dict(zip(JET_COORDS, td.dx_components))
    pt = {n: 0.5 for n in JET_COORDS}
    assert evaluate(names["x"], pt) == 1.0
    assert evaluate(names["z"], pt) == 0.5
    assert evaluate(names["q"], pt) == 0.5
    assert evaluate(names["p"], pt) == 0.0


def test_s_only_pair_annihilates_s_functions():
    pp = make_pair("s^2 + s", "3*s")
    td = total_derivative_fields(pp)
    dom = DOM.with_guards(pp.one_minus_rsts)
    for f in (pp.R, pp.T, parse_expr("s^4 - s")):
        assert is_identically_zero(td.d_x(f), dom).is_zero
        assert is_identically_zero(td.d_y(f), dom).is_zero


def test_solved_pair_for_curved_example():
    pp = make_pair("p*q + s^2", "0")
    td = total_derivative_fields(pp)
    assert is_identically_zero(td.dx_t, DOM).is_zero
    assert is_identically_zero(sub(td.dy_r, parse_expr("s*q")), DOM).is_zero


def test_apply_total_on_coordinates():
    pp = make_pair("p*q + s^2", "0")
    td = total_derivative_fields(pp)
    assert is_identically_zero(sub(td.d_x(parse_expr("z")), parse_expr("p")),
                               DOM).is_zero
    assert is_identically_zero(sub(td.d_y(parse_expr("p")), parse_expr("s")),
                               DOM).is_zero


def test_defining_relations_hold_semantically():
    for r_text, t_text in [("p*q + s^2", "0"), ("s^2", "z + s"),
                           ("p*s", "q*s")]:
        pp = make_pair(r_text, t_text)
        td = total_derivative_fields(pp)
        T, R = pp.T, pp.R
        p, q, s = parse_expr("p"), parse_expr("q"), parse_expr("s")
        rel_x = sub(td.dx_t, add(
            differentiate(T, "x"), mul(p, differentiate(T, "z")),
            mul(R, differentiate(T, "p")), mul(s, differentiate(T, "q")),
            mul(td.dy_r, differentiate(T, "s"))))
        rel_y = sub(td.dy_r, add(
            differentiate(R, "y"), mul(q, differentiate(R, "z")),
            mul(s, differentiate(R, "p")), mul(T, differentiate(R, "q")),
            mul(td.dx_t, differentiate(R, "s"))))
        dom = DOM.with_guards(pp.one_minus_rsts).with_samples(20)
        assert is_identically_zero(rel_x, dom, tol=1e-8).is_zero
        assert is_identically_zero(rel_y, dom, tol=1e-8).is_zero


def test_degenerate_pair_rejected():
    # R = s, T = s gives R_s T_s = 1 identically
    with pytest.raises(DegeneratePairError):
        make_pair("s", "s")


# ---------------------------------------------------------------------------
# integrability and the commutator
# ---------------------------------------------------------------------------

def test_integrability_flat():
    assert is_identically_zero(integrability_residual(make_pair("0", "0")),
                               DOM).is_zero


def test_integrability_holds_for_linear_z_pair():
    # z_xx = z & z_yy = 0 has the 4-parameter solution (c1 + c2 y) e^x
    # + (c3 + c4 y) e^-x, so the residual vanishes
    pp = make_pair("z", "0")
    assert is_identically_zero(integrability_residual(pp), DOM).is_zero


def test_integrability_obstruction_witnessed():
    pp = make_pair("y*z", "0")
    v = is_identically_zero(integrability_residual(pp), DOM)
    assert v.is_nonzero


def test_commutator_structure_flat():
    rep = commutator_residual(make_pair("0", "0"), DOM)
    assert rep.ok


def test_commutator_structure_curved():
    rep = commutator_residual(make_pair("p*q + s^2", "0"), DOM)
    assert rep.ok


# ---------------------------------------------------------------------------
# the invariant hierarchy
# ---------------------------------------------------------------------------

def test_metricity_invariants_flat():
    j1, j2 = point_metricity_invariants(make_pair("0", "0"))
    assert is_identically_zero(j1, DOM).is_zero
    assert is_identically_zero(j2, DOM).is_zero


def test_metricity_invariants_s_only():
    pp = make_pair("s^3", "s")
    dom = DOM.with_guards(pp.one_minus_rsts)
    j1, j2 = point_metricity_invariants(pp)
    assert is_identically_zero(j1, dom).is_zero
    assert is_identically_zero(j2, dom).is_zero


def test_metricity_invariant_value():
    # with T = 0 the first invariant reduces to 2 p s for R = p s
    pp = make_pair("p*s", "0")
    j1, j2 = point_metricity_invariants(pp)
    assert is_identically_zero(sub(j1, parse_expr("2*p*s")), DOM).is_zero
    assert evaluate(j1, {"x": 0, "y": 0, "z": 0, "p": 1, "q": 0, "s": 1}) == 2.0


def test_torsion_pair_values():
    pp = make_pair("s^2", "0")
    k1, k2 = torsion_obstructions(pp)
    pt = {n: 0.8 for n in JET_COORDS}
    assert evaluate(k1, pt) == pytest.approx(0.0, abs=1e-12)
    assert evaluate(k2, pt) == pytest.approx(8.0, rel=1e-12)


def test_torsion_vanishes_when_second_derivatives_do():
    # both second s-derivatives vanish and R_s T_s = 1/6 < 1
    pp = make_pair("s/2 + p", "s/3")
    k1, k2 = torsion_obstructions(pp)
    assert is_identically_zero(k1, DOM).is_zero
    assert is_identically_zero(k2, DOM).is_zero


def test_torsion_outside_real_branch_is_inconclusive():
    # R_s T_s = 6 s > 1 on the box, so the square root rejects every sample
    pp = make_pair("s^2", "3*s")
    k1, _ = torsion_obstructions(pp)
    assert is_identically_zero(k1, DOM).status == "inconclusive"


def test_contact_invariants():
    pp = make_pair("s^2", "0")
    c1, c2 = contact_weyl_invariants(pp)
    assert is_identically_zero(c1, DOM).is_zero
    assert is_identically_zero(c2, DOM).is_zero
    pp = make_pair("s^3", "0")
    c1, _ = contact_weyl_invariants(pp)
    pt = {n: 0.8 for n in JET_COORDS}
    assert evaluate(c1, pt) == pytest.approx(12.0)
    pp = make_pair("0", "0")
    c1, c2 = contact_weyl_invariants(pp)
    assert is_identically_zero(c1, DOM).is_zero
    assert is_identically_zero(c2, DOM).is_zero


def _swap(e):
    return substitute(e, {"x": parse_expr("y"), "y": parse_expr("x"),
                          "p": parse_expr("q"), "q": parse_expr("p")})


def test_swap_symmetry_of_invariants():
    """Exchanging (R, x, p) with (T, y, q) swaps the two members of each
    invariant pair; the torsion pair swaps up to the exact factor
    K1(T,R) (1+w)^2 = K2(R,T) T_s^2."""
    r_text, t_text = "p*s + s^2/10", "q + s/2"
    pp = make_pair(r_text, t_text)
    swapped = PdePair.create(_swap(parse_expr(t_text)), _swap(parse_expr(r_text)))
    dom = DOM.with_guards(pp.one_minus_rsts, pp.four_minus_rsts, pp.rsts)

    j1, j2 = point_metricity_invariants(pp)
    j1s, j2s = point_metricity_invariants(swapped)
    assert is_identically_zero(sub(_swap(j1s), j2), dom, tol=1e-6).is_zero
    assert is_identically_zero(sub(_swap(j2s), j1), dom, tol=1e-6).is_zero

    c1, c2 = contact_weyl_invariants(pp)
    c1s, c2s = contact_weyl_invariants(swapped)
    assert is_identically_zero(sub(_swap(c1s), c2), dom, tol=1e-6).is_zero
    assert is_identically_zero(sub(_swap(c2s), c1), dom, tol=1e-6).is_zero

    k1, k2 = torsion_obstructions(pp)
    k1s, _ = torsion_obstructions(swapped)
    w = fun("sqrt", pp.one_minus_rsts)
    ts = differentiate(pp.T, "s")
    identity = sub(mul(_swap(k1s), powi(add(1, w), 2)), mul(k2, powi(ts, 2)))
    assert is_identically_zero(identity, dom, tol=1e-6).is_zero


# ---------------------------------------------------------------------------
# solution checking
# ---------------------------------------------------------------------------

SOL_DOM = SampleDomain.box(("x", "y", "a0", "a1", "a2", "a3"), 0.3, 1.1,
                           n_samples=30, seed=5)


def test_flat_general_solution():
    pp = make_pair("0", "0")
    psi = parse_expr("a0 + a1*x + a2*y + a3*x*y")
    chk = check_solution_pde(pp, psi, SOL_DOM)
    assert chk.samples_used == 30
    assert chk.max_residual == 0.0


def test_solution_witnesses_failure():
    pp = make_pair("0", "0")
    chk = check_solution_pde(pp, parse_expr("x^2"), SOL_DOM)
    assert chk.max_residual == pytest.approx(2.0)


def test_si_solution_residual_small():
    from paracr.models import si_family
    fam = si_family(1)
    # keep the family's denominator well away from zero: near it the
    # residual's cancellation noise grows like the cube of 1/denominator
    dom = SOL_DOM.with_guards(*fam.solution_guards).with_guard_floor(0.05)
    chk = check_solution_pde(fam.pair, fam.psi, dom)
    assert chk.samples_used > 0
    assert chk.max_residual < 1e-8
