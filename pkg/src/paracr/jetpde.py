"""The pair of plane PDEs z_xx = R, z_yy = T on the 6-dimensional jet chart.

Coordinates are (x, y, z, p, q, s) = (x, y, z, z_x, z_y, z_xy).  The module
solves the implicit pair of total derivative fields, exposes the
integrability residual and the hierarchy of scalar invariants attached to
the pair: the point-metricity pair (J1, J2), the torsion pair built from
second s-derivatives, and the contact pair built from third s-derivatives.

All operators are expanded eagerly into explicit coefficient expressions;
nested applications and the shared zero tester both want plain trees.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .expr import (Expr, add, differentiate, evaluate, free_variables, fun,
                   mul, neg, powi, sub, substitute, var)
from .forms import Chart, DiffForm
from .sampling import SampleDomain, ZeroVerdict, is_identically_zero

__all__ = ["JET_COORDS", "JET_CHART", "DegeneratePairError", "PdePair",
           "TotalDerivatives", "total_derivative_fields", "apply_total",
           "integrability_residual", "commutator_residual",
           "point_metricity_invariants", "torsion_obstructions",
           "contact_weyl_invariants", "check_solution_pde",
           "CommutatorReport", "SolutionCheck", "contact_coframe",
           "default_jet_domain"]

JET_COORDS = ("x", "y", "z", "p", "q", "s")
JET_CHART = Chart(JET_COORDS)

_x, _y, _z, _p, _q, _s = (var(n) for n in JET_COORDS)


class DegeneratePairError(ValueError):
    """Raised when 1 - R_s T_s is identically zero on the pair's domain."""


def default_jet_domain(n_samples: int = 20, seed: int = 42) -> SampleDomain:
    return SampleDomain.box(JET_COORDS, 0.3, 1.3, n_samples=n_samples, seed=seed)


@dataclass(frozen=True)
class PdePair:
    """The pair (R, T) plus its derived nondegeneracy guards."""

    R: Expr
    T: Expr
    one_minus_rsts: Expr
    four_minus_rsts: Expr
    rsts: Expr

    @staticmethod
    def create(R: Expr, T: Expr, *, domain: Optional[SampleDomain] = None,
               extra_guards: tuple[Expr, ...] = ()) -> "PdePair":
        bad = (free_variables(R) | free_variables(T)) - set(JET_COORDS)
        if bad:
            raise ValueError(f"R, T may only use the jet coordinates; found {sorted(bad)}")
        rs = differentiate(R, "s")
        ts = differentiate(T, "s")
        rsts = mul(rs, ts)
        one_minus = sub(1, rsts)
        dom = domain if domain is not None else default_jet_domain()
        dom = dom.with_guards(*extra_guards)
        verdict = is_identically_zero(one_minus, dom)
        if verdict.is_zero:
            raise DegeneratePairError("1 - R_s*T_s vanishes identically")
        return PdePair(R=R, T=T, one_minus_rsts=one_minus,
                       four_minus_rsts=sub(4, rsts), rsts=rsts)

    def partial(self, which: str, coord: str) -> Expr:
        return differentiate(self.R if which == "R" else self.T, coord)


@dataclass(frozen=True)
class TotalDerivatives:
    """Solved total derivative data of a nondegenerate pair.

    ``dx_components`` / ``dy_components`` are the six coefficients of the
    vector fields in the coordinate basis (dx, dy, dz, dp, dq, ds).
    """

    dx_t: Expr
    dy_r: Expr
    dx_components: tuple[Expr, ...]
    dy_components: tuple[Expr, ...]

    def d_x(self, f: Expr) -> Expr:
        return apply_total(self, "x", f)

    def d_y(self, f: Expr) -> Expr:
        return apply_total(self, "y", f)


def total_derivative_fields(pp: PdePair) -> TotalDerivatives:
    """Solve the implicit linear pair for D_xT and D_yR and expand the fields."""
    R, T = pp.R, pp.T
    rs = differentiate(R, "s")
    ts = differentiate(T, "s")
    t_row = add(differentiate(T, "x"), mul(_p, differentiate(T, "z")),
                mul(R, differentiate(T, "p")), mul(_s, differentiate(T, "q")))
    r_row = add(differentiate(R, "y"), mul(_q, differentiate(R, "z")),
                mul(_s, differentiate(R, "p")), mul(T, differentiate(R, "q")))
    denom = pp.one_minus_rsts
    dx_t = (t_row + ts * r_row) / denom
    dy_r = (r_row + rs * t_row) / denom
    from .expr import ONE, ZERO
    dx_components = (ONE, ZERO, _p, R, _s, dy_r)
    dy_components = (ZERO, ONE, _q, _s, T, dx_t)
    return TotalDerivatives(dx_t=dx_t, dy_r=dy_r,
                            dx_components=dx_components,
                            dy_components=dy_components)


def apply_total(td: TotalDerivatives, which: str, f: Expr) -> Expr:
    """Directional derivative of f along D_x or D_y."""
    comps = td.dx_components if which == "x" else td.dy_components
    terms = []
    for coeff, coord in zip(comps, JET_COORDS):
        df = differentiate(f, coord)
        terms.append(mul(coeff, df))
    return add(*terms)


def integrability_residual(pp: PdePair,
                           td: Optional[TotalDerivatives] = None) -> Expr:
    """The finite-type condition: D_x^2 T - D_y^2 R."""
    td = td or total_derivative_fields(pp)
    return sub(td.d_x(td.dx_t), td.d_y(td.dy_r))


@dataclass(frozen=True)
class CommutatorReport:
    component_verdicts: tuple[ZeroVerdict, ...]  # dx, dy, dz, dp, dq components
    s_component_verdict: ZeroVerdict  # ds component minus integrability residual

    @property
    def ok(self) -> bool:
        return all(v.is_zero for v in self.component_verdicts) \
            and self.s_component_verdict.is_zero


def commutator_residual(pp: PdePair, dom: Optional[SampleDomain] = None,
                        td: Optional[TotalDerivatives] = None) -> CommutatorReport:
    """Check [D_x, D_y] = (D_x^2 T - D_y^2 R) d/ds semantically.

    The first five components of the bracket must vanish and the ds
    component must equal the integrability residual.
    """
    td = td or total_derivative_fields(pp)
    dom = dom if dom is not None else default_jet_domain()
    dom = dom.with_guards(pp.one_minus_rsts)
    bracket = [sub(td.d_x(yc), td.d_y(xc))
               for xc, yc in zip(td.dx_components, td.dy_components)]
    residual = integrability_residual(pp, td)
    verdicts = tuple(is_identically_zero(c, dom) for c in bracket[:5])
    s_verdict = is_identically_zero(sub(bracket[5], residual), dom)
    return CommutatorReport(component_verdicts=verdicts,
                            s_component_verdict=s_verdict)


def point_metricity_invariants(pp: PdePair,
                               td: Optional[TotalDerivatives] = None
                               ) -> tuple[Expr, Expr]:
    """The polynomial pair whose vanishing admits a conformal metric on the
    solution space; swapping (R,x,p) with (T,y,q) exchanges the two."""
    td = td or total_derivative_fields(pp)
    R, T = pp.R, pp.T
    rs, ts = differentiate(R, "s"), differentiate(T, "s")
    rp, rq = differentiate(R, "p"), differentiate(R, "q")
    tp, tq = differentiate(T, "p"), differentiate(T, "q")
    rsts = pp.rsts
    j1 = add(mul(sub(rsts, 4), td.d_x(rs)),
             mul(rs, sub(mul(2, td.d_y(rs)), mul(rs, td.d_x(ts)))),
             mul(8, rq), neg(mul(6, rq, rs, ts)), mul(4, rp, rs),
             mul(2, powi(rs, 2), tq), neg(mul(2, rp, powi(rs, 2), ts)),
             mul(2, powi(rs, 3), tp))
    j2 = add(mul(sub(rsts, 4), td.d_y(ts)),
             mul(ts, sub(mul(2, td.d_x(ts)), mul(ts, td.d_y(rs)))),
             mul(8, tp), neg(mul(6, rs, tp, ts)), mul(4, tq, ts),
             mul(2, rp, powi(ts, 2)), neg(mul(2, rs, tq, powi(ts, 2))),
             mul(2, rq, powi(ts, 3)))
    return j1, j2


def torsion_obstructions(pp: PdePair) -> tuple[Expr, Expr]:
    """The pair built from R_ss, T_ss; needs 1 - R_s T_s > 0 on the domain.

    Defined modulo the discrete swap of the two null coframe legs; the
    upper sign branch is fixed here, the swap identity
    K1(T,R) * (1+w)^2 = K2(R,T) * T_s^2 covers the other branch.
    """
    rs = differentiate(pp.R, "s")
    rss = differentiate(rs, "s")
    tss = differentiate(differentiate(pp.T, "s"), "s")
    w = fun("sqrt", pp.one_minus_rsts)
    k1 = add(mul(rss, powi(sub(1, w), 2)), mul(tss, powi(rs, 2)))
    k2 = add(mul(rss, powi(add(1, w), 2)), mul(tss, powi(rs, 2)))
    return k1, k2


def contact_weyl_invariants(pp: PdePair) -> tuple[Expr, Expr]:
    """The contact-invariant pair from third s-derivatives; their vanishing
    is equivalent to the vanishing of the two computable Weyl components."""
    rs = differentiate(pp.R, "s")
    rss = differentiate(rs, "s")
    rsss = differentiate(rss, "s")
    ts = differentiate(pp.T, "s")
    tss = differentiate(ts, "s")
    tsss = differentiate(tss, "s")
    product_rate = differentiate(pp.rsts, "s")
    k1 = add(mul(2, rsss, pp.one_minus_rsts), mul(3, rss, product_rate))
    k2 = add(mul(2, tsss, pp.one_minus_rsts), mul(3, tss, product_rate))
    return k1, k2


def contact_coframe(pp: PdePair, td: Optional[TotalDerivatives] = None
                    ) -> dict[str, DiffForm]:
    """The contact forms on the jet chart for the pair.

    lambda = dz - p dx - q dy, nu1 = dp - R dx - s dy,
    nu2 = dq - s dx - T dy, nu3 = ds - D_yR dx - D_xT dy,
    mu1 = dx, mu2 = dy.
    """
    td = td or total_derivative_fields(pp)
    chart = JET_CHART

    def one_form(cx, cy, cz, cp, cq, cs):
        coeff = {}
        for name, c in zip(JET_COORDS, (cx, cy, cz, cp, cq, cs)):
            coeff[name] = c
        return DiffForm.one_form(chart, coeff)

    from .expr import ONE, ZERO
    return {
        "lambda": one_form(neg(_p), neg(_q), ONE, ZERO, ZERO, ZERO),
        "mu1": DiffForm.d_coord(chart, "x"),
        "mu2": DiffForm.d_coord(chart, "y"),
        "nu1": one_form(neg(pp.R), neg(_s), ZERO, ONE, ZERO, ZERO),
        "nu2": one_form(neg(_s), neg(pp.T), ZERO, ZERO, ONE, ZERO),
        "nu3": one_form(neg(td.dy_r), neg(td.dx_t), ZERO, ZERO, ZERO, ONE),
    }


@dataclass(frozen=True)
class SolutionCheck:
    max_residual: float
    samples_used: int
    samples_rejected: int
    worst_point: Optional[dict[str, float]]

    @property
    def ok(self) -> bool:
        return self.samples_used > 0


def check_solution_pde(pp: PdePair, psi: Expr, dom: SampleDomain) -> SolutionCheck:
    """Plug a 4-parameter candidate z = psi(x, y, a0..a3) into both PDEs.

    Jet slots are filled by the derivatives of psi; reports the max abs
    residual of z_xx - R and z_yy - T over the sampled domain.
    """
    psi_x = differentiate(psi, "x")
    psi_y = differentiate(psi, "y")
    binding = {"z": psi, "p": psi_x, "q": psi_y,
               "s": differentiate(psi_x, "y")}
    r1 = sub(differentiate(psi_x, "x"), substitute(pp.R, binding))
    r2 = sub(differentiate(psi_y, "y"), substitute(pp.T, binding))
    from .expr import NumericDomainError
    max_res = 0.0
    worst = None
    used = rejected = 0
    budget = 2 * dom.n_samples
    for pt in dom.raw_points():
        if used + rejected >= budget:
            break
        if not dom.passes_guards(pt):
            rejected += 1
            continue
        try:
            v = max(abs(evaluate(r1, pt)), abs(evaluate(r2, pt)))
        except NumericDomainError:
            rejected += 1
            continue
        used += 1
        if v > max_res:
            max_res, worst = v, pt
        if used == dom.n_samples:
            break
    return SolutionCheck(max_residual=max_res, samples_used=used,
                         samples_rejected=rejected, worst_point=worst)
