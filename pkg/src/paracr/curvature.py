"""Conformal metric representatives on the jet chart and their curvature.

Builds the two degenerate 6x6 representatives attached to a nondegenerate
PDE pair, checks degeneracy along the total derivative fields and the
conformal transformation law under them, restricts to a transversal slice,
and runs a Levi-Civita pipeline (Christoffel, Riemann, Ricci, scalar,
Weyl) on the resulting 4-metrics.

Curvature is symbolic by default.  When expression sizes pass a node
budget the report switches to a pointwise numeric backend fed by exact
symbolic first and second derivatives of the metric entries; the fully
contracted quadratic Weyl scalar is always evaluated pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .expr import (Expr, add, const, differentiate, div, evaluate, fun,
                   mul, neg, node_count, powi, sub, substitute)
from .forms import Chart, DiffForm
from .jetpde import (JET_CHART, JET_COORDS, PdePair, TotalDerivatives,
                     total_derivative_fields)
from .sampling import SampleDomain, is_identically_zero

__all__ = ["GuardError", "DegenerateMetric", "Metric4", "CurvatureReport",
           "build_metric", "degeneracy_and_descent_check", "descend",
           "curvature_tensors", "conformal_rescale", "curvature_point_data",
           "DescentReport", "signature_counts"]

DEFAULT_NODE_BUDGET = 200_000


class GuardError(ValueError):
    """A formula's nondegeneracy guard fails identically on the domain."""


def _sym_pair(u: Sequence[Expr], w: Sequence[Expr]) -> list[list[Expr]]:
    """Matrix of the symmetric product u w + w u of two covectors."""
    n = len(u)
    return [[add(mul(u[i], w[j]), mul(w[i], u[j])) for j in range(n)]
            for i in range(n)]


def _scaled(matrix: list[list[Expr]], factor: Expr) -> list[list[Expr]]:
    return [[mul(factor, c) for c in row] for row in matrix]


def _msum(*mats: list[list[Expr]]) -> list[list[Expr]]:
    n = len(mats[0])
    return [[add(*[m[i][j] for m in mats]) for j in range(n)] for i in range(n)]


@dataclass(frozen=True)
class DegenerateMetric:
    """Symmetric 6x6 representative of the conformal class on the jet chart."""

    entries: tuple[tuple[Expr, ...], ...]
    provenance: str  # "mne1" | "mne2"
    scale_scalar: Expr  # v (mne1) or v' (mne2)
    descent_form: DiffForm  # the 1-form paired with the contact form
    pair: PdePair
    totals: TotalDerivatives


@dataclass(frozen=True)
class Metric4:
    chart: Chart
    entries: tuple[tuple[Expr, ...], ...]
    conformal_history: tuple[Expr, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.chart.dim != 4 or len(self.entries) != 4:
            raise ValueError("Metric4 needs a 4-coordinate chart and 4x4 entries")

    def entry(self, i: int, j: int) -> Expr:
        return self.entries[i][j]

    def at(self, pt: Mapping[str, float]) -> np.ndarray:
        return np.array([[evaluate(c, pt) for c in row] for row in self.entries])


def build_metric(pp: PdePair, which: str, *,
                 domain: Optional[SampleDomain] = None) -> DegenerateMetric:
    """Construct one of the two degenerate conformal representatives.

    ``which`` selects the representative defined off R_s T_s = 4 ("mne1")
    or off R_s T_s = 0 ("mne2"); the corresponding guard must not vanish
    identically on the domain.
    """
    from .jetpde import contact_coframe, default_jet_domain

    td = total_derivative_fields(pp)
    dom = domain if domain is not None else default_jet_domain()
    dom = dom.with_guards(pp.one_minus_rsts)
    R, T = pp.R, pp.T
    rs, ts = differentiate(R, "s"), differentiate(T, "s")
    rp, rq = differentiate(R, "p"), differentiate(R, "q")
    tp, tq = differentiate(T, "p"), differentiate(T, "q")
    forms = contact_coframe(pp, td)
    lam = forms["lambda"]
    nu1, nu2, nu3 = forms["nu1"], forms["nu2"], forms["nu3"]
    lam_v, nu1_v, nu2_v, nu3_v = (f.covector() for f in (lam, nu1, nu2, nu3))

    dxrs, dyrs = td.d_x(rs), td.d_y(rs)
    dxts, dyts = td.d_x(ts), td.d_y(ts)

    if which == "mne1":
        guard_verdict = is_identically_zero(pp.four_minus_rsts, dom)
        if guard_verdict.is_zero:
            raise GuardError("4 - R_s*T_s vanishes identically; mne1 undefined")
        c1 = add(mul(4, dxts), neg(mul(2, ts, dyrs)), mul(4, rp, ts),
                 neg(mul(2, powi(rs, 2), tp, ts)), neg(mul(2, rs, tq, ts)),
                 mul(4, rq, powi(ts, 2)))
        c2 = add(mul(4, dyrs), neg(mul(2, rs, dxts)), mul(4, rs, tq),
                 neg(mul(2, rq, rs, powi(ts, 2))), neg(mul(2, rp, rs, ts)),
                 mul(4, powi(rs, 2), tp))
        c3 = mul(2, pp.four_minus_rsts, sub(pp.rsts, 1))
        v = _metric_scale_v(pp, td)
        omega_v = tuple(add(mul(c1, nu1_v[i]), mul(c2, nu2_v[i]),
                            mul(c3, nu3_v[i]), mul(v, lam_v[i]))
                        for i in range(6))
        quadratic = _msum(
            _scaled(_sym_pair(nu1_v, nu1_v), div(ts, 2)),
            _scaled(_sym_pair(nu1_v, nu2_v), const(-1)),
            _scaled(_sym_pair(nu2_v, nu2_v), div(rs, 2)))
        entries = _msum(_sym_pair(lam_v, omega_v),
                        _scaled(quadratic, mul(2, sub(pp.rsts, 4))))
        omega_form = DiffForm(JET_CHART, 1,
                              {(i,): omega_v[i] for i in range(6)})
        scale_scalar = v
    elif which == "mne2":
        guard_verdict = is_identically_zero(pp.rsts, dom)
        if guard_verdict.is_zero:
            raise GuardError("R_s*T_s vanishes identically; mne2 undefined")
        a1 = div(add(neg(dyts), mul(2, tp), neg(mul(rs, tp, ts)), mul(tq, ts)), ts)
        a2 = div(add(neg(dxrs), mul(2, rq), neg(mul(rq, rs, ts)), mul(rp, rs)), rs)
        vprime = _metric_scale_vprime(pp, td)
        lam_coeff = neg(div(vprime, mul(2, powi(rs, 3), ts)))
        omega_v = tuple(add(mul(a1, nu1_v[i]), mul(a2, nu2_v[i]),
                            mul(pp.one_minus_rsts, nu3_v[i]),
                            mul(lam_coeff, lam_v[i]))
                        for i in range(6))
        quadratic = _msum(
            _scaled(_sym_pair(nu1_v, nu1_v), div(ts, 2)),
            _scaled(_sym_pair(nu1_v, nu2_v), const(-1)),
            _scaled(_sym_pair(nu2_v, nu2_v), div(rs, 2)))
        entries = _msum(_sym_pair(lam_v, omega_v), quadratic)
        omega_form = DiffForm(JET_CHART, 1,
                              {(i,): omega_v[i] for i in range(6)})
        scale_scalar = vprime
    else:
        raise ValueError(f"unknown representative {which!r}")

    return DegenerateMetric(entries=tuple(tuple(row) for row in entries),
                            provenance=which, scale_scalar=scale_scalar,
                            descent_form=omega_form, pair=pp, totals=td)


def _metric_scale_v(pp: PdePair, td: TotalDerivatives) -> Expr:
    """The lambda-coefficient scalar of the first representative (as v)."""
    R, T = pp.R, pp.T
    rs, ts = differentiate(R, "s"), differentiate(T, "s")
    rp, rq, rz = (differentiate(R, c) for c in ("p", "q", "z"))
    tp, tq, tz = (differentiate(T, c) for c in ("p", "q", "z"))
    dxts, dyrs = td.d_x(ts), td.d_y(rs)
    dxtq, dxtp = td.d_x(tq), td.d_x(tp)
    dytq, dytp = td.d_y(tq), td.d_y(tp)
    dyrq, dyrp = td.d_y(rq), td.d_y(rp)
    dy2rs = td.d_y(dyrs)
    two_v = add(
        mul(8, dxtq), neg(mul(4, dy2rs)), mul(4, dxts, dyrs),
        mul(4, rs, dxtp), neg(mul(4, rs, dytq)), neg(mul(4, powi(rs, 2), dytp)),
        mul(8, rq, tp), neg(mul(14, rs, tp, dyrs)), mul(4, rp, rs, tp),
        mul(3, powi(rs, 2), tp, dxts), neg(mul(6, powi(rs, 3), powi(tp, 2))),
        neg(mul(4, tq, dyrs)),
        mul(4, rs, tq, dxts), neg(mul(6, powi(rs, 2), tp, tq)),
        mul(8, ts, dyrq), neg(mul(2, powi(dyrs, 2), ts)), mul(4, rp, ts, dyrs),
        neg(mul(2, rs, ts, dxtq)),
        mul(rs, ts, dy2rs), mul(4, rs, ts, dyrp), neg(mul(powi(rs, 2), ts, dxtp)),
        mul(powi(rs, 2), ts, dytq), mul(powi(rs, 3), ts, dytp), mul(8, rz, ts),
        mul(2, rq, rs, tp, ts), mul(2, rp, powi(rs, 2), tp, ts),
        mul(8, rq, tq, ts), neg(mul(3, rs, tq, ts, dyrs)),
        mul(4, rp, rs, tq, ts),
        neg(mul(2, powi(rs, 3), tp, tq, ts)), neg(mul(2, powi(rs, 2), powi(tq, 2), ts)),
        mul(4, rq, powi(ts, 2), dyrs), neg(mul(2, rs, powi(ts, 2), dyrq)),
        neg(mul(powi(rs, 2), powi(ts, 2), dyrp)), neg(mul(2, rs, rz, powi(ts, 2))),
        mul(2, rq, powi(rs, 2), tp, powi(ts, 2)), mul(2, rq, rs, tq, powi(ts, 2)),
        mul(8, rs, tz), neg(mul(2, powi(rs, 2), ts, tz)))
    return div(two_v, 2)


def _metric_scale_vprime(pp: PdePair, td: TotalDerivatives) -> Expr:
    """The lambda-coefficient scalar of the second representative (v')."""
    R, T = pp.R, pp.T
    rs, ts = differentiate(R, "s"), differentiate(T, "s")
    rp, rq, rz = (differentiate(R, c) for c in ("p", "q", "z"))
    tp, tq, tz = (differentiate(T, c) for c in ("p", "q", "z"))
    dxrs, dyts = td.d_x(rs), td.d_y(ts)
    dxdyrs = td.d_x(td.d_y(rs))
    dyrq, dyrp = td.d_y(rq), td.d_y(rp)
    dxtq = td.d_x(tq)
    return add(
        mul(2, powi(rs, 2), dxrs, dyts), neg(mul(4, rq, powi(rs, 2), dyts)),
        neg(mul(rp, powi(rs, 3), dyts)), neg(mul(4, powi(rs, 2), tp, dxrs)),
        mul(8, rq, powi(rs, 2), tp), mul(2, rp, powi(rs, 3), tp),
        mul(2, powi(dxrs, 2), ts), neg(mul(8, rq, ts, dxrs)),
        mul(8, powi(rq, 2), ts), neg(mul(2, rp, rs, ts, dxrs)),
        mul(4, rp, rq, rs, ts), neg(mul(powi(rs, 2), ts, dxdyrs)),
        mul(2, powi(rs, 2), ts, dyrq), mul(powi(rs, 3), ts, dxtq),
        mul(powi(rs, 3), ts, dyrp), neg(mul(rq, powi(rs, 3), tp, ts)),
        neg(mul(3, powi(rs, 2), tq, ts, dxrs)), mul(6, rq, powi(rs, 2), tq, ts),
        mul(rp, powi(rs, 3), tq, ts), mul(2, rq, rs, powi(ts, 2), dxrs),
        neg(mul(4, powi(rq, 2), rs, powi(ts, 2))), mul(powi(rs, 3), rz, powi(ts, 2)),
        mul(powi(rs, 4), ts, tz))


def _lie_derivative(entries, components) -> list[list[Expr]]:
    """Lie derivative of a symmetric 0,2-tensor along a vector field."""
    n = len(entries)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            terms = []
            for k, coord in enumerate(JET_COORDS):
                terms.append(mul(components[k],
                                 differentiate(entries[i][j], coord)))
            for k in range(n):
                terms.append(mul(entries[k][j],
                                 differentiate(components[k], JET_COORDS[i])))
                terms.append(mul(entries[i][k],
                                 differentiate(components[k], JET_COORDS[j])))
            row.append(add(*terms))
        out.append(row)
    return out


@dataclass(frozen=True)
class DescentReport:
    degeneracy_residual: float
    lie_residual: float
    samples_used: int

    @property
    def ok(self) -> bool:
        return self.samples_used > 0


def degeneracy_and_descent_check(m: DegenerateMetric, dom: SampleDomain
                                 ) -> DescentReport:
    """Verify the representative is degenerate along both total derivative
    fields and Lie-transforms conformally along them.

    Reports max abs residuals of g(D, .) and of L_D g - alpha(D) g over
    the sampled domain, with alpha the provenance-specific factor.  Only
    meaningful for pairs satisfying the metricity conditions.
    """
    pp, td = m.pair, m.totals
    provenance_guard = pp.four_minus_rsts if m.provenance == "mne1" else pp.rsts
    dom = dom.with_guards(pp.one_minus_rsts, provenance_guard)
    alphas = _descent_factors(m)
    residual_exprs: list[Expr] = []
    lie_exprs: list[Expr] = []
    for comps, alpha in zip((td.dx_components, td.dy_components), alphas):
        for j in range(6):
            residual_exprs.append(add(*[mul(comps[i], m.entries[i][j])
                                        for i in range(6)]))
        lie = _lie_derivative(m.entries, comps)
        for i in range(6):
            for j in range(i, 6):
                lie_exprs.append(sub(lie[i][j], mul(alpha, m.entries[i][j])))
    points, _ = _accepted_points(dom)
    deg_max = lie_max = 0.0
    for pt in points:
        for e in residual_exprs:
            deg_max = max(deg_max, abs(evaluate(e, pt)))
        for e in lie_exprs:
            lie_max = max(lie_max, abs(evaluate(e, pt)))
    return DescentReport(degeneracy_residual=deg_max, lie_residual=lie_max,
                         samples_used=len(points))


def _descent_factors(m: DegenerateMetric) -> tuple[Expr, Expr]:
    pp, td = m.pair, m.totals
    R, T = pp.R, pp.T
    rs, ts = differentiate(R, "s"), differentiate(T, "s")
    rp, rq = differentiate(R, "p"), differentiate(R, "q")
    tp, tq = differentiate(T, "p"), differentiate(T, "q")
    if m.provenance == "mne2":
        alpha_x = div(sub(td.d_x(rs), mul(2, rq)), rs)
        alpha_y = div(sub(td.d_y(ts), mul(2, tp)), ts)
        return alpha_x, alpha_y
    dxts, dyrs = td.d_x(ts), td.d_y(rs)
    pref = powi(pp.four_minus_rsts, -2)
    alpha_x = mul(pref, add(
        mul(8, dyrs), mul(16, rp), neg(mul(8, rs, dxts)),
        mul(8, powi(rs, 2), tp), mul(8, rs, tq), neg(mul(24, rq, ts)),
        neg(mul(4, rs, ts, dyrs)), neg(mul(16, rp, rs, ts)),
        mul(3, powi(rs, 2), ts, dxts), neg(mul(4, powi(rs, 3), tp, ts)),
        neg(mul(4, powi(rs, 2), tq, ts)), mul(10, rq, rs, powi(ts, 2)),
        mul(4, rp, powi(rs, 2), powi(ts, 2))))
    alpha_y = mul(pref, add(
        mul(8, dxts), mul(16, tq), neg(mul(8, ts, dyrs)),
        mul(8, rq, powi(ts, 2)), mul(8, rp, ts), neg(mul(24, rs, tp)),
        neg(mul(4, rs, ts, dxts)), neg(mul(16, rs, tq, ts)),
        mul(3, rs, powi(ts, 2), dyrs), neg(mul(4, rq, rs, powi(ts, 3))),
        neg(mul(4, rp, rs, powi(ts, 2))), mul(10, powi(rs, 2), tp, ts),
        mul(4, powi(rs, 2), tq, powi(ts, 2))))
    return alpha_x, alpha_y


def _accepted_points(dom: SampleDomain) -> tuple[list[dict[str, float]], int]:
    from .sampling import sample_points
    return sample_points(dom)


def descend(m: DegenerateMetric, slice_point: Mapping[str, float], *,
            dom: Optional[SampleDomain] = None) -> Metric4:
    """Restrict to the transversal {x = x0, y = y0}; chart (z, p, q, s).

    Samples the determinant of the restricted matrix and refuses when it is
    degenerate at more than 10% of the accepted samples.
    """
    if set(slice_point) != {"x", "y"}:
        raise ValueError("slice must fix exactly x and y")
    sub_chart = Chart(("z", "p", "q", "s"))
    binding = {n: const(v) for n, v in slice_point.items()}
    keep = [JET_COORDS.index(c) for c in sub_chart.coords]
    entries = tuple(tuple(substitute(m.entries[i][j], binding) for j in keep)
                    for i in keep)
    g4 = Metric4(chart=sub_chart, entries=entries)
    check_dom = dom if dom is not None else SampleDomain.box(
        sub_chart.coords, 0.3, 1.3, n_samples=20)
    check_dom = check_dom.with_guards(
        substitute(m.pair.one_minus_rsts, binding))
    from .expr import NumericDomainError
    points, _ = _accepted_points(check_dom)
    if not points:
        raise GuardError("no valid samples on the slice")
    bad = 0
    for pt in points:
        try:
            det = np.linalg.det(g4.at(pt))
        except NumericDomainError:
            bad += 1
            continue
        if abs(det) < 1e-12:
            bad += 1
    if bad > 0.1 * len(points):
        raise GuardError(
            f"descended metric degenerate at {bad}/{len(points)} samples")
    return g4


def conformal_rescale(g: Metric4, phi: Expr) -> Metric4:
    """Multiply by exp(2 phi) entrywise; history records phi."""
    factor = fun("exp", mul(2, phi))
    entries = tuple(tuple(mul(factor, c) for c in row) for row in g.entries)
    return Metric4(chart=g.chart, entries=entries,
                   conformal_history=g.conformal_history + (phi,))


# ---------------------------------------------------------------------------
# Levi-Civita pipeline
# ---------------------------------------------------------------------------

def _adjugate_det(entries) -> tuple[list[list[Expr]], Expr]:
    """Adjugate and determinant of a symbolic 4x4 matrix by cofactors."""
    idx = range(4)

    def minor3(rows, cols):
        (r0, r1, r2), (c0, c1, c2) = rows, cols
        def e(i, j):
            return entries[i][j]
        return add(
            mul(e(r0, c0), sub(mul(e(r1, c1), e(r2, c2)), mul(e(r1, c2), e(r2, c1)))),
            neg(mul(e(r0, c1), sub(mul(e(r1, c0), e(r2, c2)), mul(e(r1, c2), e(r2, c0))))),
            mul(e(r0, c2), sub(mul(e(r1, c0), e(r2, c1)), mul(e(r1, c1), e(r2, c0)))))

    cof = [[None] * 4 for _ in idx]
    for i in idx:
        rows = tuple(r for r in idx if r != i)
        for j in idx:
            cols = tuple(c for c in idx if c != j)
            m = minor3(rows, cols)
            cof[i][j] = m if (i + j) % 2 == 0 else neg(m)
    det = add(*[mul(entries[0][j], cof[0][j]) for j in idx])
    adj = [[cof[j][i] for j in idx] for i in idx]  # transpose of cofactors
    return adj, det


class CurvatureReport:
    """Curvature data of a 4-metric with a pointwise evaluation API.

    In symbolic mode the tensors are expression trees; in numeric mode only
    the metric entries and their exact first and second derivatives are
    symbolic and the tensors are assembled pointwise.
    """

    def __init__(self, metric: Metric4, mode: str, symbolic: Optional[dict],
                 entry_derivs: tuple):
        self.metric = metric
        self.mode = mode
        self._symbolic = symbolic
        self._entry_derivs = entry_derivs

    # -- symbolic access ----------------------------------------------------
    @property
    def christoffel(self):
        return self._symbolic["christoffel"] if self._symbolic else None

    @property
    def riemann(self):
        return self._symbolic["riemann"] if self._symbolic else None

    @property
    def ricci(self):
        return self._symbolic["ricci"] if self._symbolic else None

    @property
    def scalar(self):
        return self._symbolic["scalar"] if self._symbolic else None

    @property
    def weyl_lowered(self):
        return self._symbolic["weyl_lowered"] if self._symbolic else None

    @property
    def weyl_mixed(self):
        return self._symbolic["weyl_mixed"] if self._symbolic else None

    def riemann_is_structurally_zero(self) -> bool:
        if not self._symbolic:
            return False
        from .expr import Const
        riem = self._symbolic["riemann"]
        for i in range(4):
            for j in range(4):
                for k in range(4):
                    for l in range(4):
                        c = riem[i][j][k][l]
                        if not (isinstance(c, Const) and c.value == 0):
                            return False
        return True

    # -- pointwise access ----------------------------------------------------
    def _point_data(self, pt: Mapping[str, float]):
        g_e, dg_e, d2g_e = self._entry_derivs
        g = np.array([[evaluate(c, pt) for c in row] for row in g_e])
        dg = np.array([[[evaluate(c, pt) for c in row] for row in block]
                       for block in dg_e])
        d2g = np.array([[[[evaluate(c, pt) for c in row] for row in block]
                         for block in plane] for plane in d2g_e])
        return curvature_point_data(g, dg, d2g)

    def christoffel_at(self, pt) -> np.ndarray:
        return self._point_data(pt)["christoffel"]

    def riemann_at(self, pt) -> np.ndarray:
        return self._point_data(pt)["riemann"]

    def ricci_at(self, pt) -> np.ndarray:
        return self._point_data(pt)["ricci"]

    def scalar_at(self, pt) -> float:
        return self._point_data(pt)["scalar"]

    def weyl_lowered_at(self, pt) -> np.ndarray:
        return self._point_data(pt)["weyl_lowered"]

    def weyl_mixed_at(self, pt) -> np.ndarray:
        return self._point_data(pt)["weyl_mixed"]

    def quad_weyl_at(self, pt) -> float:
        return self._point_data(pt)["quad_weyl"]


def curvature_point_data(g: np.ndarray, dg: np.ndarray, d2g: np.ndarray) -> dict:
    """Assemble curvature tensors at a point from g, dg[k,i,j] = d_k g_ij
    and d2g[k,l,i,j] = d_k d_l g_ij."""
    ginv = np.linalg.inv(g)
    first = (np.einsum("jlk->ljk", dg) + np.einsum("klj->ljk", dg)
             - np.einsum("ljk->ljk", dg))
    gamma = 0.5 * np.einsum("il,ljk->ijk", ginv, first)
    # dginv[m,i,l] = -ginv dg[m] ginv
    dginv = -np.einsum("ia,mab,bl->mil", ginv, dg, ginv)
    sym_part = (np.einsum("mjlk->mljk", d2g)
                + np.einsum("mklj->mljk", d2g)
                - np.einsum("mljk->mljk", d2g))
    dgamma = 0.5 * (np.einsum("mil,ljk->mijk", dginv, first)
                    + np.einsum("il,mljk->mijk", ginv, sym_part))
    riem = (np.einsum("kilj->ijkl", dgamma) - np.einsum("likj->ijkl", dgamma)
            + np.einsum("ika,alj->ijkl", gamma, gamma)
            - np.einsum("ila,akj->ijkl", gamma, gamma))
    ricci = np.einsum("ijil->jl", riem)
    scalar = float(np.einsum("jl,jl->", ginv, ricci))
    riem_low = np.einsum("ia,ajkl->ijkl", g, riem)
    weyl = riem_low.copy()
    for (i, j, k, l), _ in np.ndenumerate(weyl):
        weyl[i, j, k, l] -= 0.5 * (g[i, k] * ricci[j, l] - g[i, l] * ricci[j, k]
                                   - g[j, k] * ricci[i, l] + g[j, l] * ricci[i, k])
        weyl[i, j, k, l] += (scalar / 6.0) * (g[i, k] * g[j, l] - g[i, l] * g[j, k])
    weyl_mixed = np.einsum("ia,ajkl->ijkl", ginv, weyl)
    weyl_up = np.einsum("ia,jb,kc,ld,abcd->ijkl", ginv, ginv, ginv, ginv, weyl)
    quad = float(np.einsum("ijkl,ijkl->", weyl, weyl_up))
    return {"christoffel": gamma, "riemann": riem, "ricci": ricci,
            "scalar": scalar, "riemann_lowered": riem_low,
            "weyl_lowered": weyl, "weyl_mixed": weyl_mixed, "quad_weyl": quad}


def curvature_tensors(g: Metric4, *, node_budget: int = DEFAULT_NODE_BUDGET
                      ) -> CurvatureReport:
    """Levi-Civita pipeline on a symbolic 4-metric.

    Falls back to the pointwise numeric backend when the symbolic tensors
    would exceed ``node_budget`` nodes.
    """
    coords = g.chart.coords
    entries = g.entries
    dg = tuple(tuple(tuple(differentiate(entries[i][j], c) for j in range(4))
                     for i in range(4)) for c in coords)
    d2g = tuple(tuple(tuple(tuple(differentiate(dg[k][i][j], coords[l])
                                  for j in range(4)) for i in range(4))
                      for l in range(4)) for k in range(4))
    # order indices: dg[k][i][j] = d_k g_ij ; d2g[k][l][i][j]
    entry_derivs = (entries, dg, d2g)

    size = sum(node_count(entries[i][j]) for i in range(4) for j in range(4))
    symbolic = None
    if size <= node_budget:
        symbolic = _symbolic_curvature(g, dg, node_budget)
    mode = "symbolic" if symbolic is not None else "numeric"
    return CurvatureReport(metric=g, mode=mode, symbolic=symbolic,
                           entry_derivs=entry_derivs)


def _symbolic_curvature(g: Metric4, dg, node_budget: int) -> Optional[dict]:
    coords = g.chart.coords
    entries = g.entries
    adj, det = _adjugate_det(entries)

    def budget(exprs) -> bool:
        total = sum(node_count(e) for e in exprs)
        return total <= node_budget

    # Gamma[i][j][k] as (sum_l adj[i][l] * (...)) / (2 det)
    two_det = mul(2, det)
    gamma = [[[None] * 4 for _ in range(4)] for _ in range(4)]
    for i in range(4):
        for j in range(4):
            for k in range(j, 4):
                num = add(*[mul(adj[i][l],
                                add(dg[j][l][k], dg[k][l][j], neg(dg[l][j][k])))
                            for l in range(4)])
                val = div(num, two_det)
                gamma[i][j][k] = val
                gamma[i][k][j] = val
    flat_gamma = [gamma[i][j][k] for i in range(4) for j in range(4) for k in range(4)]
    if not budget(flat_gamma):
        return None

    riem = [[[[None] * 4 for _ in range(4)] for _ in range(4)] for _ in range(4)]
    dgamma_cache: dict[tuple[int, int, int, int], Expr] = {}

    def dgam(m, i, j, k):
        key = (m, i, j, k)
        if key not in dgamma_cache:
            dgamma_cache[key] = differentiate(gamma[i][j][k], coords[m])
        return dgamma_cache[key]

    for i in range(4):
        for j in range(4):
            for k in range(4):
                for l in range(4):
                    term = add(dgam(k, i, l, j), neg(dgam(l, i, k, j)),
                               *[mul(gamma[i][k][a], gamma[a][l][j])
                                 for a in range(4)],
                               *[neg(mul(gamma[i][l][a], gamma[a][k][j]))
                                 for a in range(4)])
                    riem[i][j][k][l] = term
    flat_riem = [riem[i][j][k][l] for i in range(4) for j in range(4)
                 for k in range(4) for l in range(4)]
    if not budget(flat_riem):
        return None

    ricci = [[add(*[riem[i][j][i][l] for i in range(4)]) for l in range(4)]
             for j in range(4)]
    ginv_entry = [[div(adj[i][j], det) for j in range(4)] for i in range(4)]
    scalar = add(*[mul(ginv_entry[j][l], ricci[j][l])
                   for j in range(4) for l in range(4)])
    riem_low = [[[[add(*[mul(entries[i][a], riem[a][j][k][l]) for a in range(4)])
                   for l in range(4)] for k in range(4)] for j in range(4)]
                for i in range(4)]
    weyl = [[[[None] * 4 for _ in range(4)] for _ in range(4)] for _ in range(4)]
    sixth = div(scalar, 6)
    for i in range(4):
        for j in range(4):
            for k in range(4):
                for l in range(4):
                    correction = mul(div(const(1), 2), add(
                        mul(entries[i][k], ricci[j][l]),
                        neg(mul(entries[i][l], ricci[j][k])),
                        neg(mul(entries[j][k], ricci[i][l])),
                        mul(entries[j][l], ricci[i][k])))
                    trace_part = mul(sixth, sub(mul(entries[i][k], entries[j][l]),
                                                mul(entries[i][l], entries[j][k])))
                    weyl[i][j][k][l] = add(riem_low[i][j][k][l],
                                           neg(correction), trace_part)
    weyl_mixed = [[[[add(*[mul(ginv_entry[i][a], weyl[a][j][k][l])
                           for a in range(4)])
                     for l in range(4)] for k in range(4)] for j in range(4)]
                  for i in range(4)]
    return {"christoffel": gamma, "riemann": riem, "ricci": ricci,
            "scalar": scalar, "weyl_lowered": weyl, "weyl_mixed": weyl_mixed,
            "ginv": ginv_entry, "det": det}


def signature_counts(g: Metric4, pt: Mapping[str, float]) -> tuple[int, int]:
    """(positive, negative) eigenvalue counts of the metric at a point."""
    vals = np.linalg.eigvalsh(g.at(pt))
    return int(np.sum(vals > 0)), int(np.sum(vals < 0))
