"""The flat model end to end, plus the one-parameter curved family.

Contains the 11-form coframe on the extended flat-model manifold together
with its constant-coefficient structure equations, the tangency/null
correspondence on the 4-parameter solution space, and the kappa-family of
PDE pairs whose solution spaces carry constant curvature metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .expr import Expr, add, const, div, evaluate, mul, neg, powi, sub, var
from .forms import Chart, DiffForm, exterior_derivative, wedge
from .curvature import Metric4
from .jetpde import PdePair, default_jet_domain
from .sampling import SampleDomain, sample_points

__all__ = ["FLAT_CHART", "flat_coframe", "flat_bilinear_entries",
           "structure_residual_forms", "verify_flat_structure_equations",
           "StructureVerification", "newman_tangency", "TangencyResult",
           "si_family", "SiFamily", "default_flat_domain"]

FLAT_COORDS = ("x", "y", "a0", "a1", "a2", "a3",
               "a", "f11", "f22", "f31", "f32")
FLAT_CHART = Chart(FLAT_COORDS)


def default_flat_domain(n_samples: int = 30, seed: int = 42) -> SampleDomain:
    guards = (var("a"), var("f11"), var("f22"))
    return SampleDomain.box(FLAT_COORDS, -1.3, 1.3, n_samples=n_samples,
                            seed=seed, guards=guards, guard_floor=0.1)


def flat_coframe() -> dict[str, DiffForm]:
    """The 11 coframe 1-forms of the flat model on the extended chart.

    The log differentials of the fiber coordinates are expanded so every
    coefficient is rational in the chart; the forms are then regular
    wherever a, f11, f22 are nonzero.
    """
    ch = FLAT_CHART
    x, y = var("x"), var("y")
    a, f11, f22, f31, f32 = (var(n) for n in ("a", "f11", "f22", "f31", "f32"))

    def d(name: str) -> DiffForm:
        return DiffForm.d_coord(ch, name)

    da0, da1, da2, da3 = d("a0"), d("a1"), d("a2"), d("a3")
    dx, dy = d("x"), d("y")
    da, df11, df22, df31, df32 = d("a"), d("f11"), d("f22"), d("f31"), d("f32")

    f11f22 = mul(f11, f22)
    u1 = sub(f11f22, mul(x, a, f32))  # f11 f22 - x a f32
    u2 = sub(f11f22, mul(y, a, f31))  # f11 f22 - y a f31

    theta1 = (da0 + da2.scale(y)).scale(neg(div(mul(a, f32), f22))) \
        + (da1 + da3.scale(y)).scale(div(u1, f22))
    theta2 = (da0 + da1.scale(x)).scale(neg(div(mul(a, f31), f11))) \
        + (da2 + da3.scale(x)).scale(div(u2, f11))
    theta3 = da0.scale(neg(div(mul(a, f31, f32), f11f22))) \
        + da1.scale(div(mul(f31, u1), f11f22)) \
        + da2.scale(div(mul(f32, u2), f11f22)) \
        + da3.scale(neg(div(mul(u1, u2), mul(a, f11f22))))
    theta4 = (da0 + da1.scale(x) + da2.scale(y)
              + da3.scale(mul(x, y))).scale(a)

    omega2 = dx.scale(div(a, f11))
    omega3 = dy.scale(div(a, f22))
    omega1 = df11.scale(div(1, mul(2, f11))) - df22.scale(div(1, mul(2, f22))) \
        + (dy.scale(f31) - dx.scale(f32)).scale(div(a, f11f22))
    omega4 = da.scale(div(f31, mul(a, f11))) + df31.scale(div(1, f11)) \
        - df11.scale(div(f31, powi(f11, 2))) - df22.scale(div(f31, f11f22)) \
        + dy.scale(div(mul(a, powi(f31, 2)), mul(powi(f11, 2), f22)))
    omega5 = da.scale(div(f32, mul(a, f22))) + df32.scale(div(1, f22)) \
        - df11.scale(div(f32, f11f22)) - df22.scale(div(f32, powi(f22, 2))) \
        + dx.scale(div(mul(a, powi(f32, 2)), mul(f11, powi(f22, 2))))
    omega6 = df11.scale(div(1, mul(2, f11))) + df22.scale(div(1, mul(2, f22))) \
        - da.scale(div(1, a)) \
        - (dy.scale(f31) + dx.scale(f32)).scale(div(a, f11f22))
    a_form = df11.scale(neg(div(1, f11))) + df22.scale(neg(div(1, f22)))

    return {"theta1": theta1, "theta2": theta2, "theta3": theta3,
            "theta4": theta4, "omega1": omega1, "omega2": omega2,
            "omega3": omega3, "omega4": omega4, "omega5": omega5,
            "omega6": omega6, "A": a_form}


def structure_residual_forms(coframe: Mapping[str, DiffForm]
                             ) -> dict[str, DiffForm]:
    """LHS - RHS of the eleven constant-coefficient structure equations."""
    t1, t2, t3, t4 = (coframe[k] for k in ("theta1", "theta2", "theta3", "theta4"))
    o1, o2, o3, o4, o5, o6 = (coframe[k] for k in
                              ("omega1", "omega2", "omega3", "omega4",
                               "omega5", "omega6"))
    A = coframe["A"]
    half = Fraction(1, 2)
    half_a = A.scale(const(half))

    def dminus(form, rhs):
        return exterior_derivative(form) - rhs

    return {
        "d_theta1": dminus(t1, wedge(o1 - half_a, t1) - wedge(o3, t3)
                           - wedge(o5, t4)),
        "d_theta2": dminus(t2, wedge(-o1 - half_a, t2) - wedge(o2, t3)
                           - wedge(o4, t4)),
        "d_theta3": dminus(t3, wedge(o4, t1) + wedge(o5, t2)
                           + wedge(o6 - half_a, t3)),
        "d_theta4": dminus(t4, wedge(o2, t1) + wedge(o3, t2)
                           + wedge(-o6 - half_a, t4)),
        "d_omega1": dminus(o1, wedge(o2, o5) - wedge(o3, o4)),
        "d_omega2": dminus(o2, wedge(o2, o1 + o6)),
        "d_omega3": dminus(o3, wedge(o1 - o6, o3)),
        "d_omega4": dminus(o4, wedge(o4, o1 - o6)),
        "d_omega5": dminus(o5, wedge(o1 + o6, o5)),
        "d_omega6": dminus(o6, wedge(o2, o5) + wedge(o3, o4)),
        "d_A": exterior_derivative(A),
    }


@dataclass(frozen=True)
class StructureVerification:
    max_residuals: dict[str, float]
    samples_used: int

    @property
    def worst(self) -> float:
        return max(self.max_residuals.values())

    def ok(self, tol: float = 1e-8) -> bool:
        return self.samples_used > 0 and self.worst < tol


def verify_flat_structure_equations(dom: Optional[SampleDomain] = None,
                                    coframe: Optional[Mapping[str, DiffForm]] = None
                                    ) -> StructureVerification:
    """Sample every residual coefficient of the structure equations.

    Passing a mutated coframe turns this into a sensitivity check: a
    perturbation of any single form must push some residual far above the
    flat-model noise floor.
    """
    dom = dom if dom is not None else default_flat_domain()
    coframe = coframe if coframe is not None else flat_coframe()
    residuals = structure_residual_forms(coframe)
    points, _ = sample_points(dom)
    out: dict[str, float] = {}
    for name, form in residuals.items():
        worst = 0.0
        for coeff in form.coeffs.values():
            for pt in points:
                worst = max(worst, abs(evaluate(coeff, pt)))
        out[name] = worst
    return StructureVerification(max_residuals=out, samples_used=len(points))


def flat_bilinear_entries(coframe: Mapping[str, DiffForm]
                          ) -> list[list[Expr]]:
    """Entries of 2 (theta1 theta2 + theta3 theta4) on the extended chart."""
    n = FLAT_CHART.dim
    v1 = coframe["theta1"].covector()
    v2 = coframe["theta2"].covector()
    v3 = coframe["theta3"].covector()
    v4 = coframe["theta4"].covector()
    return [[add(mul(v1[i], v2[j]), mul(v2[i], v1[j]),
                 mul(v3[i], v4[j]), mul(v4[i], v3[j]))
             for j in range(n)] for i in range(n)]


@dataclass(frozen=True)
class TangencyResult:
    tangent: bool
    point: Optional[tuple[float, float]]
    margin: float


def newman_tangency(a: Sequence[float], da: Sequence[float], tol: float
                    ) -> TangencyResult:
    """Decide whether the solution surfaces through a and a + da touch.

    Solves the two linear equations for the contact point and tests the
    incidence equation there; for generic displacements the verdict agrees
    with nullity of da in the flat split metric, scaled by |da|^2.  The
    da3 = 0 subcases are decided directly: the linear system is
    inconsistent unless da1 = da2 = 0, in which case tangency reduces to
    da0 = 0 (within the absolute tolerance).
    """
    da0, da1, da2, da3 = (float(v) for v in da)
    norm2 = da0 * da0 + da1 * da1 + da2 * da2 + da3 * da3
    if da3 != 0.0:
        x_star = -da2 / da3
        y_star = -da1 / da3
        residual = da0 + da1 * x_star + da2 * y_star + da3 * x_star * y_star
        margin = abs(residual * da3)  # = |da0 da3 - da1 da2|
        return TangencyResult(tangent=margin < tol * norm2,
                              point=(x_star, y_star), margin=margin)
    if da1 == 0.0 and da2 == 0.0:
        return TangencyResult(tangent=abs(da0) <= tol, point=None,
                              margin=abs(da0))
    return TangencyResult(tangent=False, point=None,
                          margin=math.hypot(da1, da2))


@dataclass(frozen=True)
class SiFamily:
    kappa: float
    pair: PdePair
    psi: Expr
    metric: Metric4
    jet_guards: tuple[Expr, ...]  # over the jet chart
    solution_guards: tuple[Expr, ...]  # over (x, y, a0..a3), for psi checks
    metric_guard: Expr  # over (a0..a3): the conformal factor base


def si_family(kappa) -> SiFamily:
    """The family of pairs whose solution spaces carry the constant
    curvature metric g_kappa; kappa = 0 degenerates to the flat model."""
    k = const(Fraction(kappa)) if isinstance(kappa, int) else const(float(kappa))
    x, y, z, p, q, s = (var(n) for n in ("x", "y", "z", "p", "q", "s"))
    w = add(z, mul(x, p), neg(mul(y, q)))  # z + x p - y q
    R = neg(div(mul(2, y, p, s), w))
    T = add(neg(div(mul(2, k, s), mul(y, w))),
            neg(div(mul(2, x, sub(z, mul(y, q)), s), mul(y, w))))
    jet_guards = (w, y)
    dom = default_jet_domain().with_guards(*jet_guards)
    pair = PdePair.create(R, T, domain=dom)

    a0, a1, a2, a3 = (var(n) for n in ("a0", "a1", "a2", "a3"))
    denom = sub(mul(a2, y), mul(a1, x))
    psi = div(add(mul(k, add(mul(a0, a1), mul(a2, a3)), y), mul(k, a1),
                  neg(y), neg(mul(a0, powi(y, 2))), neg(mul(a3, x, y))),
              denom)

    conf_base = add(1, mul(k, add(mul(a0, a1), mul(a2, a3))))
    u = div(const(1), powi(conf_base, 2))
    zero = const(0)
    entries = [[zero] * 4 for _ in range(4)]
    entries[0][1] = entries[1][0] = u
    entries[2][3] = entries[3][2] = u
    metric = Metric4(chart=Chart(("a0", "a1", "a2", "a3")),
                     entries=tuple(tuple(row) for row in entries))
    return SiFamily(kappa=float(kappa), pair=pair, psi=psi, metric=metric,
                    jet_guards=jet_guards, solution_guards=(denom,),
                    metric_guard=conf_base)
