"""Invariants of ODE-derived structures on low-dimensional charts.

Two charts live here.  On (x, y, a1, a2) a single function p defines a
four-dimensional structure whose first relative invariant decides whether
the structure reduces to a third-order ODE (generic branch) or degenerates
to a second-order one; the reduction itself is numeric-pointwise since the
fiber solves have no closed form in general.  On (x, y, a1) the function p
encodes a second-order ODE and carries the two classical fourth-order
relative invariants whose simultaneous vanishing characterises
linearizability; they are returned as cleared-denominator polynomials in
the partials of p, so only their vanishing is meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from .expr import (Expr, add, differentiate, evaluate, free_variables,
                   mul, neg, powi, sub)
from .sampling import DEFAULT_TOL_ZERO, SampleDomain, is_identically_zero

__all__ = ["ParaCrDatum112", "ParaCrDatum111", "JetPoint3", "ReductionError",
           "invariant_I", "BranchVerdict", "reduce_to_third_order",
           "second_order_invariants", "check_solution_ode", "OdeSolutionCheck"]


class ReductionError(RuntimeError):
    pass


def _check_vars(p: Expr, allowed: tuple[str, ...], what: str):
    extra = free_variables(p) - set(allowed)
    if extra:
        raise ValueError(f"{what} may only use {allowed}; found {sorted(extra)}")


@dataclass(frozen=True)
class ParaCrDatum112:
    """Datum p(x, y, a1, a2); requires dp/da1 not identically zero."""

    p: Expr

    @staticmethod
    def create(p: Expr, dom: Optional[SampleDomain] = None) -> "ParaCrDatum112":
        _check_vars(p, ("x", "y", "a1", "a2"), "datum")
        dom = dom if dom is not None else SampleDomain.box(
            ("x", "y", "a1", "a2"), 0.3, 1.3)
        if is_identically_zero(differentiate(p, "a1"), dom).is_zero:
            raise ValueError("dp/da1 vanishes identically")
        return ParaCrDatum112(p=p)


@dataclass(frozen=True)
class ParaCrDatum111:
    """Datum p(x, y, a1); requires dp/da1 not identically zero."""

    p: Expr

    @staticmethod
    def create(p: Expr, dom: Optional[SampleDomain] = None) -> "ParaCrDatum111":
        _check_vars(p, ("x", "y", "a1"), "datum")
        dom = dom if dom is not None else SampleDomain.box(
            ("x", "y", "a1"), 0.3, 1.3)
        if is_identically_zero(differentiate(p, "a1"), dom).is_zero:
            raise ValueError("dp/da1 vanishes identically")
        return ParaCrDatum111(p=p)


@dataclass(frozen=True)
class JetPoint3:
    """Third-order jet coordinates (x, y, y', y'')."""

    x: float
    y: float
    y1: float
    y2: float


@dataclass(frozen=True)
class BranchVerdict:
    branch: str  # "generic" | "degenerate" | "mixed"
    samples_used: int
    witness: Optional[dict[str, float]] = None


def invariant_I(d: ParaCrDatum112, dom: Optional[SampleDomain] = None, *,
                tol: float = DEFAULT_TOL_ZERO) -> tuple[Expr, BranchVerdict]:
    """First relative invariant of the datum and its branch classification.

    I = p1 (p_x2 + p p_y2) - p2 (p_x1 + p p_y1); only its vanishing is
    invariant.  The branch is generic when I is nonzero at every accepted
    sample, degenerate when it vanishes at all of them, mixed otherwise.
    """
    p = d.p
    p1, p2 = differentiate(p, "a1"), differentiate(p, "a2")
    px1, py1 = differentiate(p1, "x"), differentiate(p1, "y")
    px2, py2 = differentiate(p2, "x"), differentiate(p2, "y")
    inv = sub(mul(p1, add(px2, mul(p, py2))), mul(p2, add(px1, mul(p, py1))))
    dom = dom if dom is not None else SampleDomain.box(("x", "y", "a1", "a2"),
                                                       0.3, 1.3)
    from .sampling import sample_points
    points, _ = sample_points(dom)
    zero_at = nonzero_at = 0
    witness = None
    from .expr import NumericDomainError
    for pt in points:
        try:
            v = evaluate(inv, pt)
        except NumericDomainError:
            continue
        if abs(v) < tol:
            zero_at += 1
        else:
            nonzero_at += 1
            witness = witness or pt
    used = zero_at + nonzero_at
    if used == 0:
        branch = "mixed"
    elif nonzero_at == used:
        branch = "generic"
    elif zero_at == used:
        branch = "degenerate"
    else:
        branch = "mixed"
    return inv, BranchVerdict(branch=branch, samples_used=used, witness=witness)


# ---------------------------------------------------------------------------
# Numeric reduction to a third-order ODE
# ---------------------------------------------------------------------------

def _newton_with_bisection(fn: Callable[[float], float],
                           dfn: Callable[[float], float], x0: float, *,
                           tol: float = 1e-12, max_iter: int = 80,
                           span: float = 8.0) -> float:
    """Safeguarded Newton; falls back to bisection on an expanding bracket."""
    x = x0
    for _ in range(max_iter):
        f = fn(x)
        if abs(f) < tol:
            return x
        df = dfn(x)
        if abs(df) < 1e-14 or not (abs(f / df) < span):
            break
        x = x - f / df
    else:
        f = fn(x)
        if abs(f) < tol:
            return x
    # expanding bracket around the seed
    width = max(abs(x0), 1.0) * 1e-3
    f0 = fn(x0)
    while width <= span:
        for a, b in ((x0 - width, x0), (x0, x0 + width)):
            try:
                fa, fb = fn(a), fn(b)
            except Exception:
                continue
            if fa == 0.0:
                return a
            if fb == 0.0:
                return b
            if fa * fb < 0:
                for _ in range(200):
                    m = 0.5 * (a + b)
                    fm = fn(m)
                    if abs(fm) < tol:
                        return m
                    if fa * fm < 0:
                        b, fb = m, fm
                    else:
                        a, fa = m, fm
                return 0.5 * (a + b)
        width *= 2.0
    raise ReductionError(f"root find diverged from seed {x0} (|f| = {abs(f0):.3g})")


def reduce_to_third_order(d: ParaCrDatum112, pt: JetPoint3, a2_seed: float, *,
                          a1_seed: float = 0.0, tol: float = 1e-12) -> float:
    """Value of the right-hand side of the point-equivalent third-order ODE.

    Solves y' = p for a1 with a2 held, forms the second-order slot from the
    implicit-function partials, solves it for a2, and returns the total
    x-derivative of that slot through the solved fiber point.  The two
    fiber solves use safeguarded Newton iterations seeded by the caller.
    """
    p = d.p
    p1 = differentiate(p, "a1")
    p2 = differentiate(p, "a2")
    px, py = differentiate(p, "x"), differentiate(p, "y")
    G = add(px, mul(p, py))  # second-order slot on the fiber
    g1, g2 = differentiate(G, "a1"), differentiate(G, "a2")
    gx, gy = differentiate(G, "x"), differentiate(G, "y")

    base = {"x": pt.x, "y": pt.y}
    state = {"a1": a1_seed}

    def solve_a1(a2: float) -> float:
        env = dict(base, a2=a2)

        def fn(a1):
            return evaluate(p, {**env, "a1": a1}) - pt.y1

        def dfn(a1):
            return evaluate(p1, {**env, "a1": a1})

        a1 = _newton_with_bisection(fn, dfn, state["a1"], tol=tol)
        state["a1"] = a1  # warm start for the next outer iteration
        return a1

    def q_of_a2(a2: float) -> float:
        a1 = solve_a1(a2)
        return evaluate(G, dict(base, a1=a1, a2=a2))

    def dq_of_a2(a2: float) -> float:
        a1 = solve_a1(a2)
        env = dict(base, a1=a1, a2=a2)
        p1v = evaluate(p1, env)
        if abs(p1v) < 1e-8:
            raise ReductionError("dp/da1 below 1e-8 at the solve point")
        return evaluate(g2, env) - evaluate(g1, env) * evaluate(p2, env) / p1v

    if abs(dq_of_a2(a2_seed)) < 1e-8 and abs(q_of_a2(a2_seed) - pt.y2) > tol:
        raise ReductionError("d(second-order slot)/da2 below 1e-8 "
                             "(degenerate branch)")
    a2 = _newton_with_bisection(lambda v: q_of_a2(v) - pt.y2, dq_of_a2,
                                a2_seed, tol=tol)
    a1 = solve_a1(a2)
    env = dict(base, a1=a1, a2=a2)
    p1v = evaluate(p1, env)
    if abs(p1v) < 1e-8:
        raise ReductionError("dp/da1 below 1e-8 at the solve point")
    g1v = evaluate(g1, env)
    q_a2 = evaluate(g2, env) - g1v * evaluate(p2, env) / p1v
    if abs(q_a2) < 1e-8:
        raise ReductionError("d(second-order slot)/da2 below 1e-8 "
                             "(degenerate branch)")
    q_x = evaluate(gx, env) - g1v * evaluate(px, env) / p1v
    q_y = evaluate(gy, env) - g1v * evaluate(py, env) / p1v
    q_y1 = g1v / p1v
    return q_x + pt.y1 * q_y + pt.y2 * q_y1


# ---------------------------------------------------------------------------
# Second-order invariants on (x, y, a1)
# ---------------------------------------------------------------------------

def _partials(p: Expr) -> Callable[[str], Expr]:
    axes = {"x": "x", "y": "y", "1": "a1"}
    cache: dict[str, Expr] = {"": p}

    def get(key: str) -> Expr:
        if key not in cache:
            cache[key] = differentiate(get(key[:-1]), axes[key[-1]])
        return cache[key]

    return get


def second_order_invariants(d: ParaCrDatum111) -> tuple[Expr, Expr]:
    """The cleared-denominator pair of fourth-order relative invariants.

    Gauge prefactors are fixed to one, so the returned polynomials are the
    invariants times 6 p1^4; report vanishing verdicts, never values.
    """
    g = _partials(d.p)
    p, p1, p11, p111, p1111 = g(""), g("1"), g("11"), g("111"), g("1111")
    j = add(
        mul(-15, powi(p11, 3), g("x1")),
        mul(10, p1, p11, p111, g("x1")),
        mul(15, p1, powi(p11, 2), g("x11")),
        mul(-4, powi(p1, 2), p111, g("x11")),
        mul(12, powi(p1, 2), powi(p11, 2), g("y1")),
        mul(-15, p, powi(p11, 3), g("y1")),
        mul(-4, powi(p1, 3), p111, g("y1")),
        mul(10, p, p1, p11, p111, g("y1")),
        mul(-12, powi(p1, 3), p11, g("y11")),
        mul(15, p, p1, powi(p11, 2), g("y11")),
        mul(-4, p, powi(p1, 2), p111, g("y11")),
        mul(-6, powi(p1, 2), p11, g("x111")),
        mul(4, powi(p1, 2),
            sub(powi(p1, 2), mul(Fraction(3, 2), p, p11)), g("y111")),
        neg(mul(powi(p1, 2), add(g("x1"), mul(p, g("y1"))), p1111)),
        mul(powi(p1, 3), add(g("x1111"), mul(p, g("y1111")))),
    )
    k = add(
        mul(-15, p11, powi(g("x1"), 3)),
        mul(15, p1, powi(g("x1"), 2), g("x11")),
        mul(10, p1, p11, g("x1"), g("xx1")),
        mul(-4, powi(p1, 2), g("x11"), g("xx1")),
        mul(-6, powi(p1, 2), g("x1"), g("xx11")),
        neg(mul(powi(p1, 2), p11, g("xxx1"))),
        mul(powi(p1, 3), g("xxx11")),
        mul(-2, powi(p1, 4), g("xxy1")),
        mul(-3, p, powi(p1, 2), p11, g("xxy1")),
        mul(3, p, powi(p1, 3), g("xxy11")),
        neg(mul(powi(p1, 2), p11, g("x1"), g("xy"))),
        mul(powi(p1, 3), g("x11"), g("xy")),
        mul(-3, powi(p1, 2), p11, g("x"), g("xy1")),
        mul(6, powi(p1, 3), g("x1"), g("xy1")),
        mul(20, p, p1, p11, g("x1"), g("xy1")),
        mul(-8, p, powi(p1, 2), g("x11"), g("xy1")),
        mul(3, powi(p1, 3), g("x"), g("xy11")),
        mul(-12, p, powi(p1, 2), g("x1"), g("xy11")),
        mul(2, powi(p1, 5), g("xyy")),
        mul(-4, p, powi(p1, 4), g("xyy1")),
        mul(-3, powi(p, 2), powi(p1, 2), p11, g("xyy1")),
        mul(3, powi(p, 2), powi(p1, 3), g("xyy11")),
        mul(10, p1, p11, powi(g("x1"), 2), g("y")),
        mul(-10, powi(p1, 2), g("x1"), g("x11"), g("y")),
        mul(-3, powi(p1, 2), p11, g("xx1"), g("y")),
        mul(3, powi(p1, 3), g("xx11"), g("y")),
        mul(-6, powi(p1, 4), g("xy1"), g("y")),
        mul(-9, p, powi(p1, 2), p11, g("xy1"), g("y")),
        mul(9, p, powi(p1, 3), g("xy11"), g("y")),
        mul(-2, powi(p1, 2), p11, g("x1"), powi(g("y"), 2)),
        mul(2, powi(p1, 3), g("x11"), powi(g("y"), 2)),
        mul(10, p1, p11, g("x"), g("x1"), g("y1")),
        mul(-6, powi(p1, 2), powi(g("x1"), 2), g("y1")),
        mul(-45, p, p11, powi(g("x1"), 2), g("y1")),
        mul(-4, powi(p1, 2), g("x"), g("x11"), g("y1")),
        mul(30, p, p1, g("x1"), g("x11"), g("y1")),
        neg(mul(powi(p1, 2), p11, g("xx"), g("y1"))),
        mul(2, powi(p1, 3), g("xx1"), g("y1")),
        mul(10, p, p1, p11, g("xx1"), g("y1")),
        mul(-6, p, powi(p1, 2), g("xx11"), g("y1")),
        mul(-2, powi(p1, 4), g("xy"), g("y1")),
        mul(-3, p, powi(p1, 2), p11, g("xy"), g("y1")),
        mul(10, p, powi(p1, 3), g("xy1"), g("y1")),
        mul(20, powi(p, 2), p1, p11, g("xy1"), g("y1")),
        mul(-12, powi(p, 2), powi(p1, 2), g("xy11"), g("y1")),
        mul(-4, powi(p1, 2), p11, g("x"), g("y"), g("y1")),
        mul(8, powi(p1, 3), g("x1"), g("y"), g("y1")),
        mul(30, p, p1, p11, g("x1"), g("y"), g("y1")),
        mul(-14, p, powi(p1, 2), g("x11"), g("y"), g("y1")),
        mul(-4, powi(p1, 4), powi(g("y"), 2), g("y1")),
        mul(-6, p, powi(p1, 2), p11, powi(g("y"), 2), g("y1")),
        mul(2, powi(p1, 3), g("x"), powi(g("y1"), 2)),
        mul(10, p, p1, p11, g("x"), powi(g("y1"), 2)),
        mul(-12, p, powi(p1, 2), g("x1"), powi(g("y1"), 2)),
        mul(-45, powi(p, 2), p11, g("x1"), powi(g("y1"), 2)),
        mul(15, powi(p, 2), p1, g("x11"), powi(g("y1"), 2)),
        mul(10, p, powi(p1, 3), g("y"), powi(g("y1"), 2)),
        mul(20, powi(p, 2), p1, p11, g("y"), powi(g("y1"), 2)),
        mul(-6, powi(p, 2), powi(p1, 2), powi(g("y1"), 3)),
        mul(-15, powi(p, 3), p11, powi(g("y1"), 3)),
        mul(-6, powi(p1, 2), g("x"), g("x1"), g("y11")),
        mul(15, p, p1, powi(g("x1"), 2), g("y11")),
        mul(powi(p1, 3), g("xx"), g("y11")),
        mul(-4, p, powi(p1, 2), g("xx1"), g("y11")),
        mul(3, p, powi(p1, 3), g("xy"), g("y11")),
        mul(-8, powi(p, 2), powi(p1, 2), g("xy1"), g("y11")),
        mul(4, powi(p1, 3), g("x"), g("y"), g("y11")),
        mul(-16, p, powi(p1, 2), g("x1"), g("y"), g("y11")),
        mul(6, p, powi(p1, 3), powi(g("y"), 2), g("y11")),
        mul(-10, p, powi(p1, 2), g("x"), g("y1"), g("y11")),
        mul(30, powi(p, 2), p1, g("x1"), g("y1"), g("y11")),
        mul(-20, powi(p, 2), powi(p1, 2), g("y"), g("y1"), g("y11")),
        mul(15, powi(p, 3), p1, powi(g("y1"), 2), g("y11")),
        mul(-2, powi(p1, 4), g("x1"), g("yy")),
        neg(mul(p, powi(p1, 2), p11, g("x1"), g("yy"))),
        mul(p, powi(p1, 3), g("x11"), g("yy")),
        mul(4, powi(p1, 5), g("y"), g("yy")),
        mul(-4, p, powi(p1, 4), g("y1"), g("yy")),
        mul(-2, powi(p, 2), powi(p1, 2), p11, g("y1"), g("yy")),
        mul(2, powi(p, 2), powi(p1, 3), g("y11"), g("yy")),
        mul(-2, powi(p1, 4), g("x"), g("yy1")),
        mul(-3, p, powi(p1, 2), p11, g("x"), g("yy1")),
        mul(6, p, powi(p1, 3), g("x1"), g("yy1")),
        mul(10, powi(p, 2), p1, p11, g("x1"), g("yy1")),
        mul(-4, powi(p, 2), powi(p1, 2), g("x11"), g("yy1")),
        mul(-8, p, powi(p1, 4), g("y"), g("yy1")),
        mul(-6, powi(p, 2), powi(p1, 2), p11, g("y"), g("yy1")),
        mul(8, powi(p, 2), powi(p1, 3), g("y1"), g("yy1")),
        mul(10, powi(p, 3), p1, p11, g("y1"), g("yy1")),
        mul(-4, powi(p, 3), powi(p1, 2), g("y11"), g("yy1")),
        mul(3, p, powi(p1, 3), g("x"), g("yy11")),
        mul(-6, powi(p, 2), powi(p1, 2), g("x1"), g("yy11")),
        mul(6, powi(p, 2), powi(p1, 3), g("y"), g("yy11")),
        mul(-6, powi(p, 3), powi(p1, 2), g("y1"), g("yy11")),
        mul(2, p, powi(p1, 5), g("yyy")),
        mul(-2, powi(p, 2), powi(p1, 4), g("yyy1")),
        neg(mul(powi(p, 3), powi(p1, 2), p11, g("yyy1"))),
        mul(powi(p, 3), powi(p1, 3), g("yyy11")),
    )
    return j, k


@dataclass(frozen=True)
class OdeSolutionCheck:
    max_residual: float
    samples_used: int
    samples_rejected: int
    worst_point: Optional[dict[str, float]]


def check_solution_ode(F: Expr, psi: Expr, dom: SampleDomain) -> OdeSolutionCheck:
    """Substitute a 3-parameter family psi(x, a0, a1, a2) into y''' = F."""
    _check_vars(F, ("x", "y", "y1", "y2"), "ODE right-hand side")
    _check_vars(psi, ("x", "a0", "a1", "a2"), "candidate solution")
    from .expr import substitute, NumericDomainError
    psi_x = differentiate(psi, "x")
    psi_xx = differentiate(psi_x, "x")
    residual = sub(differentiate(psi_xx, "x"),
                   substitute(F, {"y": psi, "y1": psi_x, "y2": psi_xx}))
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
            v = abs(evaluate(residual, pt))
        except NumericDomainError:
            rejected += 1
            continue
        used += 1
        if v > max_res:
            max_res, worst = v, pt
        if used == dom.n_samples:
            break
    return OdeSolutionCheck(max_residual=max_res, samples_used=used,
                            samples_rejected=rejected, worst_point=worst)
