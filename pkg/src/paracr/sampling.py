"""Guarded random sampling and the semantic zero test.

Identities are never decided by rewriting: an expression is declared zero
when it vanishes at N pseudo-random points drawn from a guarded box.
Guards keep denominators and other nondegeneracy conditions away from
zero; samples on which the expression develops subterms larger than the
scale bound are redrawn so the fixed absolute tolerance stays meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from .expr import Expr, NumericDomainError, evaluate, evaluate_scaled

__all__ = ["Interval", "SampleDomain", "ZeroVerdict", "is_identically_zero",
           "sample_points", "DEFAULT_TOL_ZERO", "DEFAULT_SCALE_BOUND"]

DEFAULT_TOL_ZERO = 1e-9
DEFAULT_SCALE_BOUND = 1e6
DEFAULT_GUARD_FLOOR = 1e-4
DEFAULT_SEED = 42


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class SampleDomain:
    """A box of per-variable closed intervals plus guard expressions.

    Guards are expressions that must satisfy ``|guard| > guard_floor`` at
    every accepted sample (nondegeneracy conditions, denominators).
    """

    intervals: Mapping[str, Interval]
    n_samples: int = 20
    seed: int = DEFAULT_SEED
    guards: tuple[Expr, ...] = field(default_factory=tuple)
    guard_floor: float = DEFAULT_GUARD_FLOOR

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.guard_floor <= 0:
            raise ValueError("guard_floor must be positive")

    @staticmethod
    def box(names: Sequence[str], lo: float, hi: float, *,
            n_samples: int = 20, seed: int = DEFAULT_SEED,
            guards: Sequence[Expr] = (), guard_floor: float = DEFAULT_GUARD_FLOOR
            ) -> "SampleDomain":
        return SampleDomain({n: Interval(lo, hi) for n in names},
                            n_samples=n_samples, seed=seed,
                            guards=tuple(guards), guard_floor=guard_floor)

    def with_guards(self, *guards: Expr) -> "SampleDomain":
        return replace(self, guards=self.guards + tuple(guards))

    def with_samples(self, n_samples: int) -> "SampleDomain":
        return replace(self, n_samples=n_samples)

    def with_seed(self, seed: int) -> "SampleDomain":
        return replace(self, seed=seed)

    def with_guard_floor(self, guard_floor: float) -> "SampleDomain":
        return replace(self, guard_floor=guard_floor)

    def raw_points(self) -> Iterator[dict[str, float]]:
        """Unguarded stream of uniform points over the box."""
        rng = np.random.default_rng(self.seed)
        names = list(self.intervals)
        los = np.array([self.intervals[n].lo for n in names])
        his = np.array([self.intervals[n].hi for n in names])
        while True:
            u = rng.random(len(names))
            vals = los + u * (his - los)
            yield dict(zip(names, map(float, vals)))

    def passes_guards(self, pt: Mapping[str, float]) -> bool:
        for g in self.guards:
            try:
                if abs(evaluate(g, pt)) <= self.guard_floor:
                    return False
            except NumericDomainError:
                return False
        return True


def sample_points(dom: SampleDomain, *, max_attempts: Optional[int] = None
                  ) -> tuple[list[dict[str, float]], int]:
    """Draw ``dom.n_samples`` guarded points; returns (points, attempts).

    Stops early when more than half of a generous attempt budget has been
    rejected, which callers treat as a degenerate (inconclusive) domain.
    """
    budget = max_attempts if max_attempts is not None else 2 * dom.n_samples
    points: list[dict[str, float]] = []
    attempts = 0
    for pt in dom.raw_points():
        if attempts >= budget:
            break
        attempts += 1
        if dom.passes_guards(pt):
            points.append(pt)
            if len(points) == dom.n_samples:
                break
    return points, attempts


@dataclass(frozen=True)
class ZeroVerdict:
    status: str  # "zero" | "nonzero" | "inconclusive"
    witness: Optional[dict[str, float]] = None
    witness_value: Optional[float] = None
    max_abs: float = 0.0
    samples_used: int = 0
    samples_rejected: int = 0

    @property
    def is_zero(self) -> bool:
        return self.status == "zero"

    @property
    def is_nonzero(self) -> bool:
        return self.status == "nonzero"


def is_identically_zero(e: Expr, dom: SampleDomain, *,
                        tol: float = DEFAULT_TOL_ZERO,
                        scale_bound: float = DEFAULT_SCALE_BOUND) -> ZeroVerdict:
    """Semantic zero test by guarded random evaluation.

    "zero" iff all of ``dom.n_samples`` accepted evaluations are below
    ``tol`` in absolute value; "nonzero" carries the first witness point;
    "inconclusive" when more than half the draws were rejected by guards,
    by numeric-domain failures, or by the subterm scale bound.
    """
    n_target = dom.n_samples
    budget = 2 * n_target
    used = 0
    rejected = 0
    max_abs = 0.0
    for pt in dom.raw_points():
        if used + rejected >= budget:
            break
        if not dom.passes_guards(pt):
            rejected += 1
            continue
        try:
            value, scale = evaluate_scaled(e, pt)
        except NumericDomainError:
            rejected += 1
            continue
        if scale > scale_bound:
            rejected += 1
            continue
        used += 1
        if abs(value) > max_abs:
            max_abs = abs(value)
        if abs(value) >= tol:
            return ZeroVerdict("nonzero", witness=pt, witness_value=value,
                               max_abs=max_abs, samples_used=used,
                               samples_rejected=rejected)
        if used == n_target:
            return ZeroVerdict("zero", max_abs=max_abs, samples_used=used,
                               samples_rejected=rejected)
    return ZeroVerdict("inconclusive", max_abs=max_abs, samples_used=used,
                       samples_rejected=rejected)
