"""Exterior algebra over a named coordinate chart.

Differential forms carry sparse coefficient maps keyed by strictly
increasing index tuples; coefficients are expression trees.  A finite
difference oracle for the exterior derivative lives here as well, so the
symbolic ``d`` is never the only route to a result.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .expr import (Expr, add, const, differentiate, evaluate, mul, neg,
                   substitute)

__all__ = ["Chart", "DiffForm", "ChartMismatchError", "wedge", "wedge_all",
           "exterior_derivative", "restrict_to_slice", "numeric_d_check"]


class ChartMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    coords: tuple[str, ...]

    def __post_init__(self):
        if len(self.coords) < 1:
            raise ValueError("chart needs at least one coordinate")
        if len(set(self.coords)) != len(self.coords):
            raise ValueError("chart coordinates must be unique")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def index(self, name: str) -> int:
        return self.coords.index(name)


def _is_zero_expr(e: Expr) -> bool:
    from .expr import Const
    return isinstance(e, Const) and e.value == 0


class DiffForm:
    """Exterior form of degree k with Expr coefficients.

    Absent index tuples mean a zero coefficient.  Forms are immutable;
    all operations return new forms.
    """

    __slots__ = ("chart", "degree", "coeffs")

    def __init__(self, chart: Chart, degree: int,
                 coeffs: Mapping[tuple[int, ...], Expr]):
        if not (0 <= degree <= chart.dim):
            raise ValueError(f"degree {degree} out of range for chart of dim {chart.dim}")
        clean: dict[tuple[int, ...], Expr] = {}
        for key, c in coeffs.items():
            key = tuple(key)
            if len(key) != degree:
                raise ValueError(f"key {key} does not match degree {degree}")
            if any(key[i] >= key[i + 1] for i in range(len(key) - 1)):
                raise ValueError(f"key {key} is not strictly increasing")
            if not (0 <= min(key, default=0) and max(key, default=0) < chart.dim):
                raise ValueError(f"key {key} out of chart range")
            if not _is_zero_expr(c):
                clean[key] = c
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "coeffs", clean)

    def __setattr__(self, *a):  # pragma: no cover - immutability guard
        raise AttributeError("DiffForm is immutable")

    # -- constructors ------------------------------------------------------
    @staticmethod
    def zero(chart: Chart, degree: int) -> "DiffForm":
        return DiffForm(chart, degree, {})

    @staticmethod
    def function(chart: Chart, e: Expr) -> "DiffForm":
        return DiffForm(chart, 0, {(): e})

    @staticmethod
    def d_coord(chart: Chart, name: str) -> "DiffForm":
        from .expr import ONE
        return DiffForm(chart, 1, {(chart.index(name),): ONE})

    @staticmethod
    def one_form(chart: Chart, coefficients: Mapping[str, Expr]) -> "DiffForm":
        return DiffForm(chart, 1, {(chart.index(n),): c
                                   for n, c in coefficients.items()})

    # -- basics ------------------------------------------------------------
    def coefficient(self, key: Sequence[int]) -> Expr:
        from .expr import ZERO
        return self.coeffs.get(tuple(key), ZERO)

    def covector(self) -> tuple[Expr, ...]:
        """Coefficient vector of a 1-form in chart order."""
        if self.degree != 1:
            raise ValueError("covector() needs a 1-form")
        return tuple(self.coefficient((i,)) for i in range(self.chart.dim))

    def is_structurally_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "DiffForm") -> "DiffForm":
        self._check(other)
        if self.degree != other.degree:
            raise ValueError("cannot add forms of different degree")
        keys = set(self.coeffs) | set(other.coeffs)
        return DiffForm(self.chart, self.degree,
                        {k: add(self.coefficient(k), other.coefficient(k))
                         for k in keys})

    def __sub__(self, other: "DiffForm") -> "DiffForm":
        return self + other.scale(const(-1))

    def scale(self, factor: Expr | int | float) -> "DiffForm":
        return DiffForm(self.chart, self.degree,
                        {k: mul(factor, c) for k, c in self.coeffs.items()})

    def __neg__(self) -> "DiffForm":
        return DiffForm(self.chart, self.degree,
                        {k: neg(c) for k, c in self.coeffs.items()})

    def _check(self, other: "DiffForm"):
        if self.chart != other.chart:
            raise ChartMismatchError(
                f"charts differ: {self.chart.coords} vs {other.chart.coords}")

    def __repr__(self):
        terms = ", ".join(
            "d" + "^".join(self.chart.coords[i] for i in k) if k else "1"
            for k in sorted(self.coeffs))
        return f"<DiffForm deg={self.degree} [{terms or '0'}]>"


def _merge_keys(a: tuple[int, ...], b: tuple[int, ...]):
    """Merge two strictly increasing tuples; returns (sign, merged) or None."""
    if set(a) & set(b):
        return None
    merged = sorted(a + b)
    # count inversions of the concatenation relative to sorted order
    seq = a + b
    sign = 1
    items = list(seq)
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if items[i] > items[j]:
                sign = -sign
    return sign, tuple(merged)


def wedge(a: DiffForm, b: DiffForm) -> DiffForm:
    """Graded-antisymmetric product; zero form when the degree exceeds n."""
    a._check(b)
    degree = a.degree + b.degree
    if degree > a.chart.dim:
        return DiffForm.zero(a.chart, a.chart.dim)
    out: dict[tuple[int, ...], list[Expr]] = {}
    for ka, ca in a.coeffs.items():
        for kb, cb in b.coeffs.items():
            merged = _merge_keys(ka, kb)
            if merged is None:
                continue
            sign, key = merged
            term = mul(ca, cb) if sign > 0 else neg(mul(ca, cb))
            out.setdefault(key, []).append(term)
    return DiffForm(a.chart, degree, {k: add(*v) for k, v in out.items()})


def wedge_all(*forms: DiffForm) -> DiffForm:
    acc = forms[0]
    for f in forms[1:]:
        acc = wedge(acc, f)
    return acc


def exterior_derivative(a: DiffForm) -> DiffForm:
    out: dict[tuple[int, ...], list[Expr]] = {}
    chart = a.chart
    if a.degree == chart.dim:
        return DiffForm.zero(chart, chart.dim)
    for key, c in a.coeffs.items():
        for v, name in enumerate(chart.coords):
            if v in key:
                continue
            dc = differentiate(c, name)
            if _is_zero_expr(dc):
                continue
            merged = _merge_keys((v,), key)
            sign, new_key = merged
            term = dc if sign > 0 else neg(dc)
            out.setdefault(new_key, []).append(term)
    return DiffForm(chart, a.degree + 1, {k: add(*v) for k, v in out.items()})


def restrict_to_slice(a: DiffForm, fixed: Mapping[str, float]) -> DiffForm:
    """Pull back to the slice where the given coordinates are constant.

    Constants are substituted into coefficients first, then differentials
    of fixed coordinates are dropped; the result lives on the sub-chart of
    the remaining coordinates in their original order.
    """
    for name in fixed:
        if name not in a.chart.coords:
            raise ValueError(f"{name!r} is not a chart coordinate")
    bindings = {n: const(v) for n, v in fixed.items()}
    remaining = [c for c in a.chart.coords if c not in fixed]
    if not remaining:
        raise ValueError("slice fixes every coordinate")
    sub_chart = Chart(tuple(remaining))
    old_to_new = {a.chart.index(n): i for i, n in enumerate(remaining)}
    fixed_idx = {a.chart.index(n) for n in fixed}
    if a.degree > sub_chart.dim:
        # every surviving key would need more indices than the sub-chart has
        return DiffForm.zero(sub_chart, sub_chart.dim)
    out: dict[tuple[int, ...], Expr] = {}
    for key, c in a.coeffs.items():
        if any(i in fixed_idx for i in key):
            continue
        out[tuple(old_to_new[i] for i in key)] = substitute(c, bindings)
    return DiffForm(sub_chart, a.degree, out)


def numeric_d_check(a: DiffForm, pt: Mapping[str, float], *,
                    step: float = 1e-5) -> float:
    """Max abs difference between symbolic d and central differences at pt."""
    chart = a.chart
    da = exterior_derivative(a)
    keys = set(da.coeffs)
    # finite-difference d: for each coefficient of a and each coordinate not
    # in its key, difference quotient contributes with the wedge sign
    fd: dict[tuple[int, ...], float] = {}
    for key, c in a.coeffs.items():
        for v, name in enumerate(chart.coords):
            if v in key:
                continue
            hi = dict(pt)
            lo = dict(pt)
            hi[name] = hi[name] + step
            lo[name] = lo[name] - step
            diff = (evaluate(c, hi) - evaluate(c, lo)) / (2 * step)
            sign, new_key = _merge_keys((v,), key)
            fd[new_key] = fd.get(new_key, 0.0) + sign * diff
            keys.add(new_key)
    residual = 0.0
    for key in keys:
        sym = evaluate(da.coefficient(key), pt)
        residual = max(residual, abs(sym - fd.get(key, 0.0)))
    return residual
