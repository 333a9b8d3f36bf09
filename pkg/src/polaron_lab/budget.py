"""Exact-rational bookkeeping for the strong-coupling error budget.

The lower-bound construction carries four tunable quantities, written as
powers of the coupling: delta = c1 alpha^d, K = c2 alpha^k, P = c3
alpha^p, dE = c4 alpha^e.  Five error terms compete:

    T1 = alpha^2 max(delta, eps)   order max(2+d, 3-k)   (eps = 8 alpha/K)
    T2 = 2K/P                      order k-p
    T3 = 1/2                       order 0
    T4 = dE                        order e
    T5 = 2 alpha K P^2 pi^2/(delta dE)   order 1+k+2p-d-e

All order arithmetic is over fractions.Fraction; floats are rejected so
the reported orders are exact.  optimize() equalizes the competing
terms and certifies the result with an explicit dual combination: three
times the 3-k constraint plus twice k-p plus 2+d plus e plus the T5
order telescopes to the constant 12 with total weight 8, so every
feasible exponent vector has max order at least 12/8 = 3/2.

numeric_sandwich instantiates the constants and evaluates both sides of
the energy sandwich at a concrete coupling, guarding the regime where
the prefactor (1-eps)(1-delta)^2 stays positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence, Union

from .errors import RangeError, ValidationError

__all__ = [
    "ExponentVector",
    "BudgetReport",
    "OptimizeResult",
    "term_orders",
    "optimize",
    "numeric_sandwich",
]

Rational = Union[int, str, Fraction]


def _as_fraction(field: str, value) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise ValidationError(
            "budget", field, f"{value!r} is not exact; pass an int, Fraction, or 'num/den' string"
        )
    try:
        return Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ValidationError("budget", field, f"cannot parse {value!r} as a rational: {exc}") from None


@dataclass(frozen=True)
class ExponentVector:
    """Alpha-exponents (d, k, p, e) of delta, K, P, dE, held exactly."""

    d: Fraction
    k: Fraction
    p: Fraction
    e: Fraction

    def __init__(self, d: Rational, k: Rational, p: Rational, e: Rational):
        object.__setattr__(self, "d", _as_fraction("d", d))
        object.__setattr__(self, "k", _as_fraction("k", k))
        object.__setattr__(self, "p", _as_fraction("p", p))
        object.__setattr__(self, "e", _as_fraction("e", e))
        if not self.d < 0:
            raise ValidationError("budget", "d", f"need d < 0 so delta shrinks; got {self.d}")
        if not self.k > 1:
            raise ValidationError("budget", "k", f"need k > 1 so eps = 8 alpha/K shrinks; got {self.k}")
        if not self.p < self.k:
            raise ValidationError("budget", "p", f"need p < k so blocks fit under the cutoff; got p = {self.p}, k = {self.k}")

    @staticmethod
    def from_spec(spec: dict) -> "ExponentVector":
        known = {"d", "k", "p", "e"}
        extra = set(spec) - known
        if extra:
            raise ValidationError("budget", "exponents", f"unknown keys {sorted(extra)}")
        missing = known - set(spec)
        if missing:
            raise ValidationError("budget", "exponents", f"missing keys {sorted(missing)}")
        return ExponentVector(spec["d"], spec["k"], spec["p"], spec["e"])


@dataclass(frozen=True)
class BudgetReport:
    orders: dict
    max_order: Fraction
    binding: tuple


# each order as (constant, coef_d, coef_k, coef_p, coef_e); T1 is the
# max of its two branches
_ORDER_FORMS = {
    "T1a": (Fraction(2), 1, 0, 0, 0),
    "T1b": (Fraction(3), 0, -1, 0, 0),
    "T2": (Fraction(0), 0, 1, -1, 0),
    "T3": (Fraction(0), 0, 0, 0, 0),
    "T4": (Fraction(0), 0, 0, 0, 1),
    "T5": (Fraction(1), -1, 1, 2, -1),
}

# dual weights proving max order >= 3/2 for every feasible vector
_DUAL_WEIGHTS = {"T1a": 1, "T1b": 3, "T2": 2, "T3": 0, "T4": 1, "T5": 1}


def _form_value(name: str, ev: ExponentVector) -> Fraction:
    c, cd, ck, cp, ce = _ORDER_FORMS[name]
    return c + cd * ev.d + ck * ev.k + cp * ev.p + ce * ev.e


def term_orders(ev: ExponentVector) -> BudgetReport:
    """Exact alpha-orders of the five budget terms for one exponent vector."""
    orders = {
        "T1": max(_form_value("T1a", ev), _form_value("T1b", ev)),
        "T2": _form_value("T2", ev),
        "T3": _form_value("T3", ev),
        "T4": _form_value("T4", ev),
        "T5": _form_value("T5", ev),
    }
    top = max(orders.values())
    binding = tuple(name for name in ("T1", "T2", "T3", "T4", "T5") if orders[name] == top)
    return BudgetReport(orders=orders, max_order=top, binding=binding)


class OptimizeResult(NamedTuple):
    vector: ExponentVector
    order: Fraction


def optimize() -> OptimizeResult:
    """Minimize the max order over feasible exponent vectors; certified.

    Equalizing T1's 2+d branch with T2, T4, and T5 at level M and
    saturating 3-k = M gives M = 3/2 at (d, k, p, e) =
    (-1/2, 3/2, 0, 3/2).  Optimality: the dual weights telescope the
    order forms to 12 with total weight 8, so no feasible vector beats
    12/8.  Both directions are machine-checked here.
    """
    vec = ExponentVector(Fraction(-1, 2), Fraction(3, 2), 0, Fraction(3, 2))
    report = term_orders(vec)
    target = Fraction(3, 2)
    if report.max_order != target:
        raise AssertionError(f"primal assignment broke: max order {report.max_order} != {target}")

    # dual check: the weighted sum of order forms must cancel every
    # exponent variable and leave 12 over total weight 8
    const = Fraction(0)
    coefs = [Fraction(0)] * 4
    weight = Fraction(0)
    for name, w in _DUAL_WEIGHTS.items():
        c, *rest = _ORDER_FORMS[name]
        const += w * c
        for i, r in enumerate(rest):
            coefs[i] += w * r
        weight += w
    if any(coefs) or const != 12 or weight != 8:
        raise AssertionError(f"dual certificate broke: residual coefs {coefs}, const {const}, weight {weight}")
    if Fraction(const, weight) != target:
        raise AssertionError("dual bound does not meet the primal value")
    return OptimizeResult(vector=vec, order=target)


def numeric_sandwich(alpha: float, ev: ExponentVector, constants: Sequence[float],
                     e_v: float) -> tuple:
    """Evaluate (upper, lower) energy bounds at one concrete coupling.

    upper = alpha^2 e(V); lower divides it by (1-eps)(1-delta)^2 and
    subtracts the four error terms.  Raises when the coupling is too
    small for the prefactor to keep its sign.
    """
    if not (alpha > 1 and math.isfinite(alpha)):
        raise ValidationError("budget", "alpha", f"need alpha > 1; got {alpha}")
    if len(constants) != 4 or any(not (c > 0 and math.isfinite(c)) for c in constants):
        raise ValidationError("budget", "constants", "need four positive finite constants c1..c4")
    if not e_v <= 0:
        raise ValidationError("budget", "e_v", f"the ground energy reference must be <= 0; got {e_v}")
    c1, c2, c3, c4 = (float(c) for c in constants)
    delta = c1 * alpha ** float(ev.d)
    big_k = c2 * alpha ** float(ev.k)
    big_p = c3 * alpha ** float(ev.p)
    d_e = c4 * alpha ** float(ev.e)
    eps = 8.0 * alpha / big_k
    prefactor = (1.0 - eps) * (1.0 - delta) ** 2
    if prefactor <= 0.0 or delta >= 1.0:
        raise RangeError(
            "budget", "alpha",
            f"alpha = {alpha} is below the working regime: (1-eps)(1-delta)^2 = {prefactor:.3g}",
        )
    upper = alpha**2 * e_v
    lower = (
        upper / prefactor
        - (1.0 - delta) * 2.0 * big_k / big_p
        - 0.5
        - d_e
        - 2.0 * alpha * big_k * big_p**2 * math.pi**2 / (delta * d_e)
    )
    if not upper >= lower:
        raise AssertionError(f"sandwich inverted at alpha = {alpha}: upper {upper!r} < lower {lower!r}")
    return upper, lower
