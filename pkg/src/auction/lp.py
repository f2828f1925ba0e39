"""Exact rational linear programming on top of the Parma Polyhedra Library.

PPL works with integer coefficients only, so every rational row is scaled by
the lcm of its denominators before it goes in, and optima and generators are
read back as ``Fraction``.

Conventions: a row ``(a, b)`` means ``<a, x> <= b``. ``maximize(c, A_ub,
b_ub, A_eq, b_eq, free)`` solves ``max <c, x>`` subject to ``A_ub x <= b_ub``,
``A_eq x = b_eq`` and ``x_j >= 0`` for every ``j`` not listed in ``free``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import ppl

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_ZERO = Fraction(0)
_ONE = Fraction(1)

Row = Tuple[Sequence[Fraction], Fraction]

_STATUS = {"optimized": OPTIMAL, "unfeasible": INFEASIBLE, "unbounded": UNBOUNDED}


@dataclass(frozen=True)
class LPResult:
    status: str
    value: Optional[Fraction] = None
    x: Optional[Tuple[Fraction, ...]] = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _q(value) -> Fraction:
    return Fraction(int(value.numerator), int(value.denominator))


def _expr(coeffs: Sequence, const=0) -> Tuple[ppl.Linear_Expression, int]:
    """``sum coeffs * x + const`` scaled to integers; returns the expression and the scale."""
    vals = [Fraction(x) for x in coeffs] + [Fraction(const)]
    scale = math.lcm(*(x.denominator for x in vals))
    ints = [int(x * scale) for x in vals]
    return ppl.Linear_Expression(ints[:-1], ints[-1]), scale


def _le(a: Sequence, b) -> ppl.Constraint:
    expr, _ = _expr([-Fraction(x) for x in a], b)
    return expr >= 0


def _eq(a: Sequence, b) -> ppl.Constraint:
    expr, _ = _expr(a, -Fraction(b))
    return expr == 0


def _polyhedron(ineqs: Sequence[Row], eqs: Sequence[Row], dim: int) -> ppl.C_Polyhedron:
    poly = ppl.C_Polyhedron(dim)
    for a, b in ineqs:
        poly.add_constraint(_le(a, b))
    for a, b in eqs:
        poly.add_constraint(_eq(a, b))
    return poly


def _point(g) -> Tuple[Fraction, ...]:
    d = int(g.divisor())
    return tuple(Fraction(int(c), d) for c in g.coefficients())


def maximize(
    c: Sequence[Fraction],
    A_ub: Sequence[Sequence[Fraction]] = (),
    b_ub: Sequence[Fraction] = (),
    A_eq: Sequence[Sequence[Fraction]] = (),
    b_eq: Sequence[Fraction] = (),
    free: Iterable[int] = (),
) -> LPResult:
    n = len(c)
    free = set(free)
    cs = ppl.Constraint_System()
    for a, b in zip(A_ub, b_ub):
        cs.insert(_le(a, b))
    for a, b in zip(A_eq, b_eq):
        cs.insert(_eq(a, b))
    for j in range(n):
        if j not in free:
            cs.insert(ppl.Variable(j) >= 0)
    objective, scale = _expr(c)
    mip = ppl.MIP_Problem(n, cs, objective, "maximization")
    status = _STATUS[mip.solve()["status"]]
    if status != OPTIMAL:
        return LPResult(status)
    x = _point(mip.optimizing_point())
    x = x + (_ZERO,) * (n - len(x))
    return LPResult(OPTIMAL, _q(mip.optimal_value()) / scale, x)


def max_margin(
    ineqs: Sequence[Row],
    eqs: Sequence[Row] = (),
    dim: int = 0,
    margin_on: Optional[Sequence[bool]] = None,
    nonneg: bool = False,
) -> LPResult:
    """Largest ``t <= 1`` with ``<a, x> + t <= b`` on the flagged inequalities.

    ``x`` has ``dim`` free coordinates (or non-negative ones when ``nonneg``);
    the margin variable is appended last, so ``result.x[-1]`` is ``t``. The
    relatively open set cut out by the strict versions of the flagged
    inequalities is non-empty iff the optimum is positive.
    """
    flags = list(margin_on) if margin_on is not None else [True] * len(ineqs)
    A_ub = [list(a) + [_ONE if flag else _ZERO] for (a, _), flag in zip(ineqs, flags)]
    b_ub = [b for _, b in ineqs]
    A_ub.append([_ZERO] * dim + [_ONE])
    b_ub.append(_ONE)
    A_eq = [list(a) + [_ZERO] for a, _ in eqs]
    b_eq = [b for _, b in eqs]
    free = [dim] if nonneg else list(range(dim + 1))
    c = [_ZERO] * dim + [_ONE]
    return maximize(c, A_ub, b_ub, A_eq, b_eq, free=free)


def irredundant_rows(ineqs: Sequence[Row], dim: int) -> List[Row]:
    """The facet-defining inequalities of ``{x : <a, x> <= b}``, read from PPL's minimized constraints."""
    out: List[Row] = []
    for con in _polyhedron(ineqs, [], dim).minimized_constraints():
        coeffs = [Fraction(int(x)) for x in con.coefficients()]
        coeffs += [_ZERO] * (dim - len(coeffs))
        const = Fraction(int(con.inhomogeneous_term()))
        if not any(coeffs):
            continue
        # PPL stores <coeffs, x> + const >= 0 (or == 0)
        out.append((tuple(-x for x in coeffs), const))
        if con.is_equality():
            out.append((tuple(coeffs), -const))
    return out


def affine_dimension(ineqs: Sequence[Row], eqs: Sequence[Row], dim: int) -> int:
    """Dimension of the affine hull; -1 for the empty set."""
    poly = _polyhedron(ineqs, eqs, dim)
    if poly.is_empty():
        return -1
    return int(poly.affine_dimension())


def polytope_vertices(ineqs: Sequence[Row], eqs: Sequence[Row], dim: int) -> List[Tuple[Fraction, ...]]:
    """Vertices of ``{x : <a,x> <= b, <e,x> = f}``, sorted; rays and lines are dropped."""
    poly = _polyhedron(ineqs, eqs, dim)
    if poly.is_empty():
        return []
    found = set()
    for g in poly.minimized_generators():
        if g.is_point():
            pt = _point(g)
            found.add(pt + (_ZERO,) * (dim - len(pt)))
    return sorted(found)
