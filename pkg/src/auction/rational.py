"""Exact rational helpers.

Prices, values and times are ``fractions.Fraction`` throughout; vectors are
plain tuples. Text form is ``num/den`` (or a bare integer), and decimal
strings such as ``"2.9"`` are read exactly.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Iterable, Optional, Sequence, Tuple

from src.auction.errors import ValidationFailure

Q = Fraction
Vec = Tuple[Fraction, ...]
Bundle = Tuple[int, ...]


def to_q(value: Any, field: Optional[str] = None) -> Fraction:
    """Read an exact rational from an int, Fraction or string.

    Floats are rejected unless they are integral: a binary float rarely
    means the decimal the user typed.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValidationFailure(f"not a rational: {value!r}", field)
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if value.is_integer():
            return Fraction(int(value))
        raise ValidationFailure(f"write non-integral rationals as strings, got {value!r}", field)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationFailure(f"malformed rational {value!r} ({exc})", field) from None
    raise ValidationFailure(f"not a rational: {value!r}", field)


def to_vec(values: Iterable[Any], field: Optional[str] = None) -> Vec:
    return tuple(to_q(v, f"{field}[{i}]" if field else None) for i, v in enumerate(values))


def fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def fmt_vec(v: Sequence[Fraction]) -> list:
    return [fmt(x) for x in v]


def parse_bundle(text: str, field: Optional[str] = None) -> Bundle:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ValidationFailure(f"malformed bundle {text!r}", field) from None


def fmt_bundle(k: Sequence[int]) -> str:
    return ",".join(str(x) for x in k)


def dot(a: Sequence[Any], b: Sequence[Any]) -> Fraction:
    return sum((Fraction(x) * y for x, y in zip(a, b)), Fraction(0))


def vadd(a: Sequence[Fraction], b: Sequence[Fraction]) -> Vec:
    return tuple(x + y for x, y in zip(a, b))


def vsub(a: Sequence[Any], b: Sequence[Any]) -> tuple:
    return tuple(x - y for x, y in zip(a, b))


def vscale(s: Fraction, a: Sequence[Any]) -> Vec:
    return tuple(s * x for x in a)


def sup_norm(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    return max((abs(x - y) for x, y in zip(a, b)), default=Fraction(0))


def leq(a: Sequence[Any], b: Sequence[Any]) -> bool:
    return all(x <= y for x, y in zip(a, b))
