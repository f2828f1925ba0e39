"""Auction instances, bundles and valuations.

A valuation is a dense table over the item lattice ``M = prod_j {0..m_j}``
holding exact rationals. Instances and valuations are frozen once built and
can be shared freely.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from src.auction.errors import SamplingExhausted, ValidationFailure
from src.auction.lp import max_margin
from src.auction.rational import Bundle, Vec, dot, fmt_bundle, leq, parse_bundle, to_q, to_vec

logger = logging.getLogger(__name__)


def lattice_of(caps: Sequence[int]) -> List[Bundle]:
    """All bundles ``0 <= k <= caps`` in lexicographic order."""
    return [tuple(k) for k in itertools.product(*(range(c + 1) for c in caps))]


def l1(k: Sequence[int]) -> int:
    return sum(k)


class AuctionInstance(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    M: int
    m: Tuple[int, ...]
    p_min: Tuple[Fraction, ...]
    eps: Tuple[Fraction, ...]

    @field_validator("p_min", "eps", mode="before")
    @classmethod
    def _rationals(cls, value, info):
        return to_vec(value, info.field_name)

    @model_validator(mode="after")
    def _check(self) -> "AuctionInstance":
        if self.M < 1:
            raise ValidationFailure("need at least one item category", "M")
        for name in ("m", "p_min", "eps"):
            if len(getattr(self, name)) != self.M:
                raise ValidationFailure(f"expected {self.M} entries", name)
        if any(mj < 1 for mj in self.m):
            raise ValidationFailure("supply must be >= 1 in every category", "m")
        if any(e <= 0 for e in self.eps):
            raise ValidationFailure("increments must be > 0", "eps")
        if any(p < 0 for p in self.p_min):
            raise ValidationFailure("prices must be >= 0", "p_min")
        return self

    def lattice(self) -> List[Bundle]:
        return lattice_of(self.m)

    def fits(self, total: Sequence[int]) -> bool:
        return all(t <= mj for t, mj in zip(total, self.m))

    def with_p_min(self, p_min: Sequence[Fraction]) -> "AuctionInstance":
        return self.model_copy(update={"p_min": tuple(p_min)})

    def with_eps(self, eps: Sequence[Fraction]) -> "AuctionInstance":
        return self.model_copy(update={"eps": tuple(eps)})


class Valuation(BaseModel):
    """Bundle -> value table. ``allow_nonmonotone`` is the explicit override for player tables."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    table: Dict[Tuple[int, ...], Fraction]
    name: Optional[str] = None
    allow_nonmonotone: bool = False

    @field_validator("table", mode="before")
    @classmethod
    def _table(cls, value):
        out = {}
        for key, val in dict(value).items():
            k = parse_bundle(key, "table") if isinstance(key, str) else tuple(int(x) for x in key)
            out[k] = to_q(val, f"table[{fmt_bundle(k)}]")
        return out

    def __call__(self, k: Sequence[int]) -> Fraction:
        try:
            return self.table[tuple(k)]
        except KeyError:
            raise ValidationFailure(f"bundle ({fmt_bundle(k)}) missing from valuation", self.name) from None

    @property
    def bundles(self) -> List[Bundle]:
        return sorted(self.table)

    @property
    def caps(self) -> Bundle:
        return tuple(max(col) for col in zip(*self.table))

    def key(self) -> tuple:
        return tuple(sorted(self.table.items()))


@dataclass(frozen=True)
class Violation:
    prop: str
    witness: Tuple[Bundle, ...]


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = ()
    warnings: Tuple[Violation, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        def rows(items):
            return [{"property": v.prop, "witness": [list(w) for w in v.witness]} for v in items]

        return {"valid": self.valid, "violations": rows(self.violations), "warnings": rows(self.warnings)}


def _check_table(v: Valuation, lattice: Sequence[Bundle]) -> ValidationReport:
    expected = set(lattice)
    for k in lattice:
        if k not in v.table:
            raise ValidationFailure(f"valuation has no entry for bundle ({fmt_bundle(k)})", v.name)
    extra = sorted(set(v.table) - expected)
    if extra:
        raise ValidationFailure(f"bundle ({fmt_bundle(extra[0])}) lies outside the item lattice", v.name)

    violations: List[Violation] = []
    warnings: List[Violation] = []
    zero = tuple(0 for _ in lattice[0])
    if v(zero) != 0:
        violations.append(Violation("normalization", (zero,)))
    for k in lattice:
        if v(k) < 0:
            violations.append(Violation("nonnegativity", (k,)))
    for k in lattice:
        for j in range(len(k)):
            up = tuple(x + (1 if i == j else 0) for i, x in enumerate(k))
            if up in expected and v(up) < v(k):
                item = Violation("monotonicity", (k, up))
                (warnings if v.allow_nonmonotone else violations).append(item)
    if warnings:
        logger.warning("valuation %s is not monotone (override set): %d cover pairs", v.name, len(warnings))
    return ValidationReport(tuple(violations), tuple(warnings))


def validate_valuation(v: Valuation, inst: AuctionInstance, own_box: bool = False) -> ValidationReport:
    """Structural and property checks; ``own_box`` checks an aggregated input on its own ``0 <= k <= caps``."""
    if own_box:
        if not leq(v.caps, inst.m):
            raise ValidationFailure("valuation demands more than the supply", v.name)
        return _check_table(v, lattice_of(v.caps))
    return _check_table(v, inst.lattice())


def payoff(v: Valuation, k: Sequence[int], p: Sequence[Fraction]) -> Fraction:
    return v(k) - dot(k, p)


@dataclass(frozen=True)
class ConcavityResult:
    ok: bool
    witness: Optional[Bundle] = None
    interior: Dict[Bundle, Vec] = field(default_factory=dict)


def unique_demand_margin(v: Valuation, delta: Bundle, bundles: Sequence[Bundle]):
    """Margin LP: how strictly can ``delta`` beat every other bundle at some ``p >= 0``."""
    ineqs = [
        (tuple(Fraction(d - k) for d, k in zip(delta, other)), v(delta) - v(other))
        for other in bundles
        if other != delta
    ]
    return max_margin(ineqs, dim=len(delta), nonneg=True)


def strict_concavity_check(v: Valuation, inst: AuctionInstance) -> ConcavityResult:
    """Every bundle must be the unique demand at some non-negative price."""
    bundles = inst.lattice()
    interior: Dict[Bundle, Vec] = {}
    for delta in bundles:
        res = unique_demand_margin(v, delta, bundles)
        if not res.optimal or res.value <= 0:
            return ConcavityResult(False, delta)
        interior[delta] = res.x[:-1]
    return ConcavityResult(True, None, interior)


def compute_p_max(v: Valuation, inst: AuctionInstance) -> Vec:
    out = []
    for j in range(inst.M):
        top = max(v(d) for d in inst.lattice() if d[j] >= 1)
        out.append(1 + top)
    return tuple(out)


def aggregate_valuations(vs: Sequence[Valuation], inst: AuctionInstance) -> Valuation:
    """Max-plus convolution of straightforward bidders into one aggregate bidder.

    Each input lives on its own box ``0 <= k <= caps`` inside the lattice; the
    aggregate value of ``k`` is the best split whose parts sum to at most ``k``
    (for monotone inputs this equals the best exact split whenever one exists).
    """
    if not vs:
        raise ValidationFailure("cannot aggregate an empty list of valuations", "valuations")
    lattice = inst.lattice()
    for v in vs:
        if not leq(v.caps, inst.m):
            raise ValidationFailure("valuation demands more than the supply", v.name)
        report = _check_table(v, lattice_of(v.caps))
        if not report.valid:
            raise ValidationFailure(f"invalid input valuation ({report.violations[0].prop})", v.name)

    acc: Dict[Bundle, Fraction] = {k: Fraction(0) for k in lattice}
    acc_items = [(tuple(0 for _ in range(inst.M)), Fraction(0))]
    for v in vs:
        nxt: Dict[Bundle, Fraction] = {}
        for k in lattice:
            best: Optional[Fraction] = None
            for ka, va in acc_items:
                if not leq(ka, k):
                    continue
                for kb, vb in v.table.items():
                    if leq(tuple(a + b for a, b in zip(ka, kb)), k):
                        cand = va + vb
                        if best is None or cand > best:
                            best = cand
            nxt[k] = best
        acc = nxt
        acc_items = list(acc.items())
    name = "+".join(v.name or "?" for v in vs)
    return Valuation(table=acc, name=name)


def random_substitutes_valuation(
    seed: int,
    inst: AuctionInstance,
    scale: Fraction = Fraction(6),
    budget: int = 500,
) -> Valuation:
    """Seeded draw of an integer-valued, strictly concave substitutes valuation.

    Candidates are a separable part with strictly decreasing unit values in
    ``1..scale`` plus a concave function of the total quantity; each candidate
    still has to pass validation, the strict-concavity LP and the facet
    substitutes check.
    """
    from src.auction.tropical import substitutes_check

    top = max(2, int(scale))
    rng = np.random.default_rng(seed)
    lattice = inst.lattice()
    rejections: Dict[str, int] = {"validation": 0, "concavity": 0, "substitutes": 0}
    for attempt in range(1, budget + 1):
        cums = []
        for mj in inst.m:
            if mj <= top:
                units = rng.choice(top, size=mj, replace=False) + 1
            else:
                units = rng.integers(1, top + 1, size=mj)
            units = sorted((int(u) for u in units), reverse=True)
            cums.append([0] + list(itertools.accumulate(units)))
        total = sum(inst.m)
        gm = sorted((int(x) for x in rng.integers(0, top // 2 + 1, size=total)))
        g = [0] + list(itertools.accumulate(-x for x in gm))
        table = {
            k: Fraction(sum(cums[j][k[j]] for j in range(inst.M)) + g[sum(k)])
            for k in lattice
        }
        v = Valuation(table=table, name=f"random-{seed}")
        if not validate_valuation(v, inst).valid:
            rejections["validation"] += 1
            continue
        if not strict_concavity_check(v, inst).ok:
            rejections["concavity"] += 1
            continue
        if not substitutes_check(v, inst).ok:
            rejections["substitutes"] += 1
            continue
        logger.debug("seed %d accepted after %d attempts", seed, attempt)
        return v
    raise SamplingExhausted(f"no substitutes valuation after {budget} attempts", budget, rejections)
