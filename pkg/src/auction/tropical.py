"""Straightforward-bidder demand and its tropical cell complex.

Demand is an exact argmax over the lattice. The maximal cells (one per bundle
under strict concavity) and the facets between them are found with exact
margin LPs, so nothing downstream ever compares against a tolerance.
"""

from __future__ import annotations

import functools
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from src.auction.errors import IndifferenceError, ValidationFailure
from src.auction.lattice import AuctionInstance, Valuation, compute_p_max, strict_concavity_check
from src.auction.lp import irredundant_rows, max_margin, polytope_vertices
from src.auction.rational import Bundle, Vec, dot, fmt, fmt_bundle, fmt_vec, to_vec, vsub

logger = logging.getLogger(__name__)

Row = Tuple[Tuple[Fraction, ...], Fraction]


@dataclass(frozen=True)
class DemandSet:
    bundles: Tuple[Bundle, ...]
    price: Vec = ()

    @property
    def is_singleton(self) -> bool:
        return len(self.bundles) == 1

    def single(self) -> Bundle:
        if not self.is_singleton:
            raise IndifferenceError(
                f"demand is not single-valued at ({', '.join(fmt_vec(self.price))})",
                self.price,
                self.bundles,
            )
        return self.bundles[0]

    def __contains__(self, k) -> bool:
        return tuple(k) in self.bundles

    def __iter__(self) -> Iterator[Bundle]:
        return iter(self.bundles)

    def __len__(self) -> int:
        return len(self.bundles)


def demand(v: Valuation, p: Sequence[Fraction]) -> DemandSet:
    p = tuple(Fraction(x) for x in p)
    if any(x < 0 for x in p):
        raise ValidationFailure("demand is only defined for non-negative prices", "price")
    best: Optional[Fraction] = None
    argmax: List[Bundle] = []
    for k in v.bundles:
        val = v(k) - dot(k, p)
        if best is None or val > best:
            best, argmax = val, [k]
        elif val == best:
            argmax.append(k)
    return DemandSet(tuple(argmax), p)


def on_indifference_locus(v: Valuation, p: Sequence[Fraction]) -> bool:
    return not demand(v, p).is_singleton


def demand_form(ds: DemandSet) -> Optional[Tuple[str, Bundle]]:
    """``("below", d0)`` if every member is ``d0`` or ``d0 - e_i``; ``("above", d0)`` for ``d0 + e_i``."""
    members = set(ds.bundles)
    dim = len(ds.bundles[0])
    units = [tuple(1 if i == j else 0 for i in range(dim)) for j in range(dim)]
    candidates = set(members)
    for k in members:
        for e in units:
            candidates.add(tuple(a + b for a, b in zip(k, e)))
            candidates.add(tuple(a - b for a, b in zip(k, e)))
    for d0 in sorted(candidates):
        below = {d0} | {tuple(a - b for a, b in zip(d0, e)) for e in units}
        if members <= below:
            return ("below", d0)
        above = {d0} | {tuple(a + b for a, b in zip(d0, e)) for e in units}
        if members <= above:
            return ("above", d0)
    return None


def aggregated_demand_violations(v: Valuation, prices: Sequence[Sequence[Fraction]]) -> List[tuple]:
    """Pairs breaking ``<p - p', d - d'> <= 0`` over all demanded bundles."""
    demands = [(tuple(p), demand(v, p)) for p in prices]
    bad = []
    for (p, dp), (q, dq) in itertools.combinations(demands, 2):
        for d in dp:
            for e in dq:
                if dot(vsub(p, q), vsub(d, e)) > 0:
                    bad.append((p, d, q, e))
    return bad


@dataclass(frozen=True)
class Cell:
    """Closed polyhedron ``{p : <a, p> <= b for (a, b) in constraints, equalities hold}``."""

    label: Tuple[Bundle, ...]
    constraints: Tuple[Row, ...]
    dim: int
    interior: Vec
    equalities: Tuple[Row, ...] = ()
    vertices: Tuple[Vec, ...] = ()

    def contains(self, p: Sequence[Fraction]) -> bool:
        return all(dot(a, p) <= b for a, b in self.constraints) and all(dot(a, p) == b for a, b in self.equalities)


@dataclass(frozen=True)
class Facet:
    plus: Bundle
    minus: Bundle
    normal: Bundle
    rhs: Fraction
    point: Vec
    margin: Fraction
    cell: Cell

    @property
    def kind(self) -> str:
        return classify_vector(self.normal)


@dataclass(frozen=True)
class CellComplex:
    valuation: Valuation
    m: Bundle
    cells: Dict[Bundle, Cell]
    facets: Tuple[Facet, ...]
    vertices: Tuple[Cell, ...] = ()
    neighbours: Dict[Bundle, Tuple[Bundle, ...]] = field(default_factory=dict)

    @property
    def M(self) -> int:
        return len(self.m)

    def facet(self, a: Bundle, b: Bundle) -> Optional[Facet]:
        for f in self.facets:
            if {f.plus, f.minus} == {tuple(a), tuple(b)}:
                return f
        return None

    def cell_of(self, p: Sequence[Fraction]) -> Optional[Cell]:
        ds = demand(self.valuation, p)
        return self.cells[ds.bundles[0]] if ds.is_singleton else None

    def all_cells(self) -> List[Cell]:
        return list(self.cells.values()) + [f.cell for f in self.facets] + list(self.vertices)


def _orient(a: Bundle, b: Bundle) -> Tuple[Bundle, Bundle]:
    """Larger total first, lexicographically larger on equal totals."""
    return (a, b) if (sum(a), a) > (sum(b), b) else (b, a)


def classify_vector(n: Sequence[int]) -> str:
    nz = [(i, x) for i, x in enumerate(n) if x]
    if len(nz) == 1 and nz[0][1] == 1:
        return f"e{nz[0][0] + 1}"
    if len(nz) == 1 and nz[0][1] == -1:
        return f"-e{nz[0][0] + 1}"
    if len(nz) == 2 and sorted(x for _, x in nz) == [-1, 1]:
        i = next(i for i, x in nz if x == 1)
        j = next(i for i, x in nz if x == -1)
        return f"e{i + 1}-e{j + 1}"
    return "other"


def cell_rows(v: Valuation, delta: Bundle) -> List[Tuple[Row, Optional[Bundle]]]:
    """H-representation of the maximal cell of ``delta``; each row tagged with the rival bundle (None for ``p >= 0``)."""
    dim = len(delta)
    rows: List[Tuple[Row, Optional[Bundle]]] = []
    for k in v.bundles:
        if k == delta:
            continue
        a = tuple(Fraction(d - x) for d, x in zip(delta, k))
        rows.append(((a, v(delta) - v(k)), k))
    for j in range(dim):
        a = tuple(Fraction(-1 if i == j else 0) for i in range(dim))
        rows.append(((a, Fraction(0)), None))
    return rows


def _hyperplane_key(row: Row) -> tuple:
    a, b = row
    lead = Fraction(next(abs(x) for x in a if x))
    return tuple(Fraction(x) / lead for x in a) + (Fraction(b) / lead,)


def _build(v: Valuation, m: Bundle) -> CellComplex:
    dim = len(m)
    cells: Dict[Bundle, Cell] = {}
    facets: Dict[Tuple[Bundle, Bundle], Facet] = {}
    for delta in v.bundles:
        tagged = cell_rows(v, delta)
        rows = [r for r, _ in tagged]
        full = max_margin(rows, dim=dim)
        if not full.optimal or full.value <= 0:
            raise ValidationFailure(f"cell of ({fmt_bundle(delta)}) has empty interior", v.name)
        facet_keys = {_hyperplane_key(r) for r in irredundant_rows(rows, dim)}
        kept: List[Row] = []
        seen = set()
        for i, (row, rival) in enumerate(tagged):
            key = _hyperplane_key(row)
            if key in seen or key not in facet_keys:
                continue
            seen.add(key)
            kept.append(row)
            if rival is None:
                continue
            plus, minus = _orient(delta, rival)
            if (plus, minus) in facets:
                continue
            others = [r for j, r in enumerate(rows) if j != i and _hyperplane_key(r) != key]
            # relative-interior point of the facet and its margin
            res = max_margin(others, eqs=[row], dim=dim)
            normal = tuple(a - b for a, b in zip(plus, minus))
            rhs = v(plus) - v(minus)
            point = res.x[:-1]
            face_eq = ((tuple(Fraction(x) for x in normal), rhs),)
            face_rows = tuple(r for j, r in enumerate(rows) if j != i and _hyperplane_key(r) != key)
            face = Cell((minus, plus), face_rows, dim - 1, point, face_eq)
            facets[(plus, minus)] = Facet(plus, minus, normal, rhs, point, res.value, face)
        cells[delta] = Cell((delta,), tuple(kept), dim, full.x[:-1])

    for delta, cell in cells.items():
        verts = polytope_vertices(list(cell.constraints), [], dim)
        cells[delta] = Cell(cell.label, cell.constraints, dim, cell.interior, (), tuple(verts))

    vertex_points = sorted({p for c in cells.values() for p in c.vertices})
    vertices = tuple(
        Cell(demand(v, p).bundles, (), 0, p, tuple((tuple(Fraction(i == j) for i in range(dim)), x) for j, x in enumerate(p)), (p,))
        for p in vertex_points
    )
    neighbours: Dict[Bundle, List[Bundle]] = {d: [] for d in cells}
    for plus, minus in sorted(facets):
        neighbours[plus].append(minus)
        neighbours[minus].append(plus)
    logger.debug("complex of %s: %d cells, %d facets, %d vertices", v.name, len(cells), len(facets), len(vertices))
    return CellComplex(
        valuation=v,
        m=tuple(m),
        cells=cells,
        facets=tuple(facets[key] for key in sorted(facets)),
        vertices=vertices,
        neighbours={d: tuple(ns) for d, ns in neighbours.items()},
    )


@functools.lru_cache(maxsize=64)
def _cached_complex(key: tuple, name: Optional[str], m: Bundle) -> CellComplex:
    return _build(Valuation(table=dict(key), name=name), m)


def enumerate_cells(v: Valuation, inst: AuctionInstance) -> CellComplex:
    if not strict_concavity_check(v, inst).ok:
        raise ValidationFailure("cell complex needs a strictly concave valuation", v.name)
    return _cached_complex(v.key(), v.name, tuple(inst.m))


def facet_vectors(cc: CellComplex) -> List[Tuple[Bundle, Bundle, Bundle, str]]:
    return [(f.plus, f.minus, f.normal, f.kind) for f in cc.facets]


@dataclass(frozen=True)
class SubstitutesResult:
    ok: bool
    facet: Optional[Facet] = None
    witness: Optional[Tuple[Vec, Vec, int]] = None

    def as_dict(self) -> dict:
        out: dict = {"substitutes": self.ok}
        if self.facet is not None:
            out["facet"] = {"plus": list(self.facet.plus), "minus": list(self.facet.minus), "normal": list(self.facet.normal)}
        if self.witness is not None:
            p, p_hat, j = self.witness
            out["witness"] = {"p": fmt_vec(p), "p_hat": fmt_vec(p_hat), "category": j + 1}
        return out


def _drops(v: Valuation, p: Vec, p_hat: Vec, j: int) -> bool:
    d, d_hat = demand(v, p), demand(v, p_hat)
    if not (d.is_singleton and d_hat.is_singleton):
        return False
    return d_hat.single()[j] < d.single()[j]


def _unit(dim: int, i: int, s: Fraction) -> Vec:
    return tuple(s if j == i else Fraction(0) for j in range(dim))


def _witness(v: Valuation, f: Facet, m: Bundle) -> Optional[Tuple[Vec, Vec, int]]:
    dim = len(m)
    q = f.point
    s = f.margin / (2 * max(m))
    n = f.normal
    for i, j in itertools.permutations(range(dim), 2):
        if n[i] * n[j] <= 0:
            continue
        step = _unit(dim, i, s)
        p, p_hat = tuple(a - b for a, b in zip(q, step)), tuple(a + b for a, b in zip(q, step))
        if _drops(v, p, p_hat, j):
            return p, p_hat, j
    # local scan around the facet point
    for offset in itertools.product((-1, 0, 1), repeat=dim):
        base = tuple(a + s * o for a, o in zip(q, offset))
        if any(x < 0 for x in base):
            continue
        for i in range(dim):
            p_hat = tuple(a + b for a, b in zip(base, _unit(dim, i, 2 * s)))
            for j in range(dim):
                if j != i and _drops(v, base, p_hat, j):
                    return base, p_hat, j
    return None


def substitutes_check(v: Valuation, inst: AuctionInstance) -> SubstitutesResult:
    """Facet criterion: every facet vector is ``e_i``, ``-e_j`` or ``e_i - e_j``."""
    if inst.M == 1:
        return SubstitutesResult(True)
    cc = enumerate_cells(v, inst)
    for f in cc.facets:
        if f.kind == "other":
            return SubstitutesResult(False, f, _witness(v, f, cc.m))
    return SubstitutesResult(True)


def complex_to_dict(cc: CellComplex) -> dict:
    def rows(rs):
        return [{"a": fmt_vec(a), "b": fmt(b)} for a, b in rs]

    return {
        "M": cc.M,
        "m": list(cc.m),
        "cells": [
            {
                "label": [list(d) for d in c.label],
                "dim": c.dim,
                "interior": fmt_vec(c.interior),
                "constraints": rows(c.constraints),
                "vertices": [fmt_vec(p) for p in c.vertices],
            }
            for c in cc.cells.values()
        ],
        "facets": [
            {
                "plus": list(f.plus),
                "minus": list(f.minus),
                "normal": list(f.normal),
                "rhs": fmt(f.rhs),
                "kind": f.kind,
                "point": fmt_vec(f.point),
            }
            for f in cc.facets
        ],
        "vertices": [{"point": fmt_vec(c.interior), "label": [list(d) for d in c.label]} for c in cc.vertices],
    }


def complex_segments(cc: CellComplex, inst: AuctionInstance, p_hi: Optional[Sequence[Fraction]] = None) -> List[Tuple[Vec, Vec, Bundle, Bundle]]:
    """2-D facets clipped to ``[0, p_hi]`` (``p_max`` by default) as line segments."""
    if cc.M != 2:
        from src.auction.errors import UnsupportedDimension

        raise UnsupportedDimension("segment export is two-dimensional only", "M")
    hi = to_vec(p_hi) if p_hi is not None else compute_p_max(cc.valuation, inst)
    box = [((Fraction(1), Fraction(0)), hi[0]), ((Fraction(0), Fraction(1)), hi[1])]
    out = []
    for f in cc.facets:
        pts = polytope_vertices(list(f.cell.constraints) + box, list(f.cell.equalities), 2)
        if len(pts) >= 2:
            out.append((pts[0], pts[-1], f.plus, f.minus))
    return out
