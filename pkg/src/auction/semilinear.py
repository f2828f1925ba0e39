"""Piecewise-affine structure of the continuous values.

For two categories the final-price map ``p -> P_k(p)`` is decomposed exactly:
start regions are pushed forward through the cells they flow across, split
wherever the first catching bundle changes, and every inequality met on the
way is pulled back to start coordinates. Grid sampling covers any dimension.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from src.auction.discrete import DiscreteSolver, value_dp_at
from src.auction.errors import AuctionError, UnsupportedDimension, ValidationFailure
from src.auction.filippov import cell_velocity, event_bound, filippov_velocity, trace, value_continuous, value_tilde_continuous
from src.auction.lattice import AuctionInstance, Valuation
from src.auction.lp import affine_dimension, polytope_vertices
from src.auction.rational import Bundle, Vec, dot, fmt, fmt_vec, to_vec
from src.auction.tropical import CellComplex, cell_rows, substitutes_check

logger = logging.getLogger(__name__)

Row = Tuple[Tuple[Fraction, ...], Fraction]
Matrix = Tuple[Tuple[Fraction, ...], ...]

_ZERO = Fraction(0)
_ONE = Fraction(1)


def _identity(dim: int) -> Matrix:
    return tuple(tuple(_ONE if i == j else _ZERO for j in range(dim)) for i in range(dim))


def _apply(A: Matrix, c: Vec, p: Sequence[Fraction]) -> Vec:
    return tuple(dot(row, p) + ci for row, ci in zip(A, c))


def _pull_back(row: Row, A: Matrix, c: Vec) -> Row:
    """``<a, A p + c> <= b`` rewritten as a row in ``p``."""
    a, b = row
    dim = len(A[0])
    return tuple(sum((a[i] * A[i][j] for i in range(len(a))), _ZERO) for j in range(dim)), b - dot(a, c)


def _clean(rows: Sequence[Row]) -> Optional[List[Row]]:
    """Drop trivially true rows; ``None`` if some row can never hold."""
    out = []
    for a, b in rows:
        if any(a):
            out.append((tuple(a), b))
        elif b < 0:
            return None
    return out


def _full_dimensional(rows: Sequence[Row], dim: int) -> bool:
    return affine_dimension(rows, [], dim) == dim


def box_rows(lo: Sequence[Fraction], hi: Sequence[Fraction]) -> List[Row]:
    dim = len(lo)
    rows = []
    for j in range(dim):
        e = tuple(_ONE if i == j else _ZERO for i in range(dim))
        rows.append((tuple(-x for x in e), -lo[j]))
        rows.append((e, hi[j]))
    return rows


@dataclass(frozen=True)
class Region:
    """Start prices ``constraints`` flowing to ``A p + c``; ``cells`` is the visited cell sequence."""

    constraints: Tuple[Row, ...]
    A: Matrix
    c: Vec
    cells: Tuple[Tuple[Bundle, ...], ...]
    offset: Fraction
    slope: Vec

    def contains(self, p: Sequence[Fraction], toward: Optional[Sequence[int]] = None) -> bool:
        """Half-open membership: tight rows keep ``p`` only if they open away from ``toward``.

        ``toward`` defaults to all ones, which makes regions lower-left closed.
        A tight row is decided by the first non-zero entry of
        ``(<a, toward>, a_1 toward_1, ..., a_M toward_M)``.
        """
        signs = tuple(toward) if toward is not None else (1,) * len(p)
        for a, b in self.constraints:
            lhs = dot(a, p)
            if lhs > b:
                return False
            if lhs == b:
                order = [dot(a, signs)] + [x * s for x, s in zip(a, signs)]
                if next(x for x in order if x) > 0:
                    return False
        return True

    def final_price(self, p: Sequence[Fraction]) -> Vec:
        return _apply(self.A, self.c, p)

    def value(self, p: Sequence[Fraction]) -> Fraction:
        return self.offset + dot(self.slope, p)

    def vertices(self) -> List[Vec]:
        return polytope_vertices(list(self.constraints), [], len(self.c))


@dataclass
class ValueSurface:
    k: Bundle
    lo: Vec
    hi: Vec
    regions: List[Region] = field(default_factory=list)

    def region_at(self, p: Sequence[Fraction]) -> Region:
        """The single region holding ``p``; on an upper face of the box the tie-break turns inward."""
        toward = tuple(-1 if x == h else 1 for x, h in zip(p, self.hi))
        for r in self.regions:
            if r.contains(p, toward):
                return r
        raise ValidationFailure(f"price ({', '.join(fmt_vec(p))}) lies outside the decomposed box", "price")

    def value_at(self, p: Sequence[Fraction]) -> Fraction:
        return self.region_at(p).value(p)

    def affine_pieces(self) -> Dict[Tuple[Fraction, Vec], List[Tuple[Tuple[Bundle, ...], ...]]]:
        """Regions merged by identical affine value data; the cell sequences stay as annotation."""
        out: Dict[Tuple[Fraction, Vec], List] = {}
        for r in self.regions:
            out.setdefault((r.offset, r.slope), []).append(r.cells)
        return out

    def as_dict(self) -> dict:
        return {
            "k": list(self.k),
            "box": {"lo": fmt_vec(self.lo), "hi": fmt_vec(self.hi)},
            "pieces": [
                {"value": {"a": fmt(a), "b": fmt_vec(b)}, "cells": [[[list(d) for d in label] for label in s] for s in seqs]}
                for (a, b), seqs in self.affine_pieces().items()
            ],
            "regions": [
                {
                    "constraints": [{"a": fmt_vec(a), "b": fmt(b)} for a, b in r.constraints],
                    "vertices": [fmt_vec(p) for p in r.vertices()],
                    "final_price": {"A": [fmt_vec(row) for row in r.A], "c": fmt_vec(r.c)},
                    "value": {"a": fmt(r.offset), "b": fmt_vec(r.slope)},
                    "cells": [[list(d) for d in label] for label in r.cells],
                }
                for r in self.regions
            ],
        }


@dataclass
class _Piece:
    rows: List[Row]
    A: Matrix
    c: Vec
    cell: Bundle
    history: Tuple[Tuple[Bundle, ...], ...]


def _exit_pieces(piece: _Piece, v: Valuation, u: Bundle) -> List[Tuple[_Piece, Bundle]]:
    """Split ``piece`` by the bundle that first catches up with its cell, moving the map to the exit point."""
    delta = piece.cell
    dim = len(u)
    times = {}
    for other in v.bundles:
        if other == delta:
            continue
        n = tuple(d - o for d, o in zip(delta, other))
        rate = dot(n, u)
        if rate <= 0:
            continue
        # tau(p) = (v(delta) - v(other) - <n, A p + c>) / rate
        alpha = tuple(-sum((n[i] * piece.A[i][j] for i in range(dim)), _ZERO) / rate for j in range(dim))
        beta = (v(delta) - v(other) - dot(n, piece.c)) / rate
        times[other] = (alpha, beta)
    out = []
    for other, (alpha, beta) in times.items():
        rows = list(piece.rows)
        for rival, (a2, b2) in times.items():
            if rival != other:
                rows.append((tuple(x - y for x, y in zip(alpha, a2)), b2 - beta))
        rows = _clean(rows)
        if rows is None or not _full_dimensional(rows, dim):
            continue
        A = tuple(tuple(piece.A[i][j] + u[i] * alpha[j] for j in range(dim)) for i in range(dim))
        c = tuple(ci + u[i] * beta for i, ci in enumerate(piece.c))
        out.append((_Piece(rows, A, c, delta, piece.history), other))
    return out


def decompose_value(
    k: Sequence[int],
    box: Tuple[Sequence[Fraction], Sequence[Fraction]],
    cc: CellComplex,
    inst: AuctionInstance,
    w: Valuation,
) -> ValueSurface:
    if cc.M != 2:
        raise UnsupportedDimension("exact value decomposition is only available for two categories", "M")
    if not substitutes_check(cc.valuation, inst).ok:
        raise ValidationFailure("decomposition needs a substitutes valuation", cc.valuation.name)
    k = tuple(k)
    lo, hi = to_vec(box[0], "box.lo"), to_vec(box[1], "box.hi")
    v = cc.valuation
    dim = 2
    surface = ValueSurface(k, lo, hi)
    limit = event_bound(cc)

    stack: List[_Piece] = []
    for delta in sorted(cc.cells):
        rows = _clean(box_rows(lo, hi) + [r for r, _ in cell_rows(v, delta)])
        if rows is not None and _full_dimensional(rows, dim):
            stack.append(_Piece(rows, _identity(dim), (_ZERO,) * dim, delta, ((delta,),)))

    def finish(piece: _Piece, A: Matrix, c: Vec) -> None:
        offset = w(k) - dot(k, c)
        slope = tuple(-sum((k[i] * A[i][j] for i in range(dim)), _ZERO) for j in range(dim))
        surface.regions.append(Region(tuple(piece.rows), A, c, piece.history, offset, slope))

    while stack:
        piece = stack.pop()
        if len(piece.history) > limit:
            raise AuctionError(f"cell sequence longer than {limit} during decomposition")
        u = cell_velocity(k, piece.cell, cc.m)
        if not any(u):
            finish(piece, piece.A, piece.c)
            continue
        for moved, other in _exit_pieces(piece, v, u):
            facet = cc.facet(piece.cell, other)
            if facet is None:
                logger.warning("flow from %s meets %s outside a facet; piece dropped", piece.cell, other)
                continue
            fv = filippov_velocity(k, facet.point, cc)
            label = tuple(sorted((piece.cell, other)))
            history = moved.history + (label,)
            if fv.is_zero:
                finish(_Piece(moved.rows, moved.A, moved.c, other, history), moved.A, moved.c)
            elif fv.support == (other,):
                rows = list(moved.rows)
                stack.append(_Piece(rows, moved.A, moved.c, other, history + ((other,),)))
            else:
                end = trace(k, facet.point, cc, inst).final_price
                zero = tuple(tuple(_ZERO for _ in range(dim)) for _ in range(dim))
                finish(_Piece(moved.rows, zero, end, other, history), zero, end)
    logger.debug("bid %s: %d regions", k, len(surface.regions))
    return surface


@dataclass
class ValueGrid:
    kind: str
    k: Bundle
    axes: List[List[Fraction]]
    values: Dict[Tuple[int, ...], Fraction]

    def point(self, idx: Sequence[int]) -> Vec:
        return tuple(axis[i] for axis, i in zip(self.axes, idx))

    def matrix(self) -> List[List[Fraction]]:
        """Rows follow the first axis; two categories only."""
        if len(self.axes) != 2:
            raise UnsupportedDimension("matrix view is two-dimensional only", "M")
        return [[self.values[(i, j)] for j in range(len(self.axes[1]))] for i in range(len(self.axes[0]))]

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "k": list(self.k),
            "axes": [fmt_vec(a) for a in self.axes],
            "samples": [{"index": list(i), "value": fmt(val)} for i, val in sorted(self.values.items())],
        }


KINDS = ("W_eps", "V", "V_tilde")


def value_map(
    kind: str,
    k: Sequence[int],
    box: Tuple[Sequence[Fraction], Sequence[Fraction]],
    resolution: Union[int, Sequence[int]],
    inst: AuctionInstance,
    v: Valuation,
    w: Valuation,
    cc: Optional[CellComplex] = None,
) -> ValueGrid:
    if kind not in KINDS:
        raise ValidationFailure(f"unknown value kind {kind!r}, expected one of {', '.join(KINDS)}", "kind")
    k = tuple(k)
    lo, hi = to_vec(box[0], "box.lo"), to_vec(box[1], "box.hi")
    res = [resolution] * inst.M if isinstance(resolution, int) else list(resolution)
    if any(r < 1 for r in res):
        raise ValidationFailure("resolution must be >= 1", "resolution")
    axes = [[a + (b - a) * Fraction(i, r) for i in range(r + 1)] for a, b, r in zip(lo, hi, res)]

    if kind == "W_eps":
        solver = DiscreteSolver(inst, v, w)
        evaluate = lambda p: value_dp_at(k, p, inst, v, w, solver)  # noqa: E731
    else:
        if cc is None:
            from src.auction.tropical import enumerate_cells

            cc = enumerate_cells(v, inst)
        fn = value_continuous if kind == "V" else value_tilde_continuous
        evaluate = lambda p: fn(k, p, cc, inst, w)  # noqa: E731

    values: Dict[Tuple[int, ...], Fraction] = {}
    for idx in itertools.product(*(range(len(a)) for a in axes)):
        p = tuple(axis[i] for axis, i in zip(axes, idx))
        try:
            values[idx] = evaluate(p)
        except AuctionError as exc:
            exc.grid_point = fmt_vec(p)
            raise
    return ValueGrid(kind, k, axes, values)


@dataclass(frozen=True)
class Discontinuity:
    a: Vec
    b: Vec
    jump: Fraction

    def as_dict(self) -> dict:
        return {"from": fmt_vec(self.a), "to": fmt_vec(self.b), "jump": fmt(self.jump)}


def _surface_jumps(vs: ValueSurface) -> List[Discontinuity]:
    out = []
    for r1, r2 in itertools.combinations(vs.regions, 2):
        pts = polytope_vertices(list(r1.constraints) + list(r2.constraints), [], len(vs.lo))
        if len(pts) < 2:
            continue
        a, b = pts[0], pts[-1]
        mid = tuple((x + y) / 2 for x, y in zip(a, b))
        jumps = [r2.value(q) - r1.value(q) for q in (a, mid, b)]
        if any(jumps):
            out.append(Discontinuity(a, b, max(jumps, key=abs)))
    return out


def _grid_jumps(vg: ValueGrid) -> List[Discontinuity]:
    """Edges whose difference leaves the range spanned by both neighbouring differences.

    A boundary edge has neighbours on one side only; it is flagged when the
    two differences next to it agree and its own differs from them.
    """
    out = []
    dims = [len(a) for a in vg.axes]
    for axis in range(len(dims)):
        others = [range(n) if j != axis else range(1) for j, n in enumerate(dims)]
        for base in itertools.product(*others):
            line = []
            for i in range(dims[axis]):
                idx = list(base)
                idx[axis] = i
                line.append(tuple(idx))
            diffs = [vg.values[line[i + 1]] - vg.values[line[i]] for i in range(len(line) - 1)]
            for i in range(1, len(diffs) - 1):
                lo, hi = sorted((diffs[i - 1], diffs[i + 1]))
                if not lo <= diffs[i] <= hi:
                    out.append(Discontinuity(vg.point(line[i]), vg.point(line[i + 1]), diffs[i]))
            if len(diffs) >= 3:
                last = len(diffs) - 1
                for i, j, l in ((0, 1, 2), (last, last - 1, last - 2)):
                    if diffs[j] == diffs[l] != diffs[i]:
                        out.append(Discontinuity(vg.point(line[i]), vg.point(line[i + 1]), diffs[i]))
    return out


def detect_discontinuities(surface: Union[ValueSurface, ValueGrid]) -> List[Discontinuity]:
    if isinstance(surface, ValueSurface):
        return _surface_jumps(surface)
    return _grid_jumps(surface)


def affine_pieces_on_line(values: Sequence[Fraction]) -> int:
    """Number of maximal runs of equal consecutive differences along a scan line."""
    diffs = [b - a for a, b in zip(values, values[1:])]
    if not diffs:
        return 1
    return 1 + sum(1 for a, b in zip(diffs, diffs[1:]) if a != b)
