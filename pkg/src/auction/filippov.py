"""Continuous-time clock auction as a Filippov differential inclusion.

Inside the maximal cell of ``delta`` the price moves with the constant
velocity ``u = [k + delta > m]``. On the indifference locus the forward
velocity is the unique convex combination of the tied cells' velocities that
keeps the motion consistent: tied bundles in the support stay tied, every
other tied bundle falls strictly behind. Event times and weights are exact
rationals, so the tracer is combinatorial.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.auction.discrete import ConstantPolicy, simulate
from src.auction.errors import CrossingViolation, IndifferenceError, UniquenessViolation
from src.auction.lattice import AuctionInstance, Valuation
from src.auction.lp import maximize, max_margin
from src.auction.rational import Bundle, Vec, dot, fmt_bundle, fmt_vec, vsub
from src.auction.tropical import CellComplex, demand

logger = logging.getLogger(__name__)

CROSSING = "crossing"
SLIDING = "sliding"
STATIONARY = "stationary"

_ZERO = Fraction(0)


def cell_velocity(k: Sequence[int], delta: Sequence[int], m: Sequence[int]) -> Bundle:
    return tuple(int(a + b > c) for a, b, c in zip(k, delta, m))


def velocity_profile(k: Sequence[int], cc: CellComplex) -> Dict[Bundle, Bundle]:
    return {delta: cell_velocity(k, delta, cc.m) for delta in cc.cells}


def _e(dim: int, i: int) -> Bundle:
    return tuple(int(x == i) for x in range(dim))


def profile_violations(k: Sequence[int], cc: CellComplex) -> List[Tuple[Bundle, Bundle]]:
    """Adjacent pairs whose velocity jump is not compatible with their facet vector."""
    prof = velocity_profile(k, cc)
    dim = cc.M
    zero = (0,) * dim
    bad = []
    for f in cc.facets:
        du = vsub(prof[f.plus], prof[f.minus])
        n = f.normal
        pos = [i for i, x in enumerate(n) if x == 1]
        neg = [i for i, x in enumerate(n) if x == -1]
        if f.kind == "other":
            continue
        if not neg:
            ok = du in (zero, _e(dim, pos[0]))
        elif not pos:
            ok = du in (zero, tuple(-x for x in _e(dim, neg[0])))
        else:
            ei, ej = _e(dim, pos[0]), _e(dim, neg[0])
            ok = du in (zero, ei, vsub(ei, ej), tuple(-x for x in ej))
        if not ok:
            bad.append((f.plus, f.minus))
    return bad


def drift(k: Sequence[int], p: Sequence[Fraction], cc: CellComplex) -> Bundle:
    ds = demand(cc.valuation, p)
    if not ds.is_singleton:
        raise IndifferenceError(
            f"drift is set-valued at ({', '.join(fmt_vec(ds.price))}); use filippov_velocity", ds.price, ds.bundles
        )
    return cell_velocity(k, ds.bundles[0], cc.m)


@dataclass(frozen=True)
class FilippovVelocity:
    velocity: Vec
    weights: Dict[Bundle, Fraction]
    mode: str
    support: Tuple[Bundle, ...]

    @property
    def is_zero(self) -> bool:
        return not any(self.velocity)


def _support_rows(support: Sequence[Bundle], ties: Sequence[Bundle], prof: Dict[Bundle, Bundle]):
    """Linear system over the weights of ``support`` (equalities, then the rows that must be positive)."""
    d0 = support[0]
    n = len(support)
    eqs = [(tuple(Fraction(1) for _ in support), Fraction(1))]
    for d in support[1:]:
        eqs.append((tuple(Fraction(dot(vsub(d, d0), prof[s])) for s in support), _ZERO))
    pos = [tuple(Fraction(dot(vsub(d, d0), prof[s])) for s in support) for d in ties if d not in support]
    return eqs, pos, n


def _velocity_range(support, ties, prof, dim) -> Optional[Vec]:
    """The velocity if the closure of the support's weight polytope pins it down, else ``None``."""
    eqs, pos, n = _support_rows(support, ties, prof)
    A_ub = [tuple(-x for x in row) for row in pos]
    b_ub = [_ZERO] * len(pos)
    out = []
    for j in range(dim):
        c = [Fraction(prof[s][j]) for s in support]
        hi = maximize(c, A_ub, b_ub, [a for a, _ in eqs], [b for _, b in eqs])
        lo = maximize([-x for x in c], A_ub, b_ub, [a for a, _ in eqs], [b for _, b in eqs])
        if not (hi.optimal and lo.optimal) or hi.value != -lo.value:
            return None
        out.append(hi.value)
    return tuple(out)


def filippov_velocity(
    k: Sequence[int],
    p: Sequence[Fraction],
    cc: CellComplex,
    strict: bool = True,
) -> FilippovVelocity:
    k = tuple(k)
    ds = demand(cc.valuation, p)
    ties = ds.bundles
    prof = {d: cell_velocity(k, d, cc.m) for d in ties}
    dim = cc.M
    if ds.is_singleton:
        u = prof[ties[0]]
        mode = STATIONARY if not any(u) else CROSSING
        return FilippovVelocity(tuple(Fraction(x) for x in u), {ties[0]: Fraction(1)}, mode, ties)

    found: Dict[Vec, FilippovVelocity] = {}
    ambiguous: List[Vec] = []
    subsets = sorted(
        (s for r in range(1, len(ties) + 1) for s in itertools.combinations(ties, r)),
        key=lambda s: (len(s), s),
    )
    for support in subsets:
        eqs, pos, n = _support_rows(support, ties, prof)
        res = max_margin([(tuple(-x for x in row), _ZERO) for row in pos], eqs, dim=n, nonneg=True)
        if not res.optimal or res.value <= 0:
            continue
        velocity = _velocity_range(support, ties, prof, dim)
        lam = res.x[:-1]
        if velocity is None:
            ambiguous.append(tuple(sum((l * prof[s][j] for l, s in zip(lam, support)), _ZERO) for j in range(dim)))
            continue
        if velocity in found:
            continue
        weights = {s: l for s, l in zip(support, lam) if l}
        if not any(velocity):
            mode = STATIONARY if not any(any(u) for u in prof.values()) else CROSSING
        else:
            mode = CROSSING if len(support) == 1 else SLIDING
        found[velocity] = FilippovVelocity(velocity, weights, mode, tuple(support))

    if len(found) == 1 and not ambiguous:
        return next(iter(found.values()))
    candidates = list(found) + ambiguous
    message = (
        f"{len(candidates)} forward velocities for bid ({fmt_bundle(k)}) at ({', '.join(fmt_vec(ds.price))})"
    )
    if strict or not found:
        raise UniquenessViolation(message, candidates)
    logger.warning("%s; keeping the smallest support", message)
    return min(found.values(), key=lambda fv: (len(fv.support), fv.support))


@dataclass(frozen=True)
class Segment:
    t0: Fraction
    t1: Fraction
    start: Vec
    velocity: Vec
    label: Tuple[Bundle, ...]
    mode: str

    @property
    def end(self) -> Vec:
        return tuple(a + (self.t1 - self.t0) * u for a, u in zip(self.start, self.velocity))

    def at(self, t: Fraction) -> Vec:
        return tuple(a + (t - self.t0) * u for a, u in zip(self.start, self.velocity))


@dataclass
class ContinuousTrajectory:
    start: Vec
    segments: List[Segment] = field(default_factory=list)
    mode: str = "exact"

    @property
    def final_price(self) -> Vec:
        return self.segments[-1].end if self.segments else self.start

    @property
    def total_time(self) -> Fraction:
        return self.segments[-1].t1 if self.segments else _ZERO

    def position(self, t: Fraction) -> Vec:
        for seg in self.segments:
            if seg.t0 <= t <= seg.t1:
                return seg.at(t)
        return self.final_price

    def polyline(self) -> List[Tuple[Fraction, Vec]]:
        pts = [(_ZERO, self.start)]
        pts.extend((s.t1, s.end) for s in self.segments)
        return pts

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "start": fmt_vec(self.start),
            "final_price": fmt_vec(self.final_price),
            "total_time": str(self.total_time),
            "segments": [
                {
                    "t0": str(s.t0),
                    "t1": str(s.t1),
                    "start": fmt_vec(s.start),
                    "end": fmt_vec(s.end),
                    "velocity": fmt_vec(s.velocity),
                    "label": [list(d) for d in s.label],
                    "mode": s.mode,
                }
                for s in self.segments
            ],
        }


def event_bound(cc: CellComplex) -> int:
    return 2 * len(cc.facets) + len(cc.cells) + 1


def _next_event(v: Valuation, p: Vec, fv: FilippovVelocity) -> Optional[Fraction]:
    d0 = fv.support[0]
    base = v(d0) - dot(d0, p)
    best: Optional[Fraction] = None
    for other in v.bundles:
        if other in fv.support:
            continue
        rate = dot(vsub(d0, other), fv.velocity)
        if rate <= 0:
            continue
        gap = base - (v(other) - dot(other, p))
        t = gap / rate
        if t > 0 and (best is None or t < best):
            best = t
    return best


def trace(
    k: Sequence[int],
    p0: Sequence[Fraction],
    cc: CellComplex,
    inst: AuctionInstance,
    exact: Optional[bool] = None,
) -> ContinuousTrajectory:
    """Event-driven solution from ``p0`` until the velocity vanishes.

    ``exact`` defaults to whether every facet vector is unimodular; otherwise
    the run is best-effort and ties between candidate velocities are broken
    by the smallest support.
    """
    from src.auction.tropical import substitutes_check

    k = tuple(k)
    p: Vec = tuple(Fraction(x) for x in p0)
    if exact is None:
        exact = substitutes_check(cc.valuation, inst).ok
    traj = ContinuousTrajectory(start=p, mode="exact" if exact else "best-effort")
    bound = event_bound(cc)
    crossed: Dict[Tuple[Bundle, Bundle], int] = {}
    t = _ZERO
    while True:
        fv = filippov_velocity(k, p, cc, strict=exact)
        if fv.is_zero:
            break
        if len(traj.segments) >= bound:
            raise CrossingViolation(f"more than {bound} events while tracing bid ({fmt_bundle(k)})")
        tau = _next_event(cc.valuation, p, fv)
        if tau is None:
            raise CrossingViolation(f"trajectory of bid ({fmt_bundle(k)}) never stops from {fmt_vec(p)}")
        seg = Segment(t, t + tau, p, fv.velocity, fv.support, fv.mode)
        if traj.segments:
            prev = traj.segments[-1]
            if len(prev.label) == 1 and len(seg.label) == 1 and prev.velocity != seg.velocity:
                key = (prev.label[0], seg.label[0])
                crossed[key] = crossed.get(key, 0) + 1
                if crossed[key] > 1:
                    if exact:
                        raise CrossingViolation(
                            f"interface ({fmt_bundle(key[0])}) -> ({fmt_bundle(key[1])}) crossed twice"
                        )
                    logger.warning("interface %s -> %s crossed twice", key[0], key[1])
        traj.segments.append(seg)
        logger.debug("segment %s -> %s velocity %s on %s", fmt_vec(p), fmt_vec(seg.end), fmt_vec(fv.velocity), fv.support)
        t, p = seg.t1, seg.end
    return traj


def euler_trace(
    k: Sequence[int],
    p0: Sequence[Fraction],
    h: Fraction,
    inst: AuctionInstance,
    v: Valuation,
) -> List[Tuple[Fraction, Vec]]:
    """The discrete auction with uniform increment ``h`` read on the time axis ``t = n h``."""
    h = Fraction(h)
    step = inst.with_eps(tuple(h for _ in range(inst.M)))
    traj = simulate(ConstantPolicy(tuple(k)), step, v, tuple(p0))
    return [(n * h, p) for n, p in enumerate(traj.prices)]


def value_continuous(
    k: Sequence[int], p: Sequence[Fraction], cc: CellComplex, inst: AuctionInstance, w: Valuation
) -> Fraction:
    final = trace(k, p, cc, inst).final_price
    return w(k) - dot(k, final)


def value_tilde_continuous(
    k: Sequence[int], p: Sequence[Fraction], cc: CellComplex, inst: AuctionInstance, w: Valuation
) -> Fraction:
    """Clearing payoff if some demanded bundle fits next to ``k``, else the best lower constant bid."""
    k, p = tuple(k), tuple(Fraction(x) for x in p)
    ds = demand(cc.valuation, p)
    if any(all(a + b <= c for a, b, c in zip(k, d, cc.m)) for d in ds):
        return w(k) - dot(k, p)
    return max(value_continuous(l, p, cc, inst, w) for l in inst.lattice() if sum(l) <= sum(k))


def loglog_slope(hs: Sequence[Fraction], errors: Sequence[Fraction]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    x = np.log(np.array([float(h) for h in hs]))
    y = np.log(np.array([float(e) for e in errors]))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
