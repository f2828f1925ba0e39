"""Round-based clock auction against a straightforward opponent.

Prices live on the grid ``p_min + n * eps``. In each round the player bids a
bundle, the opponent demands its unique argmax, and every category in excess
moves up by one increment. The auction stops at the first round where the two
bids fit within supply.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

from src.auction.errors import AuctionError, GridTieError, RejectedBidError
from src.auction.lattice import AuctionInstance, Valuation, compute_p_max
from src.auction.rational import Bundle, Vec, dot, fmt_bundle, fmt_vec, leq
from src.auction.tropical import demand

logger = logging.getLogger(__name__)


def perturb_price(p: Sequence[Fraction], eps: Sequence[Fraction]) -> Vec:
    """Shift ``p`` by ``eta * (1, 1/2, 1/3, ...)`` with ``eta = min(eps) / 10**6``."""
    eta = min(eps) / 10**6
    return tuple(Fraction(x) + eta / (j + 1) for j, x in enumerate(p))


def opponent_bid(v: Valuation, p: Sequence[Fraction]) -> Bundle:
    ds = demand(v, p)
    if not ds.is_singleton:
        raise GridTieError(f"price ({', '.join(fmt_vec(ds.price))}) lies on the indifference locus", ds.price, ds.bundles)
    return ds.bundles[0]


def excess(k: Sequence[int], d: Sequence[int], m: Sequence[int]) -> Tuple[bool, ...]:
    return tuple(a + b > c for a, b, c in zip(k, d, m))


def transition(k: Sequence[int], p: Sequence[Fraction], inst: AuctionInstance, v: Valuation) -> Vec:
    d = opponent_bid(v, p)
    return tuple(pj + (e if up else 0) for pj, e, up in zip(p, inst.eps, excess(k, d, inst.m)))


def round_bound(inst: AuctionInstance, v: Valuation, start: Optional[Sequence[Fraction]] = None) -> int:
    """Maximal number of price increments before the opponent drops out everywhere."""
    start = tuple(start) if start is not None else inst.p_min
    p_max = compute_p_max(v, inst)
    return sum(max(0, math.ceil((hi - lo) / e)) for hi, lo, e in zip(p_max, start, inst.eps))


@dataclass
class Round:
    price: Vec
    bid: Bundle
    opponent: Bundle


class Policy(Protocol):
    def bid(self, n: int, price: Vec, history: Sequence[Round]) -> Bundle: ...


@dataclass(frozen=True)
class ConstantPolicy:
    k: Bundle

    def bid(self, n: int, price: Vec, history: Sequence[Round]) -> Bundle:
        return tuple(self.k)


@dataclass(frozen=True)
class SequencePolicy:
    """Fixed bid list; the last bid repeats once the list runs out."""

    bids: Tuple[Bundle, ...]

    def bid(self, n: int, price: Vec, history: Sequence[Round]) -> Bundle:
        return tuple(self.bids[min(n, len(self.bids) - 1)])


@dataclass
class DiscreteTrajectory:
    rounds: List[Round] = field(default_factory=list)

    @property
    def prices(self) -> List[Vec]:
        return [r.price for r in self.rounds]

    @property
    def bids(self) -> List[Bundle]:
        return [r.bid for r in self.rounds]

    @property
    def opponent_demands(self) -> List[Bundle]:
        return [r.opponent for r in self.rounds]

    @property
    def stop_round(self) -> int:
        return len(self.rounds) - 1

    @property
    def final_price(self) -> Vec:
        return self.rounds[-1].price

    @property
    def final_bid(self) -> Bundle:
        return self.rounds[-1].bid

    def payoff(self, w: Valuation) -> Fraction:
        return w(self.final_bid) - dot(self.final_bid, self.final_price)

    def as_rows(self) -> List[dict]:
        return [
            {"round": n, "price": fmt_vec(r.price), "bid": list(r.bid), "opponent": list(r.opponent)}
            for n, r in enumerate(self.rounds)
        ]


def simulate(
    policy: Policy,
    inst: AuctionInstance,
    v: Valuation,
    start: Optional[Sequence[Fraction]] = None,
) -> DiscreteTrajectory:
    p: Vec = tuple(start) if start is not None else inst.p_min
    bound = round_bound(inst, v, p)
    traj = DiscreteTrajectory()
    eligibility: Optional[int] = None
    while True:
        n = len(traj.rounds)
        k = tuple(policy.bid(n, p, traj.rounds))
        if len(k) != inst.M or any(x < 0 for x in k) or not leq(k, inst.m):
            raise RejectedBidError(f"bid ({fmt_bundle(k)}) is outside the item lattice", f"round {n}")
        if eligibility is not None and sum(k) > eligibility:
            raise RejectedBidError(
                f"bid ({fmt_bundle(k)}) asks for {sum(k)} units, eligibility is {eligibility}", f"round {n}"
            )
        d = opponent_bid(v, p)
        traj.rounds.append(Round(p, k, d))
        up = excess(k, d, inst.m)
        if not any(up):
            break
        if n >= bound:
            raise AuctionError(f"auction did not stop within {bound + 1} rounds")
        p = tuple(pj + (e if u else 0) for pj, e, u in zip(p, inst.eps, up))
        eligibility = sum(k)
    logger.debug("auction stopped at round %d, price %s", traj.stop_round, fmt_vec(traj.final_price))
    return traj


def value_constant(k: Bundle, p: Sequence[Fraction], inst: AuctionInstance, v: Valuation, w: Valuation) -> Fraction:
    return simulate(ConstantPolicy(tuple(k)), inst, v, p).payoff(w)


def _fits(k: Sequence[int], d: Sequence[int], m: Sequence[int]) -> bool:
    return not any(excess(k, d, m))


def lower_bundles(inst: AuctionInstance, size: int) -> List[Bundle]:
    return [l for l in inst.lattice() if sum(l) <= size]


def value_tilde(k: Bundle, p: Sequence[Fraction], inst: AuctionInstance, v: Valuation, w: Valuation) -> Fraction:
    k, p = tuple(k), tuple(p)
    if _fits(k, opponent_bid(v, p), inst.m):
        return w(k) - dot(k, p)
    nxt = transition(k, p, inst, v)
    return max(value_constant(l, nxt, inst, v, w) for l in lower_bundles(inst, sum(k)))


def best_constant_bundle(p: Sequence[Fraction], inst: AuctionInstance, v: Valuation, w: Valuation) -> Bundle:
    """Argmax of the constant-bid value; the lexicographically smallest bundle wins ties."""
    best: Optional[Tuple[Fraction, Bundle]] = None
    for k in inst.lattice():
        val = value_constant(k, p, inst, v, w)
        if best is None or val > best[0]:
            best = (val, k)
    return best[1]


def reachable_prices(inst: AuctionInstance, v: Valuation, start: Optional[Sequence[Fraction]] = None) -> Dict[Vec, Bundle]:
    """Closure of the start price under every bid's transition, with the opponent's demand at each price."""
    start = tuple(start) if start is not None else inst.p_min
    seen: Dict[Vec, Bundle] = {}
    queue = deque([start])
    lattice = inst.lattice()
    while queue:
        p = queue.popleft()
        if p in seen:
            continue
        d = opponent_bid(v, p)
        seen[p] = d
        patterns = {excess(k, d, inst.m) for k in lattice}
        for up in sorted(patterns):
            if any(up):
                nxt = tuple(pj + (e if u else 0) for pj, e, u in zip(p, inst.eps, up))
                if nxt not in seen:
                    queue.append(nxt)
    return seen


class DiscreteSolver:
    """Memoised values ``W(k, p)`` of the optimal eligibility-respecting strategy.

    ``W(k, p)`` depends only on the current bid and price, so one solver
    serves any number of start prices and reuses every solved entry.
    """

    def __init__(self, inst: AuctionInstance, v: Valuation, w: Valuation) -> None:
        self.inst = inst
        self.v = v
        self.w = w
        self.values: Dict[Tuple[Bundle, Vec], Fraction] = {}
        self.policy: Dict[Tuple[Bundle, Vec], Optional[Bundle]] = {}
        self.demands: Dict[Vec, Bundle] = {}
        self._lattice = inst.lattice()

    def _index_sum(self, p: Vec, start: Vec) -> int:
        return sum(int((a - b) / e) for a, b, e in zip(p, start, self.inst.eps))

    def solve(self, start: Sequence[Fraction]) -> None:
        start = tuple(start)
        if start in self.demands:
            return
        # prices reachable from the start that are not solved yet
        pending: Dict[Vec, Bundle] = {}
        queue = deque([start])
        while queue:
            p = queue.popleft()
            if p in pending or p in self.demands:
                continue
            d = opponent_bid(self.v, p)
            pending[p] = d
            for up in {excess(k, d, self.inst.m) for k in self._lattice}:
                if any(up):
                    queue.append(tuple(pj + (e if u else 0) for pj, e, u in zip(p, self.inst.eps, up)))
        order = sorted(pending, key=lambda p: self._index_sum(p, start), reverse=True)
        for p in order:
            d = pending[p]
            for k in self._lattice:
                up = excess(k, d, self.inst.m)
                if not any(up):
                    self.values[(k, p)] = self.w(k) - dot(k, p)
                    self.policy[(k, p)] = None
                    continue
                nxt = tuple(pj + (e if u else 0) for pj, e, u in zip(p, self.inst.eps, up))
                best: Optional[Tuple[Fraction, Bundle]] = None
                for l in self._lattice:
                    if sum(l) > sum(k):
                        continue
                    val = self.values[(l, nxt)]
                    if best is None or val > best[0]:
                        best = (val, l)
                self.values[(k, p)], self.policy[(k, p)] = best
            self.demands[p] = d
        logger.debug("solved %d new grid prices from %s", len(order), fmt_vec(start))

    def value(self, k: Sequence[int], p: Sequence[Fraction]) -> Fraction:
        key = (tuple(k), tuple(p))
        if key not in self.values:
            self.solve(p)
        return self.values[key]


@dataclass
class ValueTable:
    inst: AuctionInstance
    start: Vec
    values: Dict[Tuple[Bundle, Vec], Fraction]
    policy: Dict[Tuple[Bundle, Vec], Optional[Bundle]]
    demands: Dict[Vec, Bundle]

    def value(self, k: Sequence[int], p: Optional[Sequence[Fraction]] = None) -> Fraction:
        return self.values[(tuple(k), tuple(p) if p is not None else self.start)]

    def next_bid(self, k: Sequence[int], p: Sequence[Fraction]) -> Optional[Bundle]:
        return self.policy[(tuple(k), tuple(p))]

    def best_initial_bid(self) -> Bundle:
        best: Optional[Tuple[Fraction, Bundle]] = None
        for k in self.inst.lattice():
            val = self.value(k)
            if best is None or val > best[0]:
                best = (val, k)
        return best[1]

    def fixed_point_violations(self, w: Valuation) -> List[Tuple[Bundle, Vec]]:
        """Entries that do not satisfy the dynamic-programming equation."""
        bad = []
        for (k, p), val in self.values.items():
            d = self.demands[p]
            up = excess(k, d, self.inst.m)
            if not any(up):
                expected = w(k) - dot(k, p)
            else:
                nxt = tuple(pj + (e if u else 0) for pj, e, u in zip(p, self.inst.eps, up))
                expected = max(self.values[(l, nxt)] for l in lower_bundles(self.inst, sum(k)))
            if val != expected:
                bad.append((k, p))
        return bad

    def rows(self) -> List[dict]:
        return [
            {
                "bundle": fmt_bundle(k),
                "price": fmt_vec(p),
                "W": str(val),
                "next": fmt_bundle(self.policy[(k, p)]) if self.policy[(k, p)] is not None else "",
            }
            for (k, p), val in sorted(self.values.items())
        ]


@dataclass(frozen=True)
class PolicyTable:
    """Rollout of a solved table from a chosen first bid."""

    table: ValueTable
    initial: Bundle

    def bid(self, n: int, price: Vec, history: Sequence[Round]) -> Bundle:
        if n == 0:
            return tuple(self.initial)
        prev = history[-1]
        nxt = self.table.next_bid(prev.bid, prev.price)
        if nxt is None:
            raise AuctionError(f"no continuation stored after ({fmt_bundle(prev.bid)}) at {fmt_vec(prev.price)}")
        return nxt


def truncated_grid(inst: AuctionInstance, v: Valuation) -> List[Vec]:
    """Grid prices ``p_min + n * eps`` with every coordinate at most ``p_max``."""
    p_max = compute_p_max(v, inst)
    counts = [max(0, math.floor((hi - lo) / e)) + 1 for hi, lo, e in zip(p_max, inst.p_min, inst.eps)]
    return [
        tuple(lo + n * e for lo, n, e in zip(inst.p_min, idx, inst.eps))
        for idx in itertools.product(*(range(c) for c in counts))
    ]


def value_dp(
    inst: AuctionInstance,
    v: Valuation,
    w: Valuation,
    solver: Optional[DiscreteSolver] = None,
    reachable_only: bool = False,
) -> ValueTable:
    """``W`` on the truncated grid together with the prices its transitions lead to.

    ``reachable_only`` keeps the closure of ``p_min`` alone, which is all a
    rollout from the start needs.
    """
    solver = solver or DiscreteSolver(inst, v, w)
    solver.solve(inst.p_min)
    if reachable_only:
        keep_prices = set(reachable_prices(inst, v))
    else:
        # higher prices first so each solve only adds its own grid point
        for p in sorted(truncated_grid(inst, v), reverse=True):
            solver.solve(p)
        keep_prices = set(solver.demands)
    keep = {(k, p) for p in keep_prices for k in inst.lattice()}
    return ValueTable(
        inst=inst,
        start=inst.p_min,
        values={key: solver.values[key] for key in keep},
        policy={key: solver.policy[key] for key in keep},
        demands={p: solver.demands[p] for p in keep_prices},
    )


def value_dp_at(
    k: Sequence[int],
    p: Sequence[Fraction],
    inst: AuctionInstance,
    v: Valuation,
    w: Valuation,
    solver: Optional[DiscreteSolver] = None,
) -> Fraction:
    solver = solver or DiscreteSolver(inst, v, w)
    return solver.value(k, p)
