"""Corpus-level properties of substitutes opponents, checked exactly on seeded instances."""

import itertools
from fractions import Fraction as F

import numpy as np
import pytest

from src.auction.discrete import (
    ConstantPolicy,
    opponent_bid,
    round_bound,
    simulate,
    transition,
    truncated_grid,
    value_constant,
    value_dp,
    value_tilde,
)
from src.auction.filippov import euler_trace, loglog_slope, trace, value_continuous, value_tilde_continuous
from src.auction.lattice import AuctionInstance, Valuation, compute_p_max, random_substitutes_valuation
from src.auction.rational import dot, leq, sup_norm
from src.auction.semilinear import decompose_value, detect_discontinuities, value_map
from src.auction.tropical import aggregated_demand_violations, demand, enumerate_cells, substitutes_check

V_SUB = Valuation(table={"0,0": 0, "1,0": 4, "0,1": 3, "1,1": 6}, name="sub")
V_EX = Valuation(table={"0,0": 0, "1,0": 1, "0,1": 2, "1,1": 5}, name="ex")
SUB = AuctionInstance(M=2, m=(1, 1), p_min=("1/8", "3/16"), eps=("1/4", "1/4"))
EX = AuctionInstance(M=2, m=(1, 1), p_min=("29/10", "9/5"), eps=("1/5", "2/5"))

SIZES = [(1, 1), (2, 2), (3, 3)]


def corpus_instance(seed):
    """Seeded substitutes opponent and player; grid offsets ``eps/7`` and ``eps/11`` avoid every tie."""
    m = SIZES[seed % 3]
    eps = ((F(1, 4), F(1, 2))[seed % 2], (F(1, 4), F(1, 2))[(seed // 2) % 2])
    inst = AuctionInstance(M=2, m=m, p_min=(eps[0] / 7, eps[1] / 11), eps=eps)
    v = random_substitutes_valuation(seed, inst, scale=F(3))
    rng = np.random.default_rng(1000 + seed)
    lattice = inst.lattice()
    draws = {k: int(rng.integers(0, 8 * (sum(k) + 1))) if any(k) else 0 for k in lattice}
    w_table = {k: F(max(draws[l] for l in lattice if leq(l, k))) for k in lattice}
    w = Valuation(table=w_table, name="player")
    return inst, v, w


def constant_values(inst, v, w):
    """Independent recursion ``V(l, p) = V(l, T(l, p))`` on the price grid."""
    memo = {}

    def V(l, p):
        key = (l, p)
        if key not in memo:
            nxt = transition(l, p, inst, v)
            memo[key] = w(l) - dot(l, p) if nxt == p else V(l, nxt)
        return memo[key]

    return V


@pytest.mark.parametrize("seed", range(100))
def test_constant_strategies_are_optimal(seed):
    inst, v, w = corpus_instance(seed)
    table = value_dp(inst, v, w)
    V = constant_values(inst, v, w)
    lattice = inst.lattice()
    for p in truncated_grid(inst, v):
        d = opponent_bid(v, p)
        for k in lattice:
            if all(a + b <= c for a, b, c in zip(k, d, inst.m)):
                tilde = w(k) - dot(k, p)
            else:
                nxt = transition(k, p, inst, v)
                tilde = max(V(l, nxt) for l in lattice if sum(l) <= sum(k))
            assert table.value(k, p) == tilde, (k, p)
    for k in lattice:
        assert value_tilde(k, inst.p_min, inst, v, w) == table.value(k)
        traj = simulate(ConstantPolicy(k), inst, v)
        assert traj.stop_round <= round_bound(inst, v) + 1


def test_switching_beats_constant_bids_without_substitutes():
    w = Valuation(table={"0,0": 0, "1,0": 10, "0,1": 0, "1,1": 10})
    table = value_dp(EX, V_EX, w)
    best_constant = max(value_constant(k, EX.p_min, EX, V_EX, w) for k in EX.lattice())
    assert table.value((0, 1)) == F(71, 10) == 10 - 3 + EX.eps[0] / 2
    assert best_constant == F(69, 10) == 10 - 3 - EX.eps[0] / 2


def _euler_instances():
    out = []
    for seed in range(20):
        inst, v, w = corpus_instance(seed * 3 + 1)  # supply (2, 2) throughout
        rng = np.random.default_rng(seed)
        k = inst.lattice()[int(rng.integers(1, len(inst.lattice())))]
        p0 = (F(int(rng.integers(0, 16)), 4) + F(1, 7919), F(int(rng.integers(0, 16)), 4) + F(1, 7907))
        out.append((inst, v, w, k, p0))
    return out


def test_discrete_auction_converges_at_first_order():
    hs = [F(1, 2**n) for n in range(3, 10)]
    cases = [
        (inst, v, k, p0, trace(k, p0, enumerate_cells(v, inst), inst).final_price)
        for inst, v, _, k, p0 in _euler_instances()
    ]
    mean_errors = []
    for h in hs:
        errs = []
        for inst, v, k, p0, exact in cases:
            errs.append(sup_norm(euler_trace(k, p0, h, inst, v)[-1][1], exact))
        mean_errors.append(sum(errs) / len(errs))
    assert loglog_slope(hs, mean_errors) >= 0.9


def test_discrete_values_approach_the_continuous_switch_value():
    for inst, v, w, k, p0 in _euler_instances()[:10]:
        cc = enumerate_cells(v, inst)
        target = value_tilde_continuous(k, p0, cc, inst, w)
        coarse, fine = (
            abs(value_tilde(k, p0, inst.with_eps((h, h)), v, w) - target) for h in (F(1, 8), F(1, 512))
        )
        assert fine <= F(1, 8)
        assert fine <= coarse + F(1, 64)


@pytest.mark.parametrize("v", [V_SUB, V_EX], ids=["substitutes", "complements"])
def test_law_of_aggregated_demand(v):
    rng = np.random.default_rng(5)
    prices = [tuple(F(int(x), 64) for x in rng.integers(0, 448, size=2)) for _ in range(142)]
    assert aggregated_demand_violations(v, prices) == []


def test_law_of_aggregated_demand_on_corpus():
    for seed in range(5):
        inst, v, _ = corpus_instance(seed)
        rng = np.random.default_rng(seed)
        prices = [tuple(F(int(x), 32) for x in rng.integers(0, 320, size=2)) for _ in range(142)]
        assert aggregated_demand_violations(v, prices) == []


def _generic_points(rng, hi, count):
    """Rational points in ``(0, hi)^2`` whose denominators 997 and 991 keep them off every integer-data line."""
    out = []
    while len(out) < count:
        x, y = (int(z) for z in rng.integers(1, hi * 991, size=2))
        if x % 997 and y % 991:
            out.append((F(x, 997), F(y, 991)))
    return out


def _grid(inst, n):
    return [
        tuple(p + i * e for p, i, e in zip(inst.p_min, idx, inst.eps))
        for idx in itertools.product(range(n), repeat=inst.M)
    ]


def _transition_violations(inst, v, n):
    bad = []
    grid = _grid(inst, n)
    for p, q in itertools.product(grid, repeat=2):
        if p == q or not leq(p, q):
            continue
        for k in inst.lattice():
            if not leq(transition(k, p, inst, v), transition(k, q, inst, v)):
                bad.append((k, p, q))
    return bad


def test_transition_and_value_are_monotone_under_substitutes():
    for seed in (0, 1, 2, 3):
        inst, v, w = corpus_instance(seed)
        assert _transition_violations(inst, v, 7) == []
        grid = _grid(inst, 7)
        V = constant_values(inst, v, w)
        for k in inst.lattice():
            for p, q in itertools.product(grid, repeat=2):
                if leq(p, q):
                    assert V(k, q) <= V(k, p)


def test_monotonicity_fails_for_complements():
    assert _transition_violations(EX, V_EX, 6) != []


def random_complements_valuation(seed):
    """Two single units whose joint value exceeds the sum of their values."""
    rng = np.random.default_rng(500 + seed)
    a, b = (int(x) for x in rng.integers(1, 5, size=2))
    c = int(rng.integers(2, 5))
    return Valuation(table={"0,0": 0, "1,0": a, "0,1": b, "1,1": a + b + c}, name=f"complements-{seed}")


def _demand_drops(v, hi, rng, count):
    """Raise one price at a time between generic points; count drops in the other category's demand."""
    drops = 0
    for idx, (p, s) in enumerate(zip(_generic_points(rng, hi, count), _generic_points(rng, hi, count))):
        i = idx % 2
        q = tuple(x + s[i] if j == i else x for j, x in enumerate(p))
        d, e = demand(v, p), demand(v, q)
        if d.is_singleton and e.is_singleton and e.single()[1 - i] < d.single()[1 - i]:
            drops += 1
    return drops


def _scan_bound(v, inst):
    return int(max(compute_p_max(v, inst))) + 1


def test_demand_scan_agrees_with_facet_criterion_on_corpus():
    for seed in range(6):
        inst, v, _ = corpus_instance(seed)
        assert substitutes_check(v, inst).ok
        assert _demand_drops(v, _scan_bound(v, inst), np.random.default_rng(seed), 1000) == 0


def test_demand_scan_agrees_with_facet_criterion_on_complements():
    for seed in range(6):
        v = random_complements_valuation(seed)
        assert not substitutes_check(v, SUB).ok
        assert _demand_drops(v, _scan_bound(v, SUB), np.random.default_rng(seed), 1000) > 0


def test_decomposition_matches_traces():
    cc = enumerate_cells(V_SUB, SUB)
    w = Valuation(table={"0,0": 0, "1,0": 10, "0,1": 1, "1,1": 20})
    rng = np.random.default_rng(9)
    for k in SUB.lattice():
        surface = decompose_value(k, ((0, 0), (6, 6)), cc, SUB, w)
        for p in _generic_points(rng, 6, 250):
            assert surface.value_at(p) == value_continuous(k, p, cc, SUB, w)
        assert detect_discontinuities(surface) == []


def test_decomposition_matches_traces_on_corpus():
    for seed in (1, 4):
        inst, v, w = corpus_instance(seed)
        cc = enumerate_cells(v, inst)
        rng = np.random.default_rng(seed)
        k = inst.lattice()[-1]
        surface = decompose_value(k, ((0, 0), (4, 4)), cc, inst, w)
        for p in _generic_points(rng, 4, 50):
            assert surface.value_at(p) == value_continuous(k, p, cc, inst, w)


@pytest.mark.parametrize("resolution", [6, 12])
def test_switch_value_discontinuity_is_resolution_stable(resolution):
    w = Valuation(table={"0,0": 0, "1,0": 8, "0,1": 1, "1,1": 10})
    lo = (F(10, 3), F(7, 2) + F(1, 7))
    hi = (F(16, 3), F(11, 2) + F(1, 7))
    grid = value_map("V_tilde", (1, 1), (lo, hi), resolution, SUB, V_SUB, w)
    jumps = detect_discontinuities(grid)
    assert jumps
    assert all(d.a[0] < 4 <= d.b[0] and d.a[1] == d.b[1] for d in jumps)
