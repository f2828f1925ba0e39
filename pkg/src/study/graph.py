"""Case-study pipeline as a LangGraph state machine.

draw -> screen -> (draw again | analyse -> joint -> END | END when the
sampling budget is spent). Draws are pure functions of ``(seed, attempt)``.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Any, Dict, Tuple

import numpy as np
from langgraph.graph import END, START, StateGraph

from src.auction.discrete import (
    PolicyTable,
    best_constant_bundle,
    perturb_price,
    reachable_prices,
    simulate,
    value_constant,
    value_dp,
)
from src.auction.errors import GridTieError, SamplingExhausted, ValidationFailure
from src.auction.lattice import AuctionInstance, Valuation, strict_concavity_check, validate_valuation
from src.auction.rational import Bundle, dot, fmt, fmt_bundle, fmt_vec, leq
from src.auction.tropical import demand, substitutes_check
from src.config import _p
from src.study.state import TPG, VODAFONE, BidderRanges, CaseStudyConfig, CaseStudyReport, CaseStudyState

# bundle each bidder demands at the final observed price, and the best constant
# bundle the analysis predicts against a straightforward rival
FINAL_DEMAND = {VODAFONE: (0, 2), TPG: (0, 2)}
PREDICTED_BEST = {VODAFONE: (2, 0), TPG: (0, 1)}


def _draw_valuation(rng: np.random.Generator, name: str, r: BidderRanges, m: Tuple[int, int]) -> Valuation:
    cums = []
    for spans, mj in zip((r.cat1, r.cat2), m):
        if len(spans) < mj:
            raise ValidationFailure(f"{name}: one value range per unit is needed, got {len(spans)} for {mj} units", "ranges")
        units = sorted((int(rng.integers(lo, hi + 1)) for lo, hi in spans[:mj]), reverse=True)
        cums.append([0] + list(itertools.accumulate(units)))
    free = sum(m) - len(r.penalty)
    if free < 0:
        raise ValidationFailure(f"{name}: more penalty ranges than units", "ranges")
    penalties = sorted(int(rng.integers(lo, hi + 1)) for lo, hi in r.penalty)
    # total-quantity penalty: free up to ``free`` units, then increasing marginal cost
    pen = [0] * (free + 1) + list(itertools.accumulate(penalties))
    table = {
        (a, b): Fraction(cums[0][a] + cums[1][b] - pen[a + b])
        for a in range(m[0] + 1)
        for b in range(m[1] + 1)
    }
    return Valuation(table=table, name=name)


def draw_node(state: CaseStudyState) -> CaseStudyState:
    state.attempt += 1
    cfg = state.config
    rng = np.random.default_rng([cfg.seed, state.attempt])
    state.candidate = {name: _draw_valuation(rng, name, cfg.ranges[name], cfg.m) for name in (TPG, VODAFONE)}
    state.start = None
    state.perturbed = False
    state.witness = {}
    state.analyses = []
    return state


def _reach_witness(cfg: CaseStudyConfig, inst: AuctionInstance, v: Valuation):
    floor = tuple(t - e for t, e in zip(cfg.p_max_target, cfg.eps))
    for p in reachable_prices(inst, v):
        if leq(floor, p):
            return p
    return None


def analyse_role(inst: AuctionInstance, player: str, w: Valuation, opponent: str, v: Valuation) -> Dict[str, Any]:
    """Player with perfect information against a straightforward opponent."""
    table = value_dp(inst, v, w, reachable_only=True)
    constant = {k: value_constant(k, inst.p_min, inst, v, w) for k in inst.lattice()}
    best_const = best_constant_bundle(inst.p_min, inst, v, w)
    first = table.best_initial_bid()
    rollout = simulate(PolicyTable(table, first), inst, v)
    points = [
        {
            "price": fmt_vec(p),
            "opponent_demand": list(d),
            "W": fmt(max(table.value(k, p) for k in inst.lattice())),
        }
        for p, d in sorted(table.demands.items())
    ]
    return {
        "player": player,
        "opponent": opponent,
        "best_constant_bundle": list(best_const),
        "best_first_bid": list(first),
        "W": fmt(table.value(first)),
        "constant_values": {fmt_bundle(k): fmt(val) for k, val in constant.items()},
        "optimal_rollout": rollout.as_rows(),
        "final_price": fmt_vec(rollout.final_price),
        "reachable": points,
    }


def _judge(analysis: Dict[str, Any], w: Valuation, cfg: CaseStudyConfig) -> Dict[str, Any]:
    """Adds the payoff of the final demand at ``p_max_target`` and whether ``W`` strictly beats it."""
    k = FINAL_DEMAND[analysis["player"]]
    analysis["payoff_at_p_max_target"] = fmt(w(k) - dot(k, cfg.p_max_target))
    analysis["improves_on_p_max_target"] = Fraction(analysis["W"]) > Fraction(analysis["payoff_at_p_max_target"])
    return analysis


def _matches(analysis: Dict[str, Any]) -> bool:
    player = analysis["player"]
    if tuple(analysis["best_constant_bundle"]) != PREDICTED_BEST[player]:
        return False
    if not analysis["improves_on_p_max_target"]:
        return False
    if player == TPG:
        vals = analysis["constant_values"]
        return Fraction(vals["0,1"]) > Fraction(vals["0,2"])
    return True


def _witness(state: CaseStudyState) -> Dict[str, Any]:
    inst = state.instance()
    for opponent in (TPG, VODAFONE):
        p = _reach_witness(state.config, inst, state.candidate[opponent])
        if p is not None:
            return {"opponent": opponent, "price": fmt_vec(p)}
    return {}


def _analyses(state: CaseStudyState):
    inst = state.instance()
    cand = state.candidate
    return [
        _judge(analyse_role(inst, player, cand[player], opponent, cand[opponent]), cand[player], state.config)
        for player, opponent in ((VODAFONE, TPG), (TPG, VODAFONE))
    ]


def screen_node(state: CaseStudyState) -> CaseStudyState:
    cfg = state.config
    inst = cfg.instance()
    cand = state.candidate
    for name, v in cand.items():
        if not validate_valuation(v, inst).valid:
            state.reject("monotonicity")
            return state
        if not strict_concavity_check(v, inst).ok:
            state.reject("concavity")
            return state
        if not substitutes_check(v, inst).ok:
            state.reject("substitutes")
            return state
    for name, bundle in FINAL_DEMAND.items():
        ds = demand(cand[name], cfg.p_max_target)
        if ds.bundles != (bundle,):
            state.reject(f"{name}_argmax")
            return state
    try:
        witness = _witness(state)
        analyses = _analyses(state)
    except GridTieError:
        # one retry from p_min moved off the tie locus
        state.start = perturb_price(cfg.p_min, cfg.eps)
        state.perturbed = True
        try:
            witness = _witness(state)
            analyses = _analyses(state)
        except GridTieError:
            state.reject("grid_tie")
            return state
    if not witness:
        state.reject("reachability")
        return state
    if not all(_matches(a) for a in analyses):
        state.reject("reported_outcome")
        return state
    state.witness = witness
    state.analyses = analyses
    state.accepted = True
    return state


def analyse_node(state: CaseStudyState) -> CaseStudyState:
    if not state.analyses:
        state.analyses = _analyses(state)
    return state


def joint_node(state: CaseStudyState) -> CaseStudyState:
    """Both bidders play their best constant bundle at once."""
    m = state.config.m
    bids: Dict[str, Bundle] = {a["player"]: tuple(a["best_constant_bundle"]) for a in state.analyses}
    total = tuple(sum(col) for col in zip(*bids.values()))
    fits = leq(total, m)
    state.joint = {
        "bids": {name: list(k) for name, k in bids.items()},
        "total": list(total),
        "stops_at_p_min": fits,
        "unsold": [mj - t for mj, t in zip(m, total)] if fits else None,
    }
    return state


def build_graph():
    g = StateGraph(CaseStudyState)
    g.add_node("draw", draw_node)
    g.add_node("screen", screen_node)
    g.add_node("analyse", analyse_node)
    g.add_node("joint", joint_node)
    g.add_edge(START, "draw")
    g.add_edge("draw", "screen")

    def _route_after_screen(s: CaseStudyState):
        if s.accepted:
            return "analyse"
        if s.exhausted:
            return "END"
        return "draw"

    g.add_conditional_edges("screen", _route_after_screen, {"analyse": "analyse", "draw": "draw", "END": END})
    g.add_edge("analyse", "joint")
    g.add_edge("joint", END)
    return g.compile()


def run_case_study(cfg: CaseStudyConfig) -> CaseStudyReport:
    _p(f"[case-study] seed={cfg.seed} budget={cfg.budget}")
    graph = build_graph()
    result = graph.invoke(CaseStudyState(config=cfg), config={"recursion_limit": 2 * cfg.budget + 10})
    # LangGraph may hand back a plain dict
    state = result if isinstance(result, CaseStudyState) else CaseStudyState.model_validate(result)
    if not state.accepted:
        raise SamplingExhausted(
            f"no admissible draw in {state.attempt} attempts", state.attempt, state.rejections
        )
    _p(f"[case-study] accepted draw after {state.attempt} attempts")
    matches = {a["player"]: _matches(a) for a in state.analyses}
    return CaseStudyReport(
        seed=cfg.seed,
        attempts=state.attempt,
        acceptance_rate=1 / state.attempt,
        rejections=state.rejections,
        total_rejections=sum(state.rejections.values()),
        valuations={
            name: {fmt_bundle(k): fmt(val) for k, val in sorted(v.table.items())} for name, v in state.candidate.items()
        },
        reachability=state.witness,
        analyses=state.analyses,
        joint=state.joint,
        start=fmt_vec(state.instance().p_min),
        perturbed=state.perturbed,
        matches_reported_outcome=matches,
        note="p_min perturbed off a grid tie" if state.perturbed else None,
    )
