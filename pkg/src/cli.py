import json
import logging
import os
import sys
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import typer

from src.config import Settings, _p, load_dotenv


app = typer.Typer(help="Clock-auction solver: exact values, dynamics and the spectrum case study")


@dataclass
class Globals:
    instance: Optional[str]
    seed: int
    out: Optional[str]
    fmt: str
    save: bool
    settings: Settings


@app.callback()
def main(
    ctx: typer.Context,
    instance: Optional[str] = typer.Option(
        None, "--instance", "-i", help="Scenario JSON file, or a bundled scenario name (e.g. v_ex)"
    ),
    seed: int = typer.Option(0, "--seed", help="Seed for randomized verbs"),
    out: Optional[str] = typer.Option(None, "--out", help="Output directory (default: $AUCTION_OUT_DIR or ./out)"),
    fmt: str = typer.Option("json", "--format", help="Table format for saved results: json or csv"),
    save: bool = typer.Option(False, "--save", help="Also write result files and a manifest"),
    progress: bool = typer.Option(True, "--progress/--no-progress", help="Print progress lines on stderr"),
):
    """Global options shared by every verb."""
    load_dotenv()
    os.environ["AUCTION_PROGRESS"] = "1" if progress else "0"
    logging.basicConfig(level=logging.WARNING if progress else logging.ERROR, stream=sys.stderr)
    settings = Settings.from_env()
    ctx.obj = Globals(instance, seed, out, fmt, save or out is not None, settings)


def _fail(exc: Exception) -> None:
    from src.auction.errors import AuctionError

    if isinstance(exc, AuctionError):
        payload, code = exc.details(), exc.exit_code
    else:
        payload, code = {"error": str(exc), "type": exc.__class__.__name__}, 1
    typer.echo(json.dumps(payload, indent=2), err=True)
    raise typer.Exit(code=code)


def _run(ctx: typer.Context, stem: str, body: Callable[[], Tuple[Dict[str, Any], Optional[list], Any]]) -> None:
    """Run a verb: JSON on stdout, optional files, structured errors on stderr."""
    g: Globals = ctx.obj
    try:
        payload, rows, grid = body()
        from src.report import dumps, emit_report

        if g.save:
            out_dir = g.out or g.settings.out_dir
            manifest = emit_report(stem, payload, g.fmt, out_dir, rows=rows, grid=grid)
            _p(f"[{stem}] wrote {len(manifest['files'])} files to {out_dir}")
        typer.echo(dumps(payload), nl=False)
    except typer.Exit:
        raise
    except Exception as exc:
        _fail(exc)


def _scenario(ctx: typer.Context):
    from src.auction.errors import ValidationFailure
    from src.scenarios.loader import load_scenario

    g: Globals = ctx.obj
    if not g.instance:
        raise ValidationFailure("this verb needs --instance", "instance")
    sc = load_scenario(g.instance, g.settings.scenario_dir)
    _p(f"[scenario] {sc.name}: M={sc.instance.M} m={list(sc.instance.m)} substitutes={sc.substitutes}")
    return sc


def _roles(sc, player: Optional[str], opponent: Optional[str]):
    """Opponent and player valuations, honouring ``--player`` / ``--opponent`` overrides."""
    from src.auction.errors import ValidationFailure
    from src.auction.lattice import validate_valuation

    v = sc.opponent
    if opponent is not None:
        if opponent not in sc.bidders:
            raise ValidationFailure(f"unknown bidder {opponent!r}", "opponent")
        v = sc.bidders[opponent]
        if not validate_valuation(v, sc.instance).valid:
            raise ValidationFailure("opponent valuation does not validate", opponent)
    name = player or sc.player
    if name is None or name not in sc.bidders:
        raise ValidationFailure(f"unknown player {name!r}", "player")
    return v, sc.bidders[name]


def _vec(text: str, field: str):
    from src.auction.rational import to_vec

    return to_vec(text.split(","), field)


def _bundle(text: str, field: str = "bundle"):
    from src.auction.rational import parse_bundle

    return parse_bundle(text, field)


def _start(sc, start: Optional[str], perturb: bool):
    from src.auction.discrete import perturb_price

    inst = sc.instance
    p = _vec(start, "start") if start else inst.p_min
    if perturb:
        p = perturb_price(p, inst.eps)
        _p(f"[perturb] start shifted to {[str(x) for x in p]}")
    return inst.with_p_min(p)


@app.command()
def check(ctx: typer.Context):
    """Validate the scenario's valuations and classify the opponent's cell complex."""

    def body():
        from src.auction.lattice import compute_p_max, strict_concavity_check, validate_valuation
        from src.auction.rational import fmt_vec
        from src.auction.tropical import complex_to_dict, enumerate_cells, substitutes_check

        sc = _scenario(ctx)
        inst = sc.instance
        payload: Dict[str, Any] = {
            "scenario": sc.name,
            "bidders": {
                name: validate_valuation(v, inst, own_box=name in sc.opponents and len(sc.opponents) > 1).as_dict()
                for name, v in sc.bidders.items()
            },
            "opponent": sc.opponent.name,
            "p_max": fmt_vec(compute_p_max(sc.opponent, inst)),
        }
        conc = strict_concavity_check(sc.opponent, inst)
        payload["strictly_concave"] = conc.ok
        if not conc.ok:
            payload["concavity_witness"] = list(conc.witness)
            return payload, None, None
        payload.update(substitutes_check(sc.opponent, inst).as_dict())
        payload["complex"] = complex_to_dict(enumerate_cells(sc.opponent, inst))
        return payload, None, None

    _run(ctx, "check", body)


@app.command("simulate-discrete")
def simulate_discrete(
    ctx: typer.Context,
    bundle: Optional[str] = typer.Option(None, "--bundle", "-k", help="Constant bid, e.g. 1,0"),
    bids: Optional[str] = typer.Option(None, "--bids", help="Bid sequence separated by ';', last bid repeats"),
    start: Optional[str] = typer.Option(None, "--start", help="Start price (default p_min)"),
    player: Optional[str] = typer.Option(None, "--player"),
    opponent: Optional[str] = typer.Option(None, "--opponent"),
    perturb: bool = typer.Option(False, "--perturb", help="Shift the start price generically off the tie locus"),
):
    """Run the round-based auction for a constant bid or a bid sequence."""

    def body():
        from src.auction.discrete import ConstantPolicy, SequencePolicy, simulate
        from src.auction.errors import ValidationFailure
        from src.auction.rational import fmt, fmt_vec

        sc = _scenario(ctx)
        v, w = _roles(sc, player, opponent)
        inst = _start(sc, start, perturb)
        if bids:
            policy = SequencePolicy(tuple(_bundle(b, "bids") for b in bids.split(";")))
        elif bundle:
            policy = ConstantPolicy(_bundle(bundle))
        else:
            raise ValidationFailure("give --bundle or --bids", "bundle")
        traj = simulate(policy, inst, v)
        rows = traj.as_rows()
        payload = {
            "rounds": rows,
            "stop_round": traj.stop_round,
            "final_price": fmt_vec(traj.final_price),
            "payoff": fmt(traj.payoff(w)),
        }
        return payload, rows, None

    _run(ctx, "simulate-discrete", body)


@app.command("value-dp")
def value_dp_cmd(
    ctx: typer.Context,
    player: Optional[str] = typer.Option(None, "--player"),
    opponent: Optional[str] = typer.Option(None, "--opponent"),
    perturb: bool = typer.Option(False, "--perturb"),
):
    """Optimal values W(k, p) on every grid price up to p_max, with the policy."""

    def body():
        from src.auction.discrete import PolicyTable, simulate, value_dp
        from src.auction.rational import fmt, fmt_vec

        sc = _scenario(ctx)
        v, w = _roles(sc, player, opponent)
        inst = _start(sc, None, perturb)
        table = value_dp(inst, v, w)
        first = table.best_initial_bid()
        rollout = simulate(PolicyTable(table, first), inst, v)
        rows = table.rows()
        payload = {
            "p_min": fmt_vec(inst.p_min),
            "best_first_bid": list(first),
            "W": fmt(table.value(first)),
            "optimal_rollout": rollout.as_rows(),
            "table": rows,
        }
        return payload, rows, None

    _run(ctx, "value-dp", body)


@app.command("value-constant")
def value_constant_cmd(
    ctx: typer.Context,
    bundle: str = typer.Option(..., "--bundle", "-k"),
    start: Optional[str] = typer.Option(None, "--start"),
    player: Optional[str] = typer.Option(None, "--player"),
    opponent: Optional[str] = typer.Option(None, "--opponent"),
    perturb: bool = typer.Option(False, "--perturb"),
):
    """Value of bidding one bundle throughout, and of switching once after round 0."""

    def body():
        from src.auction.discrete import value_constant, value_tilde
        from src.auction.rational import fmt, fmt_vec

        sc = _scenario(ctx)
        v, w = _roles(sc, player, opponent)
        inst = _start(sc, start, perturb)
        k = _bundle(bundle)
        payload = {
            "bundle": list(k),
            "start": fmt_vec(inst.p_min),
            "V": fmt(value_constant(k, inst.p_min, inst, v, w)),
            "V_tilde": fmt(value_tilde(k, inst.p_min, inst, v, w)),
        }
        return payload, None, None

    _run(ctx, "value-constant", body)


@app.command("best-bundle")
def best_bundle(
    ctx: typer.Context,
    start: Optional[str] = typer.Option(None, "--start"),
    player: Optional[str] = typer.Option(None, "--player"),
    opponent: Optional[str] = typer.Option(None, "--opponent"),
    perturb: bool = typer.Option(False, "--perturb"),
):
    """Best constant bid at the start price (lexicographically smallest on ties)."""

    def body():
        from src.auction.discrete import best_constant_bundle, value_constant
        from src.auction.rational import fmt, fmt_bundle

        sc = _scenario(ctx)
        v, w = _roles(sc, player, opponent)
        inst = _start(sc, start, perturb)
        values = {k: value_constant(k, inst.p_min, inst, v, w) for k in inst.lattice()}
        best = best_constant_bundle(inst.p_min, inst, v, w)
        rows = [{"bundle": fmt_bundle(k), "V": fmt(val)} for k, val in values.items()]
        return {"best": list(best), "V": fmt(values[best]), "values": rows}, rows, None

    _run(ctx, "best-bundle", body)


@app.command()
def reachable(
    ctx: typer.Context,
    opponent: Optional[str] = typer.Option(None, "--opponent"),
    perturb: bool = typer.Option(False, "--perturb"),
):
    """Every grid price some bid sequence can reach, with the opponent's demand."""

    def body():
        from src.auction.discrete import reachable_prices
        from src.auction.rational import fmt_vec

        sc = _scenario(ctx)
        v = sc.bidders[opponent] if opponent else sc.opponent
        inst = _start(sc, None, perturb)

        rows = [{"price": fmt_vec(p), "opponent_demand": list(d)} for p, d in sorted(reachable_prices(inst, v).items())]
        return {"count": len(rows), "prices": rows}, rows, None

    _run(ctx, "reachable", body)


@app.command("trace-continuous")
def trace_continuous(
    ctx: typer.Context,
    bundle: str = typer.Option(..., "--bundle", "-k"),
    start: Optional[str] = typer.Option(None, "--start"),
    euler: Optional[str] = typer.Option(None, "--euler", help="Also run the discrete oracle with this increment"),
    player: Optional[str] = typer.Option(None, "--player"),
):
    """Exact continuous-time trajectory for a constant bid."""

    def body():
        from src.auction.filippov import euler_trace, trace
        from src.auction.rational import fmt, fmt_vec, sup_norm, to_q
        from src.auction.tropical import enumerate_cells

        sc = _scenario(ctx)
        inst = sc.instance
        k = _bundle(bundle)
        p0 = _vec(start, "start") if start else inst.p_min
        cc = enumerate_cells(sc.opponent, inst)
        traj = trace(k, p0, cc, inst)
        payload: Dict[str, Any] = {"trajectory": traj.as_dict()}
        if player or sc.player:
            w = sc.bidders[player or sc.player]
            payload["value"] = fmt(w(k) - sum(a * b for a, b in zip(k, traj.final_price)))
        rows = [{"t": fmt(t), "price": fmt_vec(p)} for t, p in traj.polyline()]
        if euler:
            h = to_q(euler, "euler")
            line = euler_trace(k, p0, h, inst, sc.opponent)
            payload["euler"] = {
                "h": fmt(h),
                "final_price": fmt_vec(line[-1][1]),
                "gap": fmt(sup_norm(line[-1][1], traj.final_price)),
            }
        return payload, rows, None

    _run(ctx, "trace-continuous", body)


@app.command("value-map")
def value_map_cmd(
    ctx: typer.Context,
    kind: str = typer.Option("V", "--kind", help="W_eps, V or V_tilde"),
    bundle: str = typer.Option(..., "--bundle", "-k"),
    lo: str = typer.Option(..., "--lo", help="Lower box corner"),
    hi: str = typer.Option(..., "--hi", help="Upper box corner"),
    resolution: int = typer.Option(8, "--resolution", "-r", min=1),
):
    """Sample a value function on a box and flag jumps between neighbouring samples."""

    def body():
        from src.auction.semilinear import detect_discontinuities, value_map

        sc = _scenario(ctx)
        grid = value_map(kind, _bundle(bundle), (_vec(lo, "lo"), _vec(hi, "hi")), resolution, sc.instance, sc.opponent, sc.w)
        jumps = detect_discontinuities(grid)
        payload = grid.as_dict()
        payload["discontinuities"] = [d.as_dict() for d in jumps]
        return payload, None, grid

    _run(ctx, "value-map", body)


@app.command()
def decompose(
    ctx: typer.Context,
    bundle: str = typer.Option(..., "--bundle", "-k"),
    lo: str = typer.Option(..., "--lo"),
    hi: str = typer.Option(..., "--hi"),
):
    """Exact piecewise-affine regions of the continuous value (two categories)."""

    def body():
        from src.auction.semilinear import decompose_value, detect_discontinuities
        from src.auction.tropical import enumerate_cells

        sc = _scenario(ctx)
        cc = enumerate_cells(sc.opponent, sc.instance)
        surface = decompose_value(_bundle(bundle), (_vec(lo, "lo"), _vec(hi, "hi")), cc, sc.instance, sc.w)
        payload = surface.as_dict()
        payload["discontinuities"] = [d.as_dict() for d in detect_discontinuities(surface)]
        return payload, None, None

    _run(ctx, "decompose", body)


@app.command("case-study")
def case_study(
    ctx: typer.Context,
    budget: Optional[int] = typer.Option(None, "--budget", min=1, help="Rejection-sampling attempts"),
    eps: Optional[str] = typer.Option(None, "--eps", help="Price increments, e.g. 50,100"),
):
    """Two-category spectrum case study with drawn valuations."""

    def body():
        from src.study.graph import run_case_study
        from src.study.state import CaseStudyConfig

        g: Globals = ctx.obj
        cfg = CaseStudyConfig(
            seed=g.seed,
            budget=budget or g.settings.sampling_budget,
            **({"eps": _vec(eps, "eps")} if eps else {}),
        )
        report = run_case_study(cfg)
        payload = report.model_dump()
        rows: List[dict] = []
        for a in report.analyses:
            rows.extend({"player": a["player"], **pt} for pt in a["reachable"])
        return payload, rows, None

    _run(ctx, "case-study", body)


if __name__ == "__main__":
    app()
