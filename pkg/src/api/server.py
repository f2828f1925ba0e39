import json
from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from src.auction.errors import AuctionError
from src.config import Settings, load_dotenv


app = FastAPI(title="Clock Auction Solver API")
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


class ScenarioReq(BaseModel):
    """Either a scenario reference (file or bundled name) or an inline document."""

    instance: Optional[str] = None
    scenario: Optional[Dict[str, Any]] = None
    player: Optional[str] = None
    opponent: Optional[str] = None


class SimulateReq(ScenarioReq):
    bundle: Optional[List[int]] = None
    bids: Optional[List[List[int]]] = None
    start: Optional[List[str]] = None
    perturb: bool = False


class TraceReq(ScenarioReq):
    bundle: List[int]
    start: Optional[List[str]] = None


class CaseStudyReq(BaseModel):
    seed: int = 0
    budget: Optional[int] = None


def _settings() -> Settings:
    load_dotenv()
    return Settings.from_env()


def _scenario(req: ScenarioReq):
    from src.scenarios.loader import load_scenario, scenario_from_dict

    if req.scenario is not None:
        return scenario_from_dict(req.scenario)
    if req.instance is None:
        raise HTTPException(status_code=422, detail={"error": "give instance or scenario", "type": "ValidationFailure"})
    return load_scenario(req.instance, _settings().scenario_dir)


def _roles(sc, req: ScenarioReq):
    v = sc.bidders[req.opponent] if req.opponent in sc.bidders else sc.opponent
    w = sc.bidders[req.player] if req.player in sc.bidders else sc.w
    return v, w


def _payload(obj: Any) -> Any:
    from src.report import dumps

    return json.loads(dumps(obj))


def _guard(fn):
    try:
        return _payload(fn())
    except HTTPException:
        raise
    except AuctionError as exc:
        raise HTTPException(status_code=422, detail=exc.details())
    except Exception as exc:
        raise HTTPException(status_code=500, detail={"error": str(exc), "type": exc.__class__.__name__})


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.get("/scenarios")
def scenarios() -> List[dict]:
    from src.scenarios.loader import list_scenarios

    return list_scenarios(_settings().scenario_dir)


@app.post("/check")
def check(req: ScenarioReq) -> Any:
    def body():
        from src.auction.lattice import strict_concavity_check, validate_valuation
        from src.auction.tropical import substitutes_check

        sc = _scenario(req)
        out: Dict[str, Any] = {
            "scenario": sc.name,
            "bidders": {
                name: validate_valuation(v, sc.instance, own_box=name in sc.opponents and len(sc.opponents) > 1).as_dict()
                for name, v in sc.bidders.items()
            },
        }
        out["strictly_concave"] = strict_concavity_check(sc.opponent, sc.instance).ok
        if out["strictly_concave"]:
            out.update(substitutes_check(sc.opponent, sc.instance).as_dict())
        return out

    return _guard(body)


@app.post("/simulate")
def simulate(req: SimulateReq) -> Any:
    def body():
        from src.auction.discrete import ConstantPolicy, SequencePolicy, perturb_price
        from src.auction.discrete import simulate as run
        from src.auction.rational import to_vec

        sc = _scenario(req)
        v, w = _roles(sc, req)
        p = to_vec(req.start, "start") if req.start else sc.instance.p_min
        if req.perturb:
            p = perturb_price(p, sc.instance.eps)
        if req.bids:
            policy = SequencePolicy(tuple(tuple(b) for b in req.bids))
        elif req.bundle is not None:
            policy = ConstantPolicy(tuple(req.bundle))
        else:
            raise HTTPException(status_code=422, detail={"error": "give bundle or bids", "type": "ValidationFailure"})
        traj = run(policy, sc.instance.with_p_min(p), v)
        return {
            "rounds": traj.as_rows(),
            "stop_round": traj.stop_round,
            "final_price": traj.final_price,
            "payoff": traj.payoff(w),
        }

    return _guard(body)


@app.post("/value-dp")
def value_dp(req: ScenarioReq) -> Any:
    def body():
        from src.auction.discrete import value_dp as solve

        sc = _scenario(req)
        v, w = _roles(sc, req)
        table = solve(sc.instance, v, w)
        first = table.best_initial_bid()
        return {"best_first_bid": list(first), "W": table.value(first), "table": table.rows()}

    return _guard(body)


@app.post("/trace")
def trace(req: TraceReq) -> Any:
    def body():
        from src.auction.filippov import trace as run
        from src.auction.rational import to_vec
        from src.auction.tropical import enumerate_cells

        sc = _scenario(req)
        v, _ = _roles(sc, req)
        p0 = to_vec(req.start, "start") if req.start else sc.instance.p_min
        return run(tuple(req.bundle), p0, enumerate_cells(v, sc.instance), sc.instance).as_dict()

    return _guard(body)


@app.post("/case-study")
def case_study(req: CaseStudyReq) -> Any:
    def body():
        from src.study.graph import run_case_study
        from src.study.state import CaseStudyConfig

        cfg = CaseStudyConfig(
            seed=req.seed,
            budget=req.budget or _settings().sampling_budget,
        )
        return run_case_study(cfg)

    return _guard(body)
