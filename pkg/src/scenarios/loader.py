"""Scenario documents: JSON in, validated instance and bidders out."""

from __future__ import annotations

import json
import logging
import os
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.auction.errors import ValidationFailure
from src.auction.lattice import (
    AuctionInstance,
    Valuation,
    aggregate_valuations,
    strict_concavity_check,
    validate_valuation,
)
from src.auction.tropical import substitutes_check

logger = logging.getLogger(__name__)


class ScenarioDoc(BaseModel):
    """Raw document shape; rationals stay strings until the instance is built."""

    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    description: Optional[str] = None
    M: int
    m: List[int]
    p_min: List[Any]
    eps: List[Any]
    valuations: Dict[str, Dict[str, Any]]
    player: Optional[str] = None
    opponents: List[str] = Field(default_factory=list)
    allow_nonmonotone: List[str] = Field(default_factory=list)
    experiment: Dict[str, Any] = Field(default_factory=dict)


class Scenario(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    instance: AuctionInstance
    bidders: Dict[str, Valuation]
    player: Optional[str] = None
    opponents: List[str]
    opponent: Valuation
    strictly_concave: bool
    substitutes: Optional[bool] = None
    experiment: Dict[str, Any] = Field(default_factory=dict)

    @property
    def w(self) -> Valuation:
        if self.player is None:
            raise ValidationFailure("scenario has no player valuation", "player")
        return self.bidders[self.player]


def _field_path(loc) -> str:
    return ".".join(str(x) for x in loc)


def scenario_from_dict(data: Dict[str, Any], name: Optional[str] = None) -> Scenario:
    try:
        doc = ScenarioDoc.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ValidationFailure(first["msg"], _field_path(first["loc"])) from None

    inst = AuctionInstance(M=doc.M, m=tuple(doc.m), p_min=doc.p_min, eps=doc.eps)
    bidders = {
        key: Valuation(table=table, name=key, allow_nonmonotone=key in doc.allow_nonmonotone)
        for key, table in doc.valuations.items()
    }
    opponents = doc.opponents or [k for k in bidders if k != doc.player]
    if not opponents:
        raise ValidationFailure("at least one straightforward opponent is required", "opponents")
    for key in opponents + ([doc.player] if doc.player else []):
        if key not in bidders:
            raise ValidationFailure(f"unknown bidder {key!r}", "valuations")

    if doc.player:
        report = validate_valuation(bidders[doc.player], inst)
        if not report.valid:
            bad = report.violations[0]
            raise ValidationFailure(f"{bad.prop} violated at {list(bad.witness)}", f"valuations.{doc.player}")

    if len(opponents) == 1:
        opponent = bidders[opponents[0]]
        report = validate_valuation(opponent, inst)
        if not report.valid:
            bad = report.violations[0]
            raise ValidationFailure(f"{bad.prop} violated at {list(bad.witness)}", f"valuations.{opponents[0]}")
    else:
        opponent = aggregate_valuations([bidders[k] for k in opponents], inst)

    concave = strict_concavity_check(opponent, inst).ok
    subs = substitutes_check(opponent, inst).ok if concave else None
    logger.debug("scenario %s: concave=%s substitutes=%s", name or doc.name, concave, subs)
    return Scenario(
        name=doc.name or name or "scenario",
        instance=inst,
        bidders=bidders,
        player=doc.player,
        opponents=opponents,
        opponent=opponent,
        strictly_concave=concave,
        substitutes=subs,
        experiment=doc.experiment,
    )


def resolve_path(ref: str, scenario_dir: str) -> str:
    """Bare names resolve inside the scenario directory."""
    if os.path.isfile(ref):
        return ref
    for candidate in (os.path.join(scenario_dir, ref), os.path.join(scenario_dir, f"{ref}.json")):
        if os.path.isfile(candidate):
            return candidate
    raise ValidationFailure(f"scenario {ref!r} not found", "instance")


def load_scenario(path: str, scenario_dir: str = os.path.join("src", "scenarios")) -> Scenario:
    full = resolve_path(path, scenario_dir)
    try:
        with open(full, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ValidationFailure(f"not valid JSON ({exc.msg} at line {exc.lineno})", full) from None
    return scenario_from_dict(data, os.path.splitext(os.path.basename(full))[0])


def list_scenarios(scenario_dir: str) -> List[dict]:
    out = []
    if not os.path.isdir(scenario_dir):
        return out
    for fname in sorted(os.listdir(scenario_dir)):
        if not fname.endswith(".json"):
            continue
        try:
            with open(os.path.join(scenario_dir, fname), "r", encoding="utf-8") as f:
                doc = json.load(f)
        except (OSError, json.JSONDecodeError):
            continue
        out.append({"name": doc.get("name", fname[:-5]), "file": fname, "description": doc.get("description", "")})
    return out
