"""State carried through the two-category spectrum case study.

Monetary units are thousands of AUD; ``p_min`` averages the two starting
prices per lot of each category.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.auction.lattice import AuctionInstance, Valuation
from src.auction.rational import to_vec

VODAFONE = "vodafone"
TPG = "tpg"


class BidderRanges(BaseModel):
    """Integer ranges, one per unit: unit values per category and the marginal penalty past the free units.

    Each draw is sorted (unit values decreasing, penalties increasing), so
    overlapping ranges still give a concave table.
    """

    cat1: Tuple[Tuple[int, int], ...]
    cat2: Tuple[Tuple[int, int], ...]
    penalty: Tuple[Tuple[int, int], ...] = ()


def _default_ranges() -> Dict[str, BidderRanges]:
    return {
        TPG: BidderRanges(
            cat1=((640, 660), (590, 610)),
            cat2=((3560, 3580), (3520, 3540)),
            penalty=((30, 50), (50, 70)),
        ),
        VODAFONE: BidderRanges(
            cat1=((1855, 1865), (1745, 1755)),
            cat2=((4265, 4275), (4235, 4245)),
            penalty=((775, 785), (1025, 1035)),
        ),
    }


class CaseStudyConfig(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    seed: int = 0
    m: Tuple[int, int] = (2, 2)
    p_min: Tuple[Fraction, Fraction] = (Fraction(765), Fraction(1811, 2))
    p_max_target: Tuple[Fraction, Fraction] = (Fraction(1165), Fraction(3501))
    eps: Tuple[Fraction, Fraction] = (Fraction(50), Fraction(100))
    budget: int = 500
    ranges: Dict[str, BidderRanges] = Field(default_factory=_default_ranges)

    @field_validator("p_min", "p_max_target", "eps", mode="before")
    @classmethod
    def _rationals(cls, value, info):
        return to_vec(value, info.field_name)

    def instance(self) -> AuctionInstance:
        return AuctionInstance(M=2, m=self.m, p_min=self.p_min, eps=self.eps)


class CaseStudyState(BaseModel):
    """Graph state; nodes mutate and return it."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: CaseStudyConfig
    attempt: int = 0
    candidate: Dict[str, Valuation] = Field(default_factory=dict)
    # start price of the current draw; moved off the grid when the draw hits a tie
    start: Optional[Tuple[Fraction, Fraction]] = None
    perturbed: bool = False
    accepted: bool = False
    exhausted: bool = False
    rejections: Dict[str, int] = Field(default_factory=dict)
    witness: Dict[str, Any] = Field(default_factory=dict)
    analyses: List[Dict[str, Any]] = Field(default_factory=list)
    joint: Dict[str, Any] = Field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rejections[reason] = self.rejections.get(reason, 0) + 1
        self.accepted = False
        if self.attempt >= self.config.budget:
            self.exhausted = True

    def instance(self) -> AuctionInstance:
        inst = self.config.instance()
        return inst.with_p_min(self.start) if self.start is not None else inst


class CaseStudyReport(BaseModel):
    seed: int
    attempts: int
    acceptance_rate: float
    rejections: Dict[str, int]
    valuations: Dict[str, Dict[str, str]]
    reachability: Dict[str, Any]
    analyses: List[Dict[str, Any]]
    joint: Dict[str, Any]
    start: List[str]
    perturbed: bool = False
    matches_reported_outcome: Dict[str, bool]
    total_rejections: int = 0
    note: Optional[str] = None
