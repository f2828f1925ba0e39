"""Exception hierarchy for the auction solver.

Every error carries the process exit code the CLI should use and a
``details()`` payload that is safe to dump as JSON.
"""

from __future__ import annotations

from typing import Any, Dict, Iterable, Optional, Sequence


class AuctionError(Exception):
    exit_code = 1
    grid_point: Optional[Sequence[str]] = None

    def details(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"error": str(self), "type": self.__class__.__name__}
        if self.grid_point is not None:
            out["grid_point"] = list(self.grid_point)
        return out


class ValidationFailure(AuctionError):
    """Schema or valuation check failed."""

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None) -> None:
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field

    def details(self) -> Dict[str, Any]:
        out = super().details()
        if self.field is not None:
            out["field"] = self.field
        return out


class RejectedBidError(ValidationFailure):
    """A bid violates the eligibility rule (its size grew)."""


class UnsupportedDimension(ValidationFailure):
    pass


class IndifferenceError(AuctionError):
    """A single-valued demand was requested at a price on the indifference locus."""

    exit_code = 3

    def __init__(self, message: str, price: Sequence[Any] = (), ties: Iterable[Sequence[int]] = ()) -> None:
        super().__init__(message)
        self.price = tuple(price)
        self.ties = [tuple(t) for t in ties]

    def details(self) -> Dict[str, Any]:
        out = super().details()
        out["price"] = [str(x) for x in self.price]
        out["ties"] = [list(t) for t in self.ties]
        return out


class GridTieError(IndifferenceError):
    """A grid price of the discrete auction lies on the indifference locus."""

    def details(self) -> Dict[str, Any]:
        out = super().details()
        out["hint"] = "rerun with --perturb to shift p_min generically"
        return out


class UniquenessViolation(AuctionError):
    """Zero or several forward Filippov velocities were found."""

    exit_code = 3

    def __init__(self, message: str, candidates: Sequence[Sequence[Any]] = ()) -> None:
        super().__init__(message)
        self.candidates = [tuple(c) for c in candidates]

    def details(self) -> Dict[str, Any]:
        out = super().details()
        out["candidates"] = [[str(x) for x in c] for c in self.candidates]
        return out


class CrossingViolation(AuctionError):
    """An interface with differing drifts was crossed twice, or the event bound was exceeded."""

    exit_code = 3


class SamplingExhausted(AuctionError):
    exit_code = 4

    def __init__(self, message: str, attempts: int, rejections: Optional[Dict[str, int]] = None) -> None:
        super().__init__(message)
        self.attempts = attempts
        self.rejections = dict(rejections or {})

    def details(self) -> Dict[str, Any]:
        out = super().details()
        out["attempts"] = self.attempts
        out["rejections"] = self.rejections
        if self.rejections:
            out["binding_constraint"] = max(self.rejections, key=self.rejections.get)
        return out
