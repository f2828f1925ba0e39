"""Exact solver for simple clock auctions against straightforward bidders.

Everything here works in exact rationals: valuations on the item lattice,
the demand oracle and its cell complex, the round-based auction with its
dynamic-programming value, the continuous-time Filippov tracer and the
piecewise-affine value analysis built on top of it.
"""

from .discrete import (
    ConstantPolicy,
    DiscreteSolver,
    PolicyTable,
    SequencePolicy,
    best_constant_bundle,
    perturb_price,
    reachable_prices,
    simulate,
    transition,
    truncated_grid,
    value_constant,
    value_dp,
    value_dp_at,
    value_tilde,
)
from .errors import (
    AuctionError,
    CrossingViolation,
    GridTieError,
    IndifferenceError,
    RejectedBidError,
    SamplingExhausted,
    UniquenessViolation,
    UnsupportedDimension,
    ValidationFailure,
)
from .filippov import drift, euler_trace, filippov_velocity, trace, value_continuous, value_tilde_continuous
from .lattice import (
    AuctionInstance,
    Valuation,
    aggregate_valuations,
    compute_p_max,
    payoff,
    random_substitutes_valuation,
    strict_concavity_check,
    validate_valuation,
)
from .semilinear import decompose_value, detect_discontinuities, value_map
from .tropical import demand, enumerate_cells, facet_vectors, on_indifference_locus, substitutes_check

__all__ = [
    "AuctionError",
    "AuctionInstance",
    "ConstantPolicy",
    "CrossingViolation",
    "DiscreteSolver",
    "GridTieError",
    "IndifferenceError",
    "PolicyTable",
    "RejectedBidError",
    "SamplingExhausted",
    "SequencePolicy",
    "UniquenessViolation",
    "UnsupportedDimension",
    "Valuation",
    "ValidationFailure",
    "aggregate_valuations",
    "best_constant_bundle",
    "compute_p_max",
    "decompose_value",
    "demand",
    "detect_discontinuities",
    "drift",
    "enumerate_cells",
    "euler_trace",
    "facet_vectors",
    "filippov_velocity",
    "on_indifference_locus",
    "payoff",
    "perturb_price",
    "random_substitutes_valuation",
    "reachable_prices",
    "simulate",
    "strict_concavity_check",
    "substitutes_check",
    "trace",
    "transition",
    "truncated_grid",
    "validate_valuation",
    "value_constant",
    "value_continuous",
    "value_dp",
    "value_dp_at",
    "value_map",
    "value_tilde",
    "value_tilde_continuous",
]
