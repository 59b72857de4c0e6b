"""Countable and continuous probabilistic databases: construction, validation,
sampling and query evaluation with exact rational arithmetic where possible."""
from .bid import BidPdb, Block, BlockTail, validate_bid, world_prob_bid
from .combinators import (
    SuperposedPdb,
    check_component_independence,
    decompose_ti,
    lambda_completion_check,
    superpose,
    ti_completion,
    verify_completion,
)
from .continuous import PiecewiseIntensity, count_statistics, measure_of, sample_poisson_process
from .core import EMPTY, BagInstance, ExplicitWorldPdb, Fact, Schema, bag_union, explicit_superpose
from .errors import PdbError
from .factspace import INDEX, FactFamily, FactTemplate, GeometricTail, MassBound
from .poisson import PoissonPdb, bag_world_prob, dedup, dedup_rates_from_marginals, validate_poisson
from .pqe import PqeResult, approx_pqe, exact_pqe, mc_pqe
from .query import Query, eval_bool, parse_query
from .ti import Cofinite, TiPdb, restrict_ti, validate_ti, world_prob

__version__ = "0.1.0"
