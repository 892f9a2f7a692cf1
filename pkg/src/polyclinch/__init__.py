"""Exact-arithmetic clinching auctions for two-sided markets with polymatroid supply."""

__version__ = "0.1.0"

from .auction import Allocation, TraceLog, run_pca
from .market import MarketInstance, load_instance, parse_instance, preprocess, serialize_instance, validate
from .optimum import liquid_welfare, optimal_lw_allocation, social_welfare
from .polymatroid import GroundSet, SubmodularOracle
from .rational import INF
from .single_sample import estimate_expectations, pairwise_eval, run_mechanism
from .verify import check_dsic, check_efficiency, check_trace, reproduce_examples

__all__ = [
    "Allocation",
    "GroundSet",
    "INF",
    "MarketInstance",
    "SubmodularOracle",
    "TraceLog",
    "check_dsic",
    "check_efficiency",
    "check_trace",
    "estimate_expectations",
    "liquid_welfare",
    "load_instance",
    "optimal_lw_allocation",
    "pairwise_eval",
    "parse_instance",
    "preprocess",
    "reproduce_examples",
    "run_mechanism",
    "run_pca",
    "serialize_instance",
    "social_welfare",
    "validate",
]
