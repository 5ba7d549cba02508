"""
Exact set similarity join library.

This package provides prefix-filtering candidate generation (AllPairs, PPJoin,
GroupJoin), a chunked verification pipeline with three work-assignment
strategies, and a brute-force reference join.
"""

__version__ = "0.1.0"

# Import main components for easy access
from .client import PreparedInput, SetJoinClient
from .collection import Collection, Dictionary, build_dictionary, preprocess, preprocess_coded
from .config import config
from .joiners import Algorithm
from .oracle import brute_force_join, synth_collection
from .pipeline import JoinAbortedError, JoinReport, PipelineConfig, run_host_join, run_join
from .similarity import SimilarityFunction, SimilarityPredicate
from .verify import OutputMode, Strategy, StrategyKind

# Export main components
__all__ = [
    "Algorithm",
    "Collection",
    "Dictionary",
    "JoinAbortedError",
    "JoinReport",
    "OutputMode",
    "PipelineConfig",
    "PreparedInput",
    "SetJoinClient",
    "SimilarityFunction",
    "SimilarityPredicate",
    "Strategy",
    "StrategyKind",
    "brute_force_join",
    "build_dictionary",
    "config",
    "preprocess",
    "preprocess_coded",
    "run_host_join",
    "run_join",
    "synth_collection",
]
