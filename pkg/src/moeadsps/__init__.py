"""Decomposition-based multi-objective search on NK landscapes with pluggable sub-problem selection."""

from .engine import RunConfig, RunTrace, initialize, run, step_generation
from .landscape import NkInstance, NkSpec, evaluate, generate_instance, load_instance, save_instance
from .metrics import hypervolume, hvrd, pareto_filter, rank_table, wilcoxon_rank_sum

__version__ = "0.1.0"

__all__ = [
    "NkInstance",
    "NkSpec",
    "RunConfig",
    "RunTrace",
    "evaluate",
    "generate_instance",
    "hvrd",
    "hypervolume",
    "initialize",
    "load_instance",
    "pareto_filter",
    "rank_table",
    "run",
    "save_instance",
    "step_generation",
    "wilcoxon_rank_sum",
]
