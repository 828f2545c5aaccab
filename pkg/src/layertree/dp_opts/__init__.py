"""Optimized solver: Pareto filtering, pruning bounds, balanced splits,
counterpart search and greedy completion, each switchable via :class:`OptConfig`."""

from .bounds import lower_cap_bound, prune, prune_mask, residual_counts, two_layer_bound
from .config import OPT_TAGS, OptConfig, all_pairs, balanced_pairs
from .bounds import instance_bound
from .engine import ArrayStore, counterpart_check, solve
from .greedy import (GreedyMemo, ResidualInstance, completion_residual, estimate_greedy, estimated_flow,
                     greedy_complete, greedy_max_flow, greedy_max_flow_naive, residual_instance)
from .pareto import InsertKind, InsertOutcome, ParetoSet, dominates, pareto_insert, pareto_minimal

__all__ = [
    "OPT_TAGS", "ArrayStore", "GreedyMemo", "InsertKind", "InsertOutcome", "OptConfig",
    "ParetoSet", "ResidualInstance", "all_pairs", "balanced_pairs", "completion_residual",
    "counterpart_check", "estimated_flow", "instance_bound",
    "dominates", "estimate_greedy", "greedy_complete", "greedy_max_flow", "greedy_max_flow_naive",
    "lower_cap_bound", "pareto_insert", "pareto_minimal", "prune", "prune_mask",
    "residual_counts", "residual_instance", "solve", "two_layer_bound",
]
