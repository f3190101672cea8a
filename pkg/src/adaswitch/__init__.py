"""Strongly adaptive online learning with switching costs.

Two-experts drift gates, dyadic combiner stacks over Fixed Share, and an
efficient adaptive paging policy protected by randomized marking.
"""

from .combiner import (CombinerStack, StronglyAdaptiveExperts, TwoAlgorithmCombiner, build_stack,
                       combine_step, scaled_loss, stack_step)
from .experts import ConstantExpert, FixedShare, MultiplicativeWeights
from .gate import TwoExpertsGate, gate_step, gate_weight, make_drift_state, make_gate, solve_threshold
from .paging import (CacheConfig, CompetitiveAdaptivePaging, PagingMW, ProductWeights,
                     RandomizedMarking, competitive_adaptive_paging, sample_subset, subset_prob)
from .simplex import build_coupling, rollout, transition_sample, tv_distance

__version__ = "0.1.0"

__all__ = [
    "CacheConfig", "CombinerStack", "CompetitiveAdaptivePaging", "ConstantExpert", "FixedShare",
    "MultiplicativeWeights", "PagingMW", "ProductWeights", "RandomizedMarking",
    "StronglyAdaptiveExperts", "TwoAlgorithmCombiner", "TwoExpertsGate", "build_coupling",
    "build_stack", "combine_step", "competitive_adaptive_paging", "gate_step", "gate_weight",
    "make_drift_state", "make_gate", "rollout", "sample_subset", "scaled_loss", "solve_threshold",
    "stack_step", "subset_prob", "transition_sample", "tv_distance",
]
