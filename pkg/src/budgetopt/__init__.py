"""Lagrangean algorithms for cost-budgeted spanning trees and assignments on random instances."""

from .assignment import (
    MatchConfig,
    MatchingSolution,
    augment_cheap,
    dual_search_match,
    gasoline_start,
    lambda_bound_reference,
    min_assignment,
    phi_match,
    rotate_cycle,
    solve_constrained_matching,
)
from .errors import (
    AugmentationError,
    ContractViolation,
    InstanceFormatError,
    PatchError,
    RepairError,
    SolverFailure,
    UnconstrainableBudgetError,
)
from .harness import ExperimentConfig, TrialRecord, run_experiment, summarize
from .instance import (
    Budgets,
    Instance,
    Kind,
    default_budgets,
    deserialize_instance,
    generate_instance,
    sample_edge_value,
    serialize_instance,
)
from .oracle import brute_force_matching, brute_force_tree, exhaustive_rotation_check
from .spanning_tree import (
    TreeConfig,
    TreeSolution,
    dual_ascent_tree,
    min_tree,
    optimal_tree_family,
    phi_tree,
    repair_tree,
    select_candidate_tree,
    solve_constrained_tree,
)

__version__ = "0.1.0"
