"""Monte Carlo laboratory for critical branching random walk traces.

Samples finite approximations of the incipient infinite family tree,
embeds them as space-time random walk traces on the lattice, and measures
electrical resistance and intersection statistics of the result.
"""

from brwlab.branching import (
    CondTree,
    ConditioningError,
    GWTree,
    ProgenyLaw,
    TreeSizeError,
    conditioned_offspring,
    extinction_probs,
    progeny_preset,
    sample_backbone_tree,
    sample_conditioned_gw,
    sample_gw_forest,
    size_bias,
    subtree_off_backbone,
    truncate,
)
from brwlab.walk import (
    StepLaw,
    UnreachableError,
    ball_point_count,
    covariance_norm,
    green_function,
    lclt_compare,
    n_step_pmf,
    norm_sq,
    sample_bridge,
    sample_endpoints,
    step_preset,
)
from brwlab.trace import TraceGraph, embed, embed_bridge, read_edge_list
from brwlab.resistance import (
    DisconnectedError,
    Network,
    ResistanceResult,
    SolverError,
    effective_resistance,
    nash_williams_lower,
    resistance_profile,
    resistance_row,
    resistance_to_level,
)
from brwlab.blocks import (
    BlockNotGoodError,
    BlockParams,
    BlockRangeError,
    BlockReport,
    IntersectionPair,
    IntersectionRecord,
    detect_spatially_good,
    detect_tree_good,
    enumerate_intersections,
    extra_intersections,
    has_udp,
    two_tree_experiment,
    typically_spaced,
    vertex_sites,
)
from brwlab.harness import (
    CheckSuiteReport,
    ConfigError,
    ExperimentConfig,
    FitReport,
    GammaRow,
    IntersectionRow,
    ScanRow,
    check_suite,
    dominance_experiment,
    fit_exponent,
    scan_gamma,
    scan_intersections,
    scan_resistance,
)

__version__ = "0.1.0"

__all__ = [
    "BlockNotGoodError",
    "BlockParams",
    "BlockRangeError",
    "BlockReport",
    "CheckSuiteReport",
    "CondTree",
    "ConditioningError",
    "ConfigError",
    "DisconnectedError",
    "ExperimentConfig",
    "FitReport",
    "GWTree",
    "GammaRow",
    "IntersectionPair",
    "IntersectionRecord",
    "IntersectionRow",
    "Network",
    "ProgenyLaw",
    "ResistanceResult",
    "ScanRow",
    "SolverError",
    "StepLaw",
    "TraceGraph",
    "TreeSizeError",
    "UnreachableError",
    "ball_point_count",
    "check_suite",
    "conditioned_offspring",
    "covariance_norm",
    "detect_spatially_good",
    "detect_tree_good",
    "dominance_experiment",
    "effective_resistance",
    "embed",
    "embed_bridge",
    "enumerate_intersections",
    "extinction_probs",
    "extra_intersections",
    "fit_exponent",
    "green_function",
    "has_udp",
    "lclt_compare",
    "n_step_pmf",
    "nash_williams_lower",
    "norm_sq",
    "progeny_preset",
    "read_edge_list",
    "resistance_profile",
    "resistance_row",
    "resistance_to_level",
    "sample_backbone_tree",
    "sample_bridge",
    "sample_conditioned_gw",
    "sample_endpoints",
    "sample_gw_forest",
    "scan_gamma",
    "scan_intersections",
    "scan_resistance",
    "size_bias",
    "step_preset",
    "subtree_off_backbone",
    "truncate",
    "two_tree_experiment",
    "typically_spaced",
    "vertex_sites",
    "__version__",
]
