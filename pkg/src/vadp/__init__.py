"""History abstractions that preserve values, optimal actions and near-optimal
action sets, surrogate MDPs built from them, and numerical certification of
their guarantees."""

from .abstraction import (Abstraction, AbstractionParams, Kind, build_abstraction,
                          build_esa_qgrid, build_mdp_abstraction, build_vadp, build_vdp,
                          enumerate_states)
from .binarizer import BinarizedEnvironment, binarize, run_binarized_pipeline
from .bounds import (bin_bound_full, bin_bound_simplified, bound_row, esa_bound, vadp_bound,
                     vadp_bound_relaxed)
from .certify import CheckReport, adversarial_b_search, merge_reports, run_pipeline
from .core import (Environment, History, HistoryTable, LatentModel, ResourceLimitError,
                   enumerate_histories)
from .instances import InstanceSpec, make_instance
from .oracle import near_optimal_set, solve_latent, solve_tree
from .surrogate import (DispersionDistribution, SurrogateMDP, b_averaged_q, build_surrogate,
                        evaluate_policy, make_dispersion, solve_surrogate, uplift)

__version__ = "0.1.0"

__all__ = [
    "Abstraction", "AbstractionParams", "Kind", "build_abstraction", "build_esa_qgrid",
    "build_mdp_abstraction", "build_vadp", "build_vdp", "enumerate_states",
    "BinarizedEnvironment", "binarize", "run_binarized_pipeline",
    "bin_bound_full", "bin_bound_simplified", "bound_row", "esa_bound", "vadp_bound",
    "vadp_bound_relaxed",
    "CheckReport", "adversarial_b_search", "merge_reports", "run_pipeline",
    "Environment", "History", "HistoryTable", "LatentModel", "ResourceLimitError",
    "enumerate_histories",
    "InstanceSpec", "make_instance",
    "near_optimal_set", "solve_latent", "solve_tree",
    "DispersionDistribution", "SurrogateMDP", "b_averaged_q", "build_surrogate",
    "evaluate_policy", "make_dispersion", "solve_surrogate", "uplift",
]
