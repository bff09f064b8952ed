"""Cascading-failure risk analysis for stochastic time-delay consensus networks."""

from .conditional import (
    ConditionalLaw,
    ConditioningState,
    FailureObservation,
    StarCase,
    condition,
    condition_complete_closed_form,
    condition_star_closed_form,
    init_state,
    update_one_failure,
)
from .covariance import (
    CovarianceBounds,
    NetworkModel,
    SteadyStateCovariance,
    covariance_bounds,
    covariance_complete,
    covariance_star,
    f_extrema,
    f_function,
    steady_state_covariance,
)
from .graph import (
    GraphSpec,
    Spectrum,
    Topology,
    build_laplacian,
    check_stability,
    effective_resistance,
    random_connected_graph,
    spectrum,
)
from .montecarlo import (
    SimConfig,
    gaussian_conditional_check,
    simulate_trajectories,
    tail_probability_check,
)
from .risk import (
    BestAchievableBound,
    Branch,
    RiskAssessment,
    RiskLevel,
    RiskParams,
    RiskProfile,
    best_achievable_bound,
    best_achievable_complete,
    bound_validation_sweep,
    cascading_risk_profile,
    folded_avar,
    folded_var,
    range_bounded_risk,
    risk_level,
)

__version__ = "0.1.0"

__all__ = [
    "BestAchievableBound",
    "Branch",
    "ConditionalLaw",
    "ConditioningState",
    "CovarianceBounds",
    "FailureObservation",
    "GraphSpec",
    "NetworkModel",
    "RiskAssessment",
    "RiskLevel",
    "RiskParams",
    "RiskProfile",
    "SimConfig",
    "Spectrum",
    "StarCase",
    "SteadyStateCovariance",
    "Topology",
    "__version__",
    "best_achievable_bound",
    "best_achievable_complete",
    "bound_validation_sweep",
    "build_laplacian",
    "cascading_risk_profile",
    "check_stability",
    "condition",
    "condition_complete_closed_form",
    "condition_star_closed_form",
    "covariance_bounds",
    "covariance_complete",
    "covariance_star",
    "effective_resistance",
    "f_extrema",
    "f_function",
    "folded_avar",
    "folded_var",
    "gaussian_conditional_check",
    "init_state",
    "random_connected_graph",
    "range_bounded_risk",
    "risk_level",
    "simulate_trajectories",
    "spectrum",
    "steady_state_covariance",
    "tail_probability_check",
    "update_one_failure",
]
