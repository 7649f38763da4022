"""fareopt: learn transport-mode preferences from interactive choice queries
and optimize per-road taxi fares for a latency/infection-risk tradeoff."""

__version__ = "0.1.0"

from .choice import (
    DOMINATED,
    AttributeScales,
    Mode,
    OptionSet,
    TransportOption,
    choice_probabilities,
    dominated_set,
    population_shares,
    utility,
)
from .equilibrium import (
    EquilibriumError,
    OptimizationError,
    OptimizationRequest,
    SolutionReport,
    build_option_attributes,
    evaluate_objective,
    flow_map,
    optimize_fares,
    pareto_sweep,
    solve_equilibrium,
)
from .learning import (
    ChainConfig,
    Posterior,
    Prior,
    QueryCandidatePool,
    QueryRanges,
    ResponseRecord,
    info_gain_score,
    log_unnormalized_posterior,
    next_query,
    sample_posterior,
    simulate_user,
    validation_accuracy,
)
from .network import (
    ConfigError,
    FlowState,
    NetworkConfig,
    RailSpec,
    RoadSpec,
    WalkSpec,
    load_network,
    rail_trip_risk,
    road_latency,
    taxi_trip_risk,
    total_latency,
    total_risk,
)
from .population import Population, UserPreferences, load_population, save_population

__all__ = [name for name in dir() if not name.startswith("_")]
