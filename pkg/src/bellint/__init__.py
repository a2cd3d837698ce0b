"""Bell nonlocality when each party only sees aggregate detector intensities.

The package computes the six-term (Zohren-Gill form) Bell functional for N
entangled pairs read out by majority vote, exactly and for large N; adds
detector inefficiency and solves for the critical efficiency; minimizes the
functional over measurement settings; and runs an event-level Monte Carlo
of a pairing-erasure experiment.  The `bellint` CLI exposes all of it.
"""

from .quantum import (
    BellValue,
    CorrelationTable,
    MeasurementSetting,
    PairDistribution,
    TwoQubitState,
    bell_functional,
    correlation_table,
    deterministic_strategy_value,
    minimum_local_value,
    pair_probabilities,
    reference_settings,
    werner_state,
)
from .aggregation import (
    AggregatedDistribution,
    DifferenceDistribution,
    UnsupportedRegimeError,
    aggregate_pair,
    asymptotic_s,
    brute_force_p_n,
    difference_distribution,
    majority_probabilities,
    s_n,
)
from .loss import (
    EfficiencyResult,
    LossyIncrementLaw,
    NoViolationError,
    brute_force_p_n_eta,
    eta_min,
    lossy_increment_law,
    s_n_eta,
)
from .optimize import (
    AngleVector,
    NonConvergenceError,
    OptimizationResult,
    OptimizerConfig,
    angles_from_settings,
    minimize_s_n,
    settings_from_angles,
    sweep,
    violation_threshold,
)
from .simulate import (
    EstimateReport,
    ExperimentConfig,
    InsufficientDataError,
    RunRecord,
    count_perfect_matchings,
    estimate_s,
    run_experiment,
    simulate_run,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # quantum
    "TwoQubitState", "MeasurementSetting", "PairDistribution", "CorrelationTable",
    "BellValue", "werner_state", "reference_settings", "pair_probabilities",
    "correlation_table", "bell_functional", "deterministic_strategy_value",
    "minimum_local_value",
    # aggregation
    "DifferenceDistribution", "AggregatedDistribution", "UnsupportedRegimeError",
    "difference_distribution", "majority_probabilities", "aggregate_pair",
    "brute_force_p_n", "s_n", "asymptotic_s",
    # loss
    "LossyIncrementLaw", "EfficiencyResult", "NoViolationError",
    "lossy_increment_law", "s_n_eta", "eta_min", "brute_force_p_n_eta",
    # optimize
    "AngleVector", "OptimizerConfig", "OptimizationResult", "NonConvergenceError",
    "settings_from_angles", "angles_from_settings", "minimize_s_n", "sweep",
    "violation_threshold",
    # simulate
    "ExperimentConfig", "RunRecord", "EstimateReport", "InsufficientDataError",
    "simulate_run", "run_experiment", "estimate_s", "count_perfect_matchings",
]
