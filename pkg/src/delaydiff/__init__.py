"""Diffusion LMS over networks with communication delays."""

from .algorithms import ALGORITHMS, AgentState, RunConfig, TrialResult, adapt_step, combine_delayed, run_trial
from .analysis import (
    ExtendedOperators,
    MsdCurve,
    block_max_norm,
    build_mean_matrix,
    build_noise_operator,
    build_operators,
    check_mean_stability,
    mean_error_trajectory,
    operators_for,
    spectral_radius,
    steady_state_msd,
    stepsize_bounds,
    transient_msd,
    verify_rho_relation,
)
from .model import REFERENCE_W_STAR, DataSample, SignalModel, optimal_weights, sample_data
from .montecarlo import ExperimentPlan, estimate_msd, steady_state_estimate
from .topology import (
    DelayProfile,
    ExtendedCombination,
    NetworkTopology,
    build_delay_profile,
    build_uniform_combination,
    partition_combination,
)

__version__ = "0.1.0"
