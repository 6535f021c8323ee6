"""Kalman filter noise-covariance auto-tuning by Bayesian optimization of consistency costs."""

from .acquisition import SearchBox, direct_optimize, expected_improvement
from .config import ConfigError, ScenarioConfig, load_bundled, parse_config
from .consistency import (
    COST_CAP,
    ConsistencyRecord,
    average_stats,
    build_record,
    chi2_bounds,
    chi2_inverse_cdf,
    j_cost,
    nees,
    nis,
)
from .gp_surrogate import Hyperparams, SurrogateModel
from .kalman import GaussianBelief, UpdateResult
from .linalg import NotPositiveDefiniteError
from .lti_model import (
    ContinuousModel,
    DiscreteModel,
    discretize,
    discretize_r,
    matrix_exponential,
    van_loan_q,
    zoh_discretize,
)
from .truth_sim import RngStream, Trajectory, control_input, sample_gaussian, simulate_truth
from .tuner import (
    DesignParameter,
    DesignSpec,
    Scenario,
    TunerConfig,
    TuningSession,
    evaluate_cost,
    monte_carlo_runs,
    run_gpbo,
    seed_design,
)

__version__ = "0.1.0"
