"""Estimation lower bounds and mechanisms under an information budget.

For a linear system y = H theta + w observed only through a stochastic
release z with Fisher information about y capped by S, this package
computes the error covariance lower bound, builds budget-respecting
release mechanisms with matched estimators, and simulates distributed
identification over sensor networks.
"""
from .bounds import (
    PpcrResult,
    consensus_mse_bound,
    identifiable_under_privacy,
    joint_identifiable,
    multi_sensor_bound,
    pp_fisher_additive,
    pp_fisher_block,
    ppcr_bound,
    ppcr_bound_for_model,
)
from .errors import (
    CalibrationError,
    NotIdentifiableError,
    ScenarioError,
    SingularMatrixError,
    UnsupportedFamilyError,
)
from .estimators import (
    Estimate,
    least_squares_estimate,
    mle_cauchy_data,
    mle_laplace_data,
    optimal_linear_coefficient,
    optimal_linear_estimate,
    output_perturbation_estimate,
    twin_uniform_central_estimate,
)
from .experiments import ExperimentSpec, RunResult, run_experiment
from .fisher import (
    CauchyIID,
    Cos2Bounded,
    FisherMatrix,
    Gaussian,
    LaplaceIID,
    TwinUniform,
    admissibility_cross_term,
    empirical_score_mean,
    fisher_affine_pushforward,
    fisher_of_noise,
    fisher_quadrature,
)
from .mechanisms import (
    MECHANISM_KINDS,
    AffineMechanism,
    MeasurementModel,
    NoiseRecyclingMechanism,
    TwinUniformMechanism,
    budget_level,
    calibrate_cauchy_data_perturbation,
    calibrate_cos2_mechanism,
    calibrate_laplace_data_perturbation,
    calibrate_laplace_output_perturbation,
    calibrate_twin_uniform_multiplicative,
    certified_information,
    gaussian_optimal_mechanism,
    make_mechanism,
    twin_uniform_scale_fisher,
)
from .network import (
    MessageLog,
    OnlineParams,
    SensorModel,
    SensorNetwork,
    centralized_estimate,
    metropolis_weights,
    run_offline,
    run_online,
    run_private_consensus,
)

__version__ = "0.1.0"

__all__ = [
    "AffineMechanism",
    "CalibrationError",
    "CauchyIID",
    "Cos2Bounded",
    "Estimate",
    "ExperimentSpec",
    "FisherMatrix",
    "Gaussian",
    "LaplaceIID",
    "MECHANISM_KINDS",
    "MeasurementModel",
    "MessageLog",
    "NoiseRecyclingMechanism",
    "NotIdentifiableError",
    "OnlineParams",
    "PpcrResult",
    "RunResult",
    "ScenarioError",
    "SensorModel",
    "SensorNetwork",
    "SingularMatrixError",
    "TwinUniform",
    "TwinUniformMechanism",
    "UnsupportedFamilyError",
    "admissibility_cross_term",
    "budget_level",
    "calibrate_cauchy_data_perturbation",
    "calibrate_cos2_mechanism",
    "calibrate_laplace_data_perturbation",
    "calibrate_laplace_output_perturbation",
    "calibrate_twin_uniform_multiplicative",
    "centralized_estimate",
    "certified_information",
    "consensus_mse_bound",
    "empirical_score_mean",
    "fisher_affine_pushforward",
    "fisher_of_noise",
    "fisher_quadrature",
    "gaussian_optimal_mechanism",
    "identifiable_under_privacy",
    "joint_identifiable",
    "least_squares_estimate",
    "make_mechanism",
    "metropolis_weights",
    "mle_cauchy_data",
    "mle_laplace_data",
    "multi_sensor_bound",
    "optimal_linear_coefficient",
    "optimal_linear_estimate",
    "output_perturbation_estimate",
    "pp_fisher_additive",
    "pp_fisher_block",
    "ppcr_bound",
    "ppcr_bound_for_model",
    "run_experiment",
    "run_offline",
    "run_online",
    "run_private_consensus",
    "twin_uniform_central_estimate",
    "twin_uniform_scale_fisher",
]
