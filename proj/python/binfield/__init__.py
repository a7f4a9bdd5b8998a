"""One-bit sensor-network field estimation: simulation, estimation and experiment harness."""

from ._binfield import (
    Basis,
    DeploymentDensity,
    FieldSpec,
    NoiseModel,
    Schedule,
    basis_deployment_integral,
    estimate_coefficients,
    integrated_squared_error,
    make_sobolev_field,
    monte_carlo_mse,
    mse_upper_bound,
    rate_fit,
    reconstruct,
    run_config,
    run_suite,
    simulate_batch,
    true_coefficients,
    truncation_schedule,
)

__all__ = [
    "Basis",
    "DeploymentDensity",
    "FieldSpec",
    "NoiseModel",
    "Schedule",
    "basis_deployment_integral",
    "estimate_coefficients",
    "integrated_squared_error",
    "make_sobolev_field",
    "monte_carlo_mse",
    "mse_upper_bound",
    "rate_fit",
    "reconstruct",
    "run_config",
    "run_suite",
    "simulate_batch",
    "true_coefficients",
    "truncation_schedule",
]
