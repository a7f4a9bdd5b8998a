#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "binfield/estimator.hpp"
#include "binfield/field.hpp"
#include "binfield/sensing.hpp"

namespace binfield {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Value of int_0^1 |phi_j|^2 / p_X, or a divergence flag.
struct IntegralValue {
    double value = 0.0;
    bool divergent = false;
    /// Integrals over [delta, 1] for delta = 1e-3, 1e-6, 1e-9 when the density
    /// vanishes somewhere; empty otherwise.
    std::vector<double> probes;
};

IntegralValue basis_deployment_integral(const Basis& basis, const DeploymentDensity& deploy, std::size_t j);

struct BoundReport {
    double variance_term = 0.0;
    double bias_term = 0.0;
    double total = 0.0;
    double reduced_total = 0.0; // c^2 m / (n nu) + bias
    std::vector<double> per_j_integrals;
    std::vector<std::size_t> divergent_j;

    bool divergent() const noexcept { return !divergent_j.empty(); }
};

/// (c^2/n) sum_{j<m} int |phi_j|^2/p_X  +  eps[f, m].
BoundReport mse_upper_bound(const FieldSpec& field, const CoefficientVector& true_coeffs, const Basis& basis,
                            const DeploymentDensity& deploy, std::size_t n, std::size_t m, double c);
BoundReport mse_upper_bound(const FieldSpec& field, const Basis& basis, const DeploymentDensity& deploy,
                            std::size_t n, std::size_t m, double c);

struct ConsistencyReport {
    std::vector<std::size_t> n_grid;
    std::vector<std::size_t> m_values;
    std::vector<double> variance_sums; // (1/n) sum_{j<m(n)} int |phi_j|^2/p_X
    bool m_unbounded = false;          // non-decreasing and growing over the grid
    bool positive_infimum = false;
    bool variance_sum_vanishing = false; // strictly decreasing over the grid
    std::string note;

    bool all_pass() const noexcept { return m_unbounded && positive_infimum && variance_sum_vanishing; }
};

ConsistencyReport check_consistency_conditions(const Schedule& schedule, const Basis& basis,
                                               const DeploymentDensity& deploy, std::span<const std::size_t> n_grid);

/// sum_{j<m} |alpha_hat_j - alpha_j|^2 + (||f||^2 - sum_{j<m} |alpha_j|^2), which is
/// ||f - f_hat||^2 exactly by orthonormality.
double integrated_squared_error(const ReconstructionCoefficients& estimate, const CoefficientVector& true_coeffs,
                                const FieldSpec& field);

struct MsePoint {
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t trials = 0;
    double mean = 0.0;
    double std_dev = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;

    double ci_half_width() const noexcept { return 0.5 * (ci_hi - ci_lo); }
};

struct MonteCarloSpec {
    std::vector<std::size_t> n_grid;
    /// Trials per grid point, same length as n_grid.
    std::vector<std::size_t> trials;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

/// Independent simulate -> estimate -> integrated squared error pipelines per
/// grid point. Trial t at grid index g draws from counter (g << 32 | t) of the
/// seed, and results are reduced in trial order, so the output does not
/// depend on the worker count.
std::vector<MsePoint> monte_carlo_mse(const FieldSpec& field, const DeploymentDensity& deploy,
                                      const NoiseModel& noise, const EstimatorConfig& cfg,
                                      const MonteCarloSpec& spec);

/// Runs `count` independent jobs on `workers` threads; job i writes only
/// its own output slot.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& job);

struct RateFitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<double> n_grid;
    std::vector<double> mse_values;
};

/// Least squares of log(mse) on log(n).
RateFitResult rate_fit(std::span<const double> n_grid, std::span<const double> mse_values);

struct ScheduleValidation {
    double psi = 0.0;
    double gamma = 0.0;
    double psi_prime = 0.0; // gamma * psi
    bool gamma_in_range = false;          // gamma in (1, 1/psi)
    bool summability_ok = false;          // Lambda_{m(n)}^2 = n^{psi'} with psi' < 1
    double ermakoff_log_ratio = 0.0;      // log of e^t q(e^t)/q(t) at t = 200, eps = 0.1
    bool uniformly_bounded = false;
    double beta = 0.0;
    double c1 = kInfinity;                // beta^2 / nu
    double c2_per_unit_amplitude = 0.0;   // beta * sqrt(vol D); multiply by a
    bool linear_lambda_summable = false;  // Lambda_m = m route: 2 psi < 1
    std::vector<std::size_t> m_grid;
    std::vector<double> kernel_sup;       // max over grid of |sum phi_j(x) phi_j*(y) / p(y)|
    std::vector<double> projection_sup;   // max over fields, x of |f_m(x)| / a
    bool kernel_bound_ok = false;         // kernel_sup <= c1 * m
    bool projection_bound_ok = false;     // projection_sup <= c2 * m
    bool valid() const noexcept { return gamma_in_range && summability_ok; }
};

ScheduleValidation validate_as_schedule(double psi, double gamma, const Basis& basis,
                                        const DeploymentDensity& deploy, std::span<const FieldSpec> fields,
                                        std::span<const std::size_t> m_grid = {}, std::size_t grid_points = 65);

struct ASTraceResult {
    std::vector<std::size_t> n_checkpoints;
    std::vector<std::size_t> m_values;
    std::vector<double> sup_error;            // sup over grid |S_n(x)|
    std::vector<double> sup_field_error;      // sup over grid |f_hat_n(x) - f(x)|
    std::vector<double> sup_field_error_away; // same, excluding a neighbourhood of jumps
    double jump_exclusion = 0.0;
    Schedule schedule;
    double gamma = 0.0;
    ScheduleValidation conditions;
    std::string note;
};

ASTraceResult as_error_trace(const FieldSpec& field, const DeploymentDensity& deploy, const NoiseModel& noise,
                             const Schedule& schedule, std::uint64_t seed,
                             std::span<const std::size_t> checkpoints, std::size_t eval_grid_points,
                             const Basis& basis = Basis::fourier(), double jump_exclusion = 0.02);

} // namespace binfield
