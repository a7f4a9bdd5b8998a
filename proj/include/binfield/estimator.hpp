#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "binfield/basis.hpp"
#include "binfield/sensing.hpp"

namespace binfield {

enum class ScheduleKind { FixedM, FiniteDim, BV, Sobolev, Power };

/// Truncation rule m(n). Fractional rules round up.
struct Schedule {
    ScheduleKind kind = ScheduleKind::BV;
    double param = 0.0; // m, k, s or psi depending on kind

    static Schedule fixed(std::size_t m) { return {ScheduleKind::FixedM, static_cast<double>(m)}; }
    static Schedule finite_dim(std::size_t k) { return {ScheduleKind::FiniteDim, static_cast<double>(k)}; }
    static Schedule bv() { return {ScheduleKind::BV, 0.0}; }
    static Schedule sobolev(double s) { return {ScheduleKind::Sobolev, s}; }
    static Schedule power(double psi) { return {ScheduleKind::Power, psi}; }

    std::string name() const;
};

/// m(n): FiniteDim(k) -> k, BV -> ceil(sqrt n), Sobolev(s) -> ceil(n^{1/(2s+1)}),
/// Power(psi) -> ceil(n^psi), FixedM(m) -> m.
std::size_t truncation_schedule(const Schedule& schedule, std::size_t n);

struct EstimatorConfig {
    Basis basis = Basis::fourier();
    DeploymentDensity deploy = DeploymentDensity::uniform();
    double c = 1.0;
    Schedule schedule;
};

struct ReconstructionCoefficients {
    std::vector<cplx> values;
    std::size_t n_used = 0;

    std::size_t size() const noexcept { return values.size(); }
};

/// Raised when a sensor sits where the deployment density vanishes.
class DensityError : public std::domain_error {
public:
    explicit DensityError(double location)
        : std::domain_error("deployment density is zero at sensor location x=" + std::to_string(location)),
          location_(location) {}
    double location() const noexcept { return location_; }

private:
    double location_;
};

/// alpha_hat_j = (c/n) sum_i conj(phi_j(X_i)) B_i / p_X(X_i), j < m.
/// Reads only locations and bits; `c` comes from the configuration.
ReconstructionCoefficients estimate_coefficients(std::span<const double> x, std::span<const std::int8_t> bits,
                                                 const EstimatorConfig& cfg, std::size_t m);

inline ReconstructionCoefficients estimate_coefficients(const SensorBatch& batch, const EstimatorConfig& cfg,
                                                        std::size_t m) {
    return estimate_coefficients(batch.x, batch.b, cfg, m);
}

/// Uses the first n sensors of `batch` (nested sample paths).
ReconstructionCoefficients estimate_coefficients_prefix(const SensorBatch& batch, const EstimatorConfig& cfg,
                                                        std::size_t n, std::size_t m);

/// sum_{j<m} alpha_hat_j phi_j(x); complex-valued.
cplx reconstruct(const ReconstructionCoefficients& coeffs, const Basis& basis, double x);
std::vector<cplx> reconstruct_many(const ReconstructionCoefficients& coeffs, const Basis& basis,
                                   std::span<const double> xs);

} // namespace binfield
