#include "binfield/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "binfield/trig.hpp"

namespace binfield {

std::string Schedule::name() const {
    std::ostringstream os;
    switch (kind) {
    case ScheduleKind::FixedM: os << "fixed(m=" << param << ")"; break;
    case ScheduleKind::FiniteDim: os << "finite_dim(k=" << param << ")"; break;
    case ScheduleKind::BV: os << "bv(m=ceil(sqrt n))"; break;
    case ScheduleKind::Sobolev: os << "sobolev(s=" << param << ")"; break;
    case ScheduleKind::Power: os << "power(psi=" << param << ")"; break;
    }
    return os.str();
}

namespace {

// ceil(n^e) guarded against round-off when n^e is an exact integer
// (e.g. 10000^0.5, 1000^(1/3)).
std::size_t ceil_power(std::size_t n, double e) {
    const double v = std::pow(static_cast<double>(n), e);
    const double r = std::round(v);
    if (std::abs(v - r) <= 1e-9 * std::max(1.0, r)) return std::max<std::size_t>(1, static_cast<std::size_t>(r));
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(v)));
}

} // namespace

std::size_t truncation_schedule(const Schedule& schedule, std::size_t n) {
    if (n == 0) throw std::invalid_argument("truncation_schedule: n must be at least 1");
    switch (schedule.kind) {
    case ScheduleKind::FixedM:
    case ScheduleKind::FiniteDim:
        if (!(schedule.param >= 1.0)) throw std::invalid_argument("schedule needs m >= 1");
        return static_cast<std::size_t>(schedule.param);
    case ScheduleKind::BV: return ceil_power(n, 0.5);
    case ScheduleKind::Sobolev:
        if (!(schedule.param > 0.5)) throw std::invalid_argument("Sobolev schedule needs s > 1/2");
        return ceil_power(n, 1.0 / (2.0 * schedule.param + 1.0));
    case ScheduleKind::Power:
        if (!(schedule.param > 0.0)) throw std::invalid_argument("power schedule needs psi > 0");
        return ceil_power(n, schedule.param);
    }
    return 1;
}

ReconstructionCoefficients estimate_coefficients(std::span<const double> x, std::span<const std::int8_t> bits,
                                                 const EstimatorConfig& cfg, std::size_t m) {
    if (m == 0) throw std::invalid_argument("estimate_coefficients: m must be at least 1");
    if (x.empty()) throw std::invalid_argument("estimate_coefficients: empty batch");
    if (bits.size() != x.size()) throw std::invalid_argument("estimate_coefficients: x and bits differ in length");
    if (!cfg.basis.contains(m - 1)) throw std::invalid_argument("estimate_coefficients: m exceeds basis size");

    const std::size_t n = x.size();
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = cfg.deploy.pdf(x[i]);
        if (!(p > 0.0)) throw DensityError(x[i]);
        weights[i] = static_cast<double>(bits[i]) / p;
    }

    ReconstructionCoefficients out;
    out.n_used = n;
    out.values.resize(m);
    const double scale = cfg.c / static_cast<double>(n);

    if (cfg.basis.kind() == BasisKind::FourierComplex) {
        // conj(phi_j(x)) = exp(-2 pi i k x) for k = freq(j) >= 0; for negative
        // frequencies it is the conjugate of the +|k| phasor and weights are real.
        const long max_k = static_cast<long>(m / 2);
        const auto sums = weighted_phasor_sums(x, weights, max_k);
        for (std::size_t j = 0; j < m; ++j) {
            const long k = Basis::frequency(j);
            out.values[j] = scale * (k >= 0 ? sums[static_cast<std::size_t>(k)] : std::conj(sums[static_cast<std::size_t>(-k)]));
        }
        return out;
    }

    const std::size_t cells = cfg.basis.cells();
    const double height = cfg.basis.bound();
    std::vector<CompensatedSum<double>> sums(m);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = std::min(cells - 1, static_cast<std::size_t>(std::max(0.0, x[i]) * cells));
        if (j < m) sums[j].add(weights[i]);
    }
    for (std::size_t j = 0; j < m; ++j) out.values[j] = scale * height * sums[j].value();
    return out;
}

ReconstructionCoefficients estimate_coefficients_prefix(const SensorBatch& batch, const EstimatorConfig& cfg,
                                                        std::size_t n, std::size_t m) {
    if (n > batch.size()) throw std::invalid_argument("estimate_coefficients_prefix: n exceeds batch size");
    return estimate_coefficients(std::span<const double>(batch.x).first(n),
                                 std::span<const std::int8_t>(batch.b).first(n), cfg, m);
}

cplx reconstruct(const ReconstructionCoefficients& coeffs, const Basis& basis, double x) {
    cplx sum{};
    for (std::size_t j = 0; j < coeffs.size(); ++j) sum += coeffs.values[j] * basis.eval(j, x);
    return sum;
}

std::vector<cplx> reconstruct_many(const ReconstructionCoefficients& coeffs, const Basis& basis,
                                   std::span<const double> xs) {
    std::vector<cplx> out(xs.size());
    if (basis.kind() == BasisKind::FourierComplex) {
        fourier_synthesis(coeffs.values, xs, out);
        return out;
    }
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = reconstruct(coeffs, basis, xs[i]);
    return out;
}

} // namespace binfield
