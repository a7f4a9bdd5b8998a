#include "binfield/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace binfield {

// ---------------------------------------------------------------------------
// DeploymentDensity

DeploymentDensity DeploymentDensity::uniform() { return DeploymentDensity(DensityKind::Uniform, 1.0, 0.0); }

DeploymentDensity DeploymentDensity::linear2x() { return DeploymentDensity(DensityKind::Linear2x, 0.0, 0.0); }

DeploymentDensity DeploymentDensity::affine_floor(double nu) {
    if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("affine_floor density needs nu in (0, 1]");
    return DeploymentDensity(DensityKind::AffineFloor, nu, nu);
}

DeploymentDensity DeploymentDensity::custom(std::span<const double> node_values) {
    if (node_values.size() != kCustomCells + 1)
        throw std::invalid_argument("custom density needs " + std::to_string(kCustomCells + 1) + " node values");
    std::vector<double> mass(kCustomCells);
    for (std::size_t i = 0; i < kCustomCells; ++i) {
        if (node_values[i] < 0.0 || !std::isfinite(node_values[i]))
            throw std::invalid_argument("custom density values must be finite and non-negative");
        mass[i] = 0.5 * (node_values[i] + node_values[i + 1]);
    }
    if (node_values.back() < 0.0 || !std::isfinite(node_values.back()))
        throw std::invalid_argument("custom density values must be finite and non-negative");
    return from_cells(mass);
}

DeploymentDensity DeploymentDensity::custom_cells(std::span<const double> cell_values) {
    if (cell_values.size() != kCustomCells)
        throw std::invalid_argument("custom density needs " + std::to_string(kCustomCells) + " cell values");
    for (double v : cell_values)
        if (v < 0.0 || !std::isfinite(v)) throw std::invalid_argument("custom density values must be finite and non-negative");
    return from_cells(std::vector<double>(cell_values.begin(), cell_values.end()));
}

DeploymentDensity DeploymentDensity::from_cells(const std::vector<double>& mass) {
    double total = 0.0;
    for (double m : mass) total += m;
    if (!(total > 0.0)) throw std::invalid_argument("custom density has zero mass");

    DeploymentDensity d(DensityKind::Custom, 0.0, 0.0);
    d.cell_pdf_.resize(kCustomCells);
    d.cell_cdf_.resize(kCustomCells + 1);
    double running = 0.0;
    d.cell_cdf_[0] = 0.0;
    double nu = INFINITY;
    for (std::size_t i = 0; i < kCustomCells; ++i) {
        d.cell_pdf_[i] = mass[i] / total * kCustomCells;
        nu = std::min(nu, d.cell_pdf_[i]);
        running += mass[i] / total;
        d.cell_cdf_[i + 1] = running;
    }
    d.cell_cdf_.back() = 1.0;
    d.nu_ = nu;
    return d;
}

DeploymentDensity DeploymentDensity::custom(const std::function<double(double)>& shape) {
    std::vector<double> nodes(kCustomCells + 1);
    for (std::size_t i = 0; i <= kCustomCells; ++i) nodes[i] = shape(static_cast<double>(i) / kCustomCells);
    return custom(nodes);
}

double DeploymentDensity::pdf(double x) const {
    if (x < 0.0 || x > 1.0) return 0.0;
    switch (kind_) {
    case DensityKind::Uniform: return 1.0;
    case DensityKind::Linear2x: return 2.0 * x;
    case DensityKind::AffineFloor: return param_ + 2.0 * (1.0 - param_) * x;
    case DensityKind::Custom: {
        const std::size_t i = std::min(kCustomCells - 1, static_cast<std::size_t>(x * kCustomCells));
        return cell_pdf_[i];
    }
    }
    return 0.0;
}

double DeploymentDensity::cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    switch (kind_) {
    case DensityKind::Uniform: return x;
    case DensityKind::Linear2x: return x * x;
    case DensityKind::AffineFloor: return param_ * x + (1.0 - param_) * x * x;
    case DensityKind::Custom: {
        const std::size_t i = std::min(kCustomCells - 1, static_cast<std::size_t>(x * kCustomCells));
        return cell_cdf_[i] + cell_pdf_[i] * (x - static_cast<double>(i) / kCustomCells);
    }
    }
    return 0.0;
}

double DeploymentDensity::sample_from_uniform(double u) const {
    switch (kind_) {
    case DensityKind::Uniform: return u;
    case DensityKind::Linear2x: return std::sqrt(u);
    case DensityKind::AffineFloor: {
        // Root of (1-nu) x^2 + nu x - u = 0 in the cancellation-free form.
        const double nu = param_;
        return 2.0 * u / (nu + std::sqrt(nu * nu + 4.0 * (1.0 - nu) * u));
    }
    case DensityKind::Custom: {
        auto it = std::upper_bound(cell_cdf_.begin(), cell_cdf_.end(), u);
        std::size_t i = static_cast<std::size_t>(std::distance(cell_cdf_.begin(), it));
        i = std::clamp<std::size_t>(i, 1, kCustomCells) - 1;
        // Skip zero-mass cells; upper_bound already lands past them.
        const double lo = static_cast<double>(i) / kCustomCells;
        const double width = cell_cdf_[i + 1] - cell_cdf_[i];
        const double frac = width > 0.0 ? (u - cell_cdf_[i]) / width : 0.0;
        return std::clamp(lo + frac / kCustomCells, 0.0, 1.0);
    }
    }
    return u;
}

std::vector<double> DeploymentDensity::breakpoints() const {
    if (kind_ != DensityKind::Custom) return {0.0, 1.0};
    std::vector<double> out(kCustomCells + 1);
    for (std::size_t i = 0; i <= kCustomCells; ++i) out[i] = static_cast<double>(i) / kCustomCells;
    return out;
}

std::string DeploymentDensity::name() const {
    switch (kind_) {
    case DensityKind::Uniform: return "uniform";
    case DensityKind::Linear2x: return "linear2x";
    case DensityKind::AffineFloor: {
        std::ostringstream os;
        os << "affine_floor(nu=" << param_ << ")";
        return os.str();
    }
    case DensityKind::Custom: return "custom";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// NoiseModel

NoiseModel NoiseModel::uniform_sym(double b) {
    if (!(b > 0.0)) throw std::invalid_argument("uniform noise needs b > 0");
    return NoiseModel(NoiseKind::UniformSym, b, 0.0);
}

NoiseModel NoiseModel::trunc_gauss(double sigma, double b) {
    if (!(b > 0.0) || !(sigma > 0.0)) throw std::invalid_argument("truncated Gaussian noise needs sigma, b > 0");
    return NoiseModel(NoiseKind::TruncGauss, b, sigma);
}

NoiseModel NoiseModel::two_point(double b) {
    if (!(b > 0.0)) throw std::invalid_argument("two-point noise needs b > 0");
    return NoiseModel(NoiseKind::TwoPoint, b, 0.0);
}

double NoiseModel::sample(RandomStream& rng) const {
    switch (kind_) {
    case NoiseKind::Zero: return 0.0;
    case NoiseKind::UniformSym: return b_ * (2.0 * rng.uniform() - 1.0);
    case NoiseKind::TruncGauss:
        for (;;) {
            const double z = sigma_ * rng.normal();
            if (std::abs(z) <= b_) return z;
        }
    case NoiseKind::TwoPoint: return rng.uniform() < 0.5 ? -b_ : b_;
    }
    return 0.0;
}

std::string NoiseModel::name() const {
    std::ostringstream os;
    switch (kind_) {
    case NoiseKind::Zero: os << "zero"; break;
    case NoiseKind::UniformSym: os << "uniform(b=" << b_ << ")"; break;
    case NoiseKind::TruncGauss: os << "trunc_gauss(sigma=" << sigma_ << ", b=" << b_ << ")"; break;
    case NoiseKind::TwoPoint: os << "two_point(b=" << b_ << ")"; break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// SensorStream

SensorStream::SensorStream(FieldSpec field, DeploymentDensity deploy, NoiseModel noise, std::uint64_t seed,
                           std::uint64_t trial)
    : field_(std::move(field)), deploy_(std::move(deploy)), noise_(noise),
      c_(field_.amplitude_bound() + noise_.bound()), locations_(seed, trial, StreamLabel::Locations),
      noise_rng_(seed, trial, StreamLabel::Noise), thresholds_(seed, trial, StreamLabel::Thresholds) {}

void SensorStream::extend(SensorBatch& batch, std::size_t n) {
    const std::size_t start = batch.size();
    if (n <= start) return;
    batch.c = c_;
    batch.x.resize(n);
    batch.y.resize(n);
    batch.t.resize(n);
    batch.b.resize(n);
    for (std::size_t i = start; i < n; ++i) batch.x[i] = deploy_.sample(locations_);
    field_.eval_many(std::span<const double>(batch.x).subspan(start), std::span<double>(batch.y).subspan(start));
    for (std::size_t i = start; i < n; ++i) {
        batch.y[i] += noise_.sample(noise_rng_);
        batch.t[i] = c_ * (2.0 * thresholds_.uniform() - 1.0);
        batch.b[i] = static_cast<std::int8_t>(quantize_one(batch.y[i], batch.t[i]));
    }
}

SensorBatch SensorStream::draw(std::size_t n) {
    SensorBatch batch;
    batch.c = c_;
    extend(batch, n);
    return batch;
}

SensorBatch simulate_batch(const FieldSpec& field, const DeploymentDensity& deploy, const NoiseModel& noise,
                           std::size_t n, std::uint64_t seed, std::uint64_t trial) {
    if (n == 0) throw std::invalid_argument("simulate_batch: n must be at least 1");
    SensorStream stream(field, deploy, noise, seed, trial);
    return stream.draw(n);
}

void write_batch_csv(const SensorBatch& batch, std::ostream& os) {
    os << "i,x,y,t,b\n";
    char line[160];
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%d\n", i, batch.x[i], batch.y[i], batch.t[i],
                      static_cast<int>(batch.b[i]));
        os << line;
    }
}

} // namespace binfield
