#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "binfield/field.hpp"
#include "binfield/rng.hpp"

namespace binfield {

enum class DensityKind { Uniform, Linear2x, AffineFloor, Custom };

/// Sensor-location density p_X on [0,1].
class DeploymentDensity {
public:
    /// Grid resolution of tabulated densities.
    static constexpr std::size_t kCustomCells = 4096;

    static DeploymentDensity uniform();
    /// p(x) = 2x; its infimum is zero.
    static DeploymentDensity linear2x();
    /// p(x) = nu + 2 (1 - nu) x, nu in (0, 1].
    static DeploymentDensity affine_floor(double nu);
    /// Tabulated density: `node_values` holds kCustomCells + 1 non-negative
    /// samples at x = i / kCustomCells. The density actually used is the
    /// piecewise-constant one whose cell masses are the (normalized)
    /// trapezoid areas, so pdf() and sample() agree exactly.
    static DeploymentDensity custom(std::span<const double> node_values);
    static DeploymentDensity custom(const std::function<double(double)>& shape);
    /// Piecewise-constant density from kCustomCells non-negative cell values
    /// (normalized to unit mass).
    static DeploymentDensity custom_cells(std::span<const double> cell_values);

    DensityKind kind() const noexcept { return kind_; }
    /// inf of the density over [0,1].
    double infimum() const noexcept { return nu_; }
    double param() const noexcept { return param_; }
    double pdf(double x) const;
    double cdf(double x) const;
    /// Inverse-CDF transform of a uniform variate in [0,1).
    double sample_from_uniform(double u) const;
    double sample(RandomStream& rng) const { return sample_from_uniform(rng.uniform()); }
    /// Panel boundaries for quadrature (cell edges of tabulated densities).
    std::vector<double> breakpoints() const;
    std::span<const double> cell_density() const { return cell_pdf_; }
    std::string name() const;

private:
    static DeploymentDensity from_cells(const std::vector<double>& mass);
    DeploymentDensity(DensityKind kind, double nu, double param) : kind_(kind), nu_(nu), param_(param) {}

    DensityKind kind_;
    double nu_;
    double param_;
    std::vector<double> cell_pdf_;
    std::vector<double> cell_cdf_; // CDF at the kCustomCells + 1 nodes
};

enum class NoiseKind { Zero, UniformSym, TruncGauss, TwoPoint };

/// Zero-mean additive noise with support in [-b, b].
class NoiseModel {
public:
    static NoiseModel zero() { return NoiseModel(NoiseKind::Zero, 0.0, 0.0); }
    static NoiseModel uniform_sym(double b);
    static NoiseModel trunc_gauss(double sigma, double b);
    static NoiseModel two_point(double b);

    NoiseKind kind() const noexcept { return kind_; }
    double bound() const noexcept { return b_; }
    double sigma() const noexcept { return sigma_; }
    double sample(RandomStream& rng) const;
    std::string name() const;

private:
    NoiseModel(NoiseKind kind, double b, double sigma) : kind_(kind), b_(b), sigma_(sigma) {}
    NoiseKind kind_;
    double b_;
    double sigma_;
};

/// One realization of n sensors: locations, noisy samples, thresholds, bits.
struct SensorBatch {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> t;
    std::vector<std::int8_t> b;
    double c = 1.0;

    std::size_t size() const noexcept { return x.size(); }
};

/// Dithered one-bit quantizer: +1 if y > t, -1 otherwise (ties go to -1).
inline int quantize_one(double y, double t) noexcept { return y > t ? +1 : -1; }

/// Sensor generator for one trial. Each draw advances three independent
/// substreams (locations, noise, thresholds), so extending a batch from n to
/// n' keeps the first n sensors unchanged.
class SensorStream {
public:
    SensorStream(FieldSpec field, DeploymentDensity deploy, NoiseModel noise, std::uint64_t seed,
                 std::uint64_t trial = 0);

    double dynamic_range() const noexcept { return c_; }
    /// Appends sensors to `batch` until it holds `n` of them.
    void extend(SensorBatch& batch, std::size_t n);
    SensorBatch draw(std::size_t n);

private:
    FieldSpec field_;
    DeploymentDensity deploy_;
    NoiseModel noise_;
    double c_;
    RandomStream locations_;
    RandomStream noise_rng_;
    RandomStream thresholds_;
};

/// Draws n sensors with X ~ p_X, Z ~ noise, T ~ Unif[-c, c], c = a + b.
SensorBatch simulate_batch(const FieldSpec& field, const DeploymentDensity& deploy, const NoiseModel& noise,
                           std::size_t n, std::uint64_t seed, std::uint64_t trial = 0);

/// CSV with columns i,x,y,t,b.
void write_batch_csv(const SensorBatch& batch, std::ostream& os);

} // namespace binfield
