#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "binfield/basis.hpp"

namespace binfield {

/// Number of coefficients used to stand in for an infinite expansion.
inline constexpr std::size_t kTailCount = 16384;
/// Largest admissible energy fraction beyond kTailCount.
inline constexpr double kTailTolerance = 1e-4;

enum class FieldClass { FiniteDim, BoundedVariation, Sobolev };
enum class BvShape { Step, Sawtooth, Staircase };

struct CoefficientVector {
    std::vector<cplx> values;
    BasisKind basis = BasisKind::FourierComplex;

    std::size_t size() const noexcept { return values.size(); }
    const cplx& operator[](std::size_t j) const { return values[j]; }
    std::span<const cplx> head(std::size_t m) const { return std::span<const cplx>(values).first(m); }
};

/// A concrete real test field f: [0,1] -> [-a, a].
///
/// Cheap to copy; the coefficient tables are shared and never mutated.
class FieldSpec {
public:
    /// Linear combination of the first k functions of `basis`. Under the
    /// Fourier system the coefficients must be conjugate-paired so that the
    /// field is real.
    static FieldSpec finite_dim(const Basis& basis, std::vector<cplx> coefficients, double a);
    static FieldSpec zero(double a = 1.0);

    static FieldSpec step(double at = 0.5, double low = 0.0, double high = 1.0);
    static FieldSpec sawtooth();
    static FieldSpec staircase(std::array<double, 4> levels = {-0.75, -0.25, 0.25, 0.75});

    /// Used by make_sobolev_field; `coefficients` are Fourier-indexed.
    static FieldSpec sobolev(double s, std::uint64_t seed, std::vector<cplx> coefficients, double a,
                             double dropped_energy);

    FieldClass field_class() const noexcept;
    double amplitude_bound() const noexcept;
    /// Same field with a looser declared bound; a must not be below the current one.
    FieldSpec with_amplitude_bound(double a) const;
    double eval(double x) const;
    void eval_many(std::span<const double> xs, std::span<double> out) const;
    double norm_sq() const noexcept;

    /// Energy the numerical representation misses beyond kTailCount
    /// coefficients (an upper estimate for BV shapes, exact bookkeeping for
    /// generated Sobolev fields).
    double tail_residual() const noexcept;

    /// Discontinuities inside (0,1). The sawtooth's wrap-around jump sits at
    /// the endpoints and is not listed.
    std::vector<double> jump_points() const;
    /// Jump points plus 0 and 1, sorted; quadrature panel boundaries.
    std::vector<double> panel_breaks() const;

    /// Coefficients with respect to `basis` known in closed form, if any.
    std::optional<CoefficientVector> closed_form_coefficients(const Basis& basis, std::size_t count) const;

    // Class parameters (meaningful for the matching class only).
    const Basis& native_basis() const;
    std::span<const cplx> native_coefficients() const;
    BvShape shape() const;
    std::span<const double> shape_params() const;
    double sobolev_s() const;
    std::uint64_t sobolev_seed() const;

    std::string describe() const;

    struct Impl;

private:
    explicit FieldSpec(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
};

/// Random real field in the Sobolev-s class: conjugate-paired Fourier
/// coefficients with |alpha_j| proportional to (1+|k_j|)^-(s+0.55) and random
/// phases, truncated once the dropped energy is below 1e-5 of the total and
/// rescaled so that sup|f| <= a.
FieldSpec make_sobolev_field(double s, std::uint64_t seed, double a = 1.0);

enum class CoefficientMethod { Auto, Quadrature };

/// <f, phi_j> for j < count. Closed forms are used when available unless
/// `method` forces quadrature (absolute tolerance 1e-10 per coefficient).
/// Throws QuadratureError on non-convergence.
CoefficientVector true_coefficients(const FieldSpec& field, const Basis& basis, std::size_t count,
                                    CoefficientMethod method = CoefficientMethod::Auto);

/// sum_{j<m} coeffs_j phi_j(x).
cplx m_term_approximation(const CoefficientVector& coeffs, const Basis& basis, std::size_t m, double x);

/// ||f||^2 - sum_{j<m} |alpha_j|^2, clamped at zero.
double m_term_error(const CoefficientVector& coeffs, const FieldSpec& field, std::size_t m);

/// ||f||^2 by adaptive quadrature of f^2 at absolute tolerance 1e-10.
double norm_sq_by_quadrature(const FieldSpec& field);

} // namespace binfield
