#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

namespace binfield {

using cplx = std::complex<double>;

enum class BasisKind { FourierComplex, StepIndicator };

/// Indexed orthonormal system on [0,1].
///
/// FourierComplex: phi_0 = 1, phi_j = exp(+i pi j x) for even j and
/// exp(-i pi (j+1) x) for odd j, i.e. the signed frequencies 0, -1, +1, -2, +2, ...
/// StepIndicator(K): phi_j = sqrt(K) on [j/K, (j+1)/K), zero elsewhere, j < K.
class Basis {
public:
    static Basis fourier() { return Basis(BasisKind::FourierComplex, 0); }
    static Basis step_indicator(std::size_t cells);

    BasisKind kind() const noexcept { return kind_; }
    std::size_t cells() const noexcept { return cells_; }

    /// Number of functions in the system; 0 means unbounded.
    std::size_t size() const noexcept { return kind_ == BasisKind::FourierComplex ? 0 : cells_; }
    bool contains(std::size_t j) const noexcept { return size() == 0 || j < size(); }

    cplx eval(std::size_t j, double x) const;

    /// Signed Fourier frequency of index j (FourierComplex only).
    static long frequency(std::size_t j) noexcept {
        return (j % 2 == 0) ? static_cast<long>(j / 2) : -static_cast<long>((j + 1) / 2);
    }
    /// Inverse of frequency().
    static std::size_t index_of_frequency(long k) noexcept {
        return k >= 0 ? static_cast<std::size_t>(2 * k) : static_cast<std::size_t>(-2 * k - 1);
    }

    bool is_uniformly_bounded() const noexcept { return true; }
    double bound() const noexcept;
    /// |phi_j(x)| is constant (=1) on [0,1] for every j.
    bool has_unit_modulus() const noexcept { return kind_ == BasisKind::FourierComplex; }

    /// Points in [0,1] where some phi_j with j < count is discontinuous,
    /// including both endpoints. Used to split quadrature panels.
    std::vector<double> breakpoints(std::size_t count) const;

    std::string name() const;
    bool operator==(const Basis&) const = default;

private:
    Basis(BasisKind kind, std::size_t cells) : kind_(kind), cells_(cells) {}

    BasisKind kind_;
    std::size_t cells_;
};

} // namespace binfield
