#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <type_traits>
#include <vector>

namespace binfield {

/// Neumaier-compensated running sum.
template <class T>
class CompensatedSum {
public:
    void add(T v) {
        const T t = sum_ + v;
        if constexpr (std::is_same_v<T, std::complex<double>>) {
            comp_ += std::complex<double>(correction(sum_.real(), v.real(), t.real()),
                                          correction(sum_.imag(), v.imag(), t.imag()));
        } else {
            comp_ += correction(sum_, v, t);
        }
        sum_ = t;
    }
    T value() const { return sum_ + comp_; }

private:
    static double correction(double s, double v, double t) {
        return std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    }
    T sum_{};
    T comp_{};
};

/// Evaluates sum_{j<m} coeffs[j] * phi_j(x) for the complex Fourier system at
/// every x in `xs`. Points are processed in lanes with a rotating phasor that
/// is re-anchored with sincos every 256 frequencies.
void fourier_synthesis(std::span<const std::complex<double>> coeffs, std::span<const double> xs,
                       std::span<std::complex<double>> out);

/// Real-field variant: returns Re of the synthesis, assuming conjugate-paired
/// coefficients. Roughly half the work of fourier_synthesis.
void fourier_synthesis_real(std::span<const std::complex<double>> coeffs, std::span<const double> xs,
                            std::span<double> out);

/// Computes S_k = sum_i weights[i] * exp(-2 pi i k xs[i]) for k = 0..max_freq
/// with compensated accumulation across chunks of points.
std::vector<std::complex<double>> weighted_phasor_sums(std::span<const double> xs,
                                                       std::span<const double> weights,
                                                       long max_freq);

} // namespace binfield
