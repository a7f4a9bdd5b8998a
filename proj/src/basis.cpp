#include "binfield/basis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace binfield {

Basis Basis::step_indicator(std::size_t cells) {
    if (cells == 0) throw std::invalid_argument("step_indicator basis needs at least one cell");
    return Basis(BasisKind::StepIndicator, cells);
}

cplx Basis::eval(std::size_t j, double x) const {
    switch (kind_) {
    case BasisKind::FourierComplex: {
        const long k = frequency(j);
        if (k == 0) return {1.0, 0.0};
        const double t = static_cast<double>(k) * x;
        const double ang = 2.0 * std::numbers::pi * (t - std::floor(t));
        return {std::cos(ang), std::sin(ang)};
    }
    case BasisKind::StepIndicator: {
        if (j >= cells_) throw std::out_of_range("step_indicator index beyond basis size");
        const double lo = static_cast<double>(j) / cells_;
        const double hi = static_cast<double>(j + 1) / cells_;
        // The last cell is closed so that x = 1 is covered.
        const bool inside = x >= lo && (x < hi || (j + 1 == cells_ && x <= 1.0));
        return inside ? cplx{std::sqrt(static_cast<double>(cells_)), 0.0} : cplx{};
    }
    }
    return {};
}

double Basis::bound() const noexcept {
    return kind_ == BasisKind::FourierComplex ? 1.0 : std::sqrt(static_cast<double>(cells_));
}

std::vector<double> Basis::breakpoints(std::size_t count) const {
    if (kind_ == BasisKind::FourierComplex) return {0.0, 1.0};
    std::vector<double> out;
    const std::size_t upto = std::min(count, cells_);
    out.push_back(0.0);
    for (std::size_t j = 0; j < upto; ++j) {
        const double lo = static_cast<double>(j) / cells_;
        const double hi = static_cast<double>(j + 1) / cells_;
        if (lo > out.back()) out.push_back(lo);
        if (hi > out.back()) out.push_back(hi);
    }
    if (out.back() < 1.0) out.push_back(1.0);
    return out;
}

std::string Basis::name() const {
    return kind_ == BasisKind::FourierComplex ? "fourier" : "step:" + std::to_string(cells_);
}

} // namespace binfield
