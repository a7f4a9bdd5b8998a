#include "binfield/field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "binfield/quadrature.hpp"
#include "binfield/trig.hpp"

namespace binfield {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

cplx unit_phasor(long k, double x) {
    const double t = static_cast<double>(k) * x;
    const double ang = kTwoPi * (t - std::floor(t));
    return {std::cos(ang), std::sin(ang)};
}

// Piecewise-constant description: values[i] on [breaks[i], breaks[i+1]).
struct Pieces {
    std::vector<double> breaks;
    std::vector<double> values;
};

cplx piecewise_fourier_coefficient(const Pieces& p, long k) {
    cplx sum{};
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double lo = p.breaks[i], hi = p.breaks[i + 1];
        if (k == 0) {
            sum += p.values[i] * (hi - lo);
        } else {
            const cplx diff = std::conj(unit_phasor(k, hi)) - std::conj(unit_phasor(k, lo));
            sum += p.values[i] * diff / cplx(0.0, -kTwoPi * static_cast<double>(k));
        }
    }
    return sum;
}

double piecewise_cell_integral(const Pieces& p, double lo, double hi) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double a = std::max(lo, p.breaks[i]);
        const double b = std::min(hi, p.breaks[i + 1]);
        if (b > a) sum += p.values[i] * (b - a);
    }
    return sum;
}

cplx sawtooth_fourier_coefficient(long k) {
    if (k == 0) return {};
    return {0.0, 1.0 / (kTwoPi * static_cast<double>(k))};
}

double sup_on_grid(const FieldSpec& f, std::size_t points) {
    std::vector<double> xs(points), ys(points);
    for (std::size_t i = 0; i < points; ++i) xs[i] = static_cast<double>(i) / (points - 1);
    f.eval_many(xs, ys);
    double best = 0.0;
    for (double y : ys) best = std::max(best, std::abs(y));
    return best;
}

} // namespace

struct FieldSpec::Impl {
    FieldClass cls = FieldClass::FiniteDim;
    double a = 1.0;
    double norm_sq = 0.0;
    double tail = 0.0;

    Basis basis = Basis::fourier();
    std::vector<cplx> coeffs;

    BvShape shape = BvShape::Step;
    std::vector<double> params;
    Pieces pieces;

    double s = 0.0;
    std::uint64_t seed = 0;

    bool fourier_synthesized() const {
        return cls == FieldClass::Sobolev ||
               (cls == FieldClass::FiniteDim && basis.kind() == BasisKind::FourierComplex);
    }
};

// ---------------------------------------------------------------------------
// construction

FieldSpec FieldSpec::finite_dim(const Basis& basis, std::vector<cplx> coefficients, double a) {
    if (coefficients.empty()) throw std::invalid_argument("finite_dim field needs at least one coefficient");
    if (!(a > 0.0)) throw std::invalid_argument("amplitude bound a must be positive");
    if (!basis.contains(coefficients.size() - 1))
        throw std::invalid_argument("finite_dim field has more coefficients than the basis");

    double scale = 0.0;
    for (const auto& c : coefficients) scale = std::max(scale, std::abs(c));
    const double tol = 1e-10 * std::max(1.0, scale);

    if (basis.kind() == BasisKind::FourierComplex) {
        if (std::abs(coefficients[0].imag()) > tol)
            throw std::invalid_argument("finite_dim Fourier field: alpha_0 must be real");
        const std::size_t k = coefficients.size();
        for (std::size_t freq = 1; 2 * freq - 1 < k; ++freq) {
            const cplx neg = coefficients[2 * freq - 1];
            const cplx pos = 2 * freq < k ? coefficients[2 * freq] : cplx{};
            if (std::abs(pos - std::conj(neg)) > tol)
                throw std::invalid_argument("finite_dim Fourier field: coefficients at +/-" + std::to_string(freq) +
                                            " are not conjugate, field would not be real");
        }
    } else {
        for (const auto& c : coefficients)
            if (std::abs(c.imag()) > tol)
                throw std::invalid_argument("finite_dim step field: coefficients must be real");
    }

    auto impl = std::make_shared<Impl>();
    impl->cls = FieldClass::FiniteDim;
    impl->a = a;
    impl->basis = basis;
    impl->coeffs = std::move(coefficients);
    for (const auto& c : impl->coeffs) impl->norm_sq += std::norm(c);
    FieldSpec out(impl);

    const double sup = basis.kind() == BasisKind::StepIndicator
                           ? [&] {
                                 double m = 0.0;
                                 for (const auto& c : impl->coeffs) m = std::max(m, std::abs(c.real()));
                                 return m * basis.bound();
                             }()
                           : sup_on_grid(out, 100001);
    if (sup > a * (1.0 + 1e-12))
        throw std::invalid_argument("finite_dim field exceeds its amplitude bound a (sup on grid " +
                                    std::to_string(sup) + ")");
    return out;
}

FieldSpec FieldSpec::zero(double a) { return finite_dim(Basis::fourier(), {cplx{}}, a); }

namespace {

std::shared_ptr<FieldSpec::Impl> bv_impl(BvShape shape, std::vector<double> params, Pieces pieces, double a) {
    auto impl = std::make_shared<FieldSpec::Impl>();
    impl->cls = FieldClass::BoundedVariation;
    impl->shape = shape;
    impl->params = std::move(params);
    impl->pieces = std::move(pieces);
    impl->a = a;
    return impl;
}

} // namespace

// Tail check shared by the BV constructors: energy beyond kTailCount Fourier
// coefficients must be a small fraction of ||f||^2.
static void finish_bv(const std::shared_ptr<FieldSpec::Impl>& impl, const FieldSpec& probe) {
    impl->norm_sq = norm_sq_by_quadrature(probe);
    const auto coeffs = probe.closed_form_coefficients(Basis::fourier(), kTailCount);
    double captured = 0.0;
    for (const auto& c : coeffs->values) captured += std::norm(c);
    impl->tail = std::max(0.0, impl->norm_sq - captured);
    if (impl->tail > kTailTolerance * impl->norm_sq)
        throw std::invalid_argument("field energy beyond the coefficient tail is too large (" +
                                    std::to_string(impl->tail / impl->norm_sq) + " of ||f||^2)");
}

FieldSpec FieldSpec::step(double at, double low, double high) {
    if (!(at > 0.0 && at < 1.0)) throw std::invalid_argument("step location must lie in (0,1)");
    const double a = std::max(std::abs(low), std::abs(high));
    if (!(a > 0.0)) throw std::invalid_argument("step field must not be identically zero");
    auto impl = bv_impl(BvShape::Step, {at, low, high}, Pieces{{0.0, at, 1.0}, {low, high}}, a);
    FieldSpec out(impl);
    finish_bv(impl, out);
    return out;
}

FieldSpec FieldSpec::sawtooth() {
    auto impl = bv_impl(BvShape::Sawtooth, {}, {}, 0.5);
    FieldSpec out(impl);
    finish_bv(impl, out);
    return out;
}

FieldSpec FieldSpec::staircase(std::array<double, 4> levels) {
    double a = 0.0;
    for (double v : levels) a = std::max(a, std::abs(v));
    if (!(a > 0.0)) throw std::invalid_argument("staircase field must not be identically zero");
    auto impl = bv_impl(BvShape::Staircase, {levels.begin(), levels.end()},
                        Pieces{{0.0, 0.25, 0.5, 0.75, 1.0}, {levels.begin(), levels.end()}}, a);
    FieldSpec out(impl);
    finish_bv(impl, out);
    return out;
}

FieldSpec FieldSpec::sobolev(double s, std::uint64_t seed, std::vector<cplx> coefficients, double a,
                             double dropped_energy) {
    auto impl = std::make_shared<Impl>();
    impl->cls = FieldClass::Sobolev;
    impl->s = s;
    impl->seed = seed;
    impl->a = a;
    impl->coeffs = std::move(coefficients);
    for (const auto& c : impl->coeffs) impl->norm_sq += std::norm(c);
    impl->tail = dropped_energy;
    return FieldSpec(impl);
}

FieldSpec make_sobolev_field(double s, std::uint64_t seed, double a) {
    if (!(s > 0.5)) throw std::invalid_argument("Sobolev smoothness s must exceed 1/2");
    if (!(a > 0.0)) throw std::invalid_argument("amplitude bound a must be positive");

    const double decay = s + 0.55;
    auto weight = [decay](long k) { return std::pow(1.0 + static_cast<double>(k), -decay); };

    // Energy with unit c0 is 1 + 2 sum_k (1+k)^{-2 decay}; the tail past K is
    // bounded by 2 (1+K)^{1-2 decay} / (2 decay - 1).
    const long max_freq_cap = static_cast<long>(kTailCount / 2);
    double total = 1.0;
    for (long k = 1; k <= max_freq_cap; ++k) total += 2.0 * weight(k) * weight(k);
    total += 2.0 * std::pow(1.0 + max_freq_cap, 1.0 - 2.0 * decay) / (2.0 * decay - 1.0);
    auto tail_after = [&](long K) { return 2.0 * std::pow(1.0 + K, 1.0 - 2.0 * decay) / (2.0 * decay - 1.0); };

    long max_freq = 64;
    while (max_freq < max_freq_cap && tail_after(max_freq) > 1e-5 * total) max_freq *= 2;
    const double dropped_fraction = tail_after(max_freq) / total;
    if (dropped_fraction > kTailTolerance)
        throw std::invalid_argument("Sobolev field with s=" + std::to_string(s) +
                                    " cannot be represented within the coefficient tail budget");

    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5b0b01e5u};
    std::mt19937_64 eng(seq);
    auto uniform = [&eng] { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };

    std::vector<cplx> coeffs(2 * static_cast<std::size_t>(max_freq) + 1);
    coeffs[0] = uniform() < 0.5 ? -1.0 : 1.0;
    for (long k = 1; k <= max_freq; ++k) {
        const double phase = 2.0 * std::numbers::pi * uniform();
        const cplx pos = std::polar(weight(k), phase);
        coeffs[Basis::index_of_frequency(k)] = pos;
        coeffs[Basis::index_of_frequency(-k)] = std::conj(pos);
    }

    // Rescale so that sup|f| <= a: grid maximum plus the largest possible
    // excursion between grid points (Lipschitz bound sum 4 pi k |alpha_k|).
    const std::size_t grid = 1u << 16;
    std::vector<double> xs(grid + 1), ys(grid + 1);
    for (std::size_t i = 0; i <= grid; ++i) xs[i] = static_cast<double>(i) / grid;
    fourier_synthesis_real(coeffs, xs, ys);
    double grid_max = 0.0;
    for (double y : ys) grid_max = std::max(grid_max, std::abs(y));
    double lipschitz = 0.0;
    for (long k = 1; k <= max_freq; ++k) lipschitz += 4.0 * std::numbers::pi * k * weight(k);
    const double sup_bound = grid_max + lipschitz * 0.5 / grid;
    const double scale = a / sup_bound;
    for (auto& c : coeffs) c *= scale;

    const double dropped = dropped_fraction * total * scale * scale;
    return FieldSpec::sobolev(s, seed, std::move(coeffs), a, dropped);
}

// ---------------------------------------------------------------------------
// evaluation

FieldClass FieldSpec::field_class() const noexcept { return impl_->cls; }
double FieldSpec::amplitude_bound() const noexcept { return impl_->a; }

FieldSpec FieldSpec::with_amplitude_bound(double a) const {
    if (!(a >= impl_->a)) throw std::invalid_argument("declared amplitude bound is below the field's supremum bound");
    auto copy = std::make_shared<Impl>(*impl_);
    copy->a = a;
    return FieldSpec(copy);
}
double FieldSpec::norm_sq() const noexcept { return impl_->norm_sq; }
double FieldSpec::tail_residual() const noexcept { return impl_->tail; }

double FieldSpec::eval(double x) const {
    const Impl& m = *impl_;
    switch (m.cls) {
    case FieldClass::FiniteDim:
    case FieldClass::Sobolev: {
        if (m.basis.kind() == BasisKind::StepIndicator) {
            const std::size_t cells = m.basis.cells();
            std::size_t j = std::min(cells - 1, static_cast<std::size_t>(std::max(0.0, x) * cells));
            return j < m.coeffs.size() ? m.coeffs[j].real() * m.basis.bound() : 0.0;
        }
        double out = 0.0;
        fourier_synthesis_real(m.coeffs, std::span<const double>(&x, 1), std::span<double>(&out, 1));
        return out;
    }
    case FieldClass::BoundedVariation:
        if (m.shape == BvShape::Sawtooth) return x - 0.5;
        for (std::size_t i = 0; i < m.pieces.values.size(); ++i)
            if (x < m.pieces.breaks[i + 1]) return m.pieces.values[i];
        return m.pieces.values.back();
    }
    return 0.0;
}

void FieldSpec::eval_many(std::span<const double> xs, std::span<double> out) const {
    if (impl_->fourier_synthesized()) {
        fourier_synthesis_real(impl_->coeffs, xs, out);
        return;
    }
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = eval(xs[i]);
}

std::vector<double> FieldSpec::jump_points() const {
    const Impl& m = *impl_;
    if (m.cls == FieldClass::BoundedVariation && m.shape != BvShape::Sawtooth)
        return {m.pieces.breaks.begin() + 1, m.pieces.breaks.end() - 1};
    if (m.cls == FieldClass::FiniteDim && m.basis.kind() == BasisKind::StepIndicator) {
        auto b = m.basis.breakpoints(m.coeffs.size());
        return {b.begin() + 1, b.end() - 1};
    }
    return {};
}

std::vector<double> FieldSpec::panel_breaks() const {
    auto out = jump_points();
    out.insert(out.begin(), 0.0);
    out.push_back(1.0);
    return out;
}

std::optional<CoefficientVector> FieldSpec::closed_form_coefficients(const Basis& basis, std::size_t count) const {
    const Impl& m = *impl_;
    CoefficientVector out;
    out.basis = basis.kind();
    out.values.assign(count, cplx{});

    if (m.cls != FieldClass::BoundedVariation) {
        if (!(m.basis == basis)) return std::nullopt;
        std::copy_n(m.coeffs.begin(), std::min(count, m.coeffs.size()), out.values.begin());
        return out;
    }

    if (basis.kind() == BasisKind::FourierComplex) {
        for (std::size_t j = 0; j < count; ++j) {
            const long k = Basis::frequency(j);
            out.values[j] = m.shape == BvShape::Sawtooth ? sawtooth_fourier_coefficient(k)
                                                         : piecewise_fourier_coefficient(m.pieces, k);
        }
        return out;
    }

    const std::size_t cells = basis.cells();
    const double height = basis.bound();
    for (std::size_t j = 0; j < std::min(count, cells); ++j) {
        const double lo = static_cast<double>(j) / cells, hi = static_cast<double>(j + 1) / cells;
        const double integral = m.shape == BvShape::Sawtooth
                                    ? 0.5 * (hi * hi - lo * lo) - 0.5 * (hi - lo)
                                    : piecewise_cell_integral(m.pieces, lo, hi);
        out.values[j] = height * integral;
    }
    return out;
}

const Basis& FieldSpec::native_basis() const { return impl_->basis; }
std::span<const cplx> FieldSpec::native_coefficients() const { return impl_->coeffs; }
BvShape FieldSpec::shape() const { return impl_->shape; }
std::span<const double> FieldSpec::shape_params() const { return impl_->params; }
double FieldSpec::sobolev_s() const { return impl_->s; }
std::uint64_t FieldSpec::sobolev_seed() const { return impl_->seed; }

std::string FieldSpec::describe() const {
    const Impl& m = *impl_;
    std::ostringstream os;
    switch (m.cls) {
    case FieldClass::FiniteDim:
        os << "finite_dim(" << m.basis.name() << ", k=" << m.coeffs.size() << ")";
        break;
    case FieldClass::BoundedVariation:
        os << "bv(" << (m.shape == BvShape::Step ? "step" : m.shape == BvShape::Sawtooth ? "sawtooth" : "staircase")
           << ")";
        break;
    case FieldClass::Sobolev:
        os << "sobolev(s=" << m.s << ", seed=" << m.seed << ")";
        break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// coefficient operations

CoefficientVector true_coefficients(const FieldSpec& field, const Basis& basis, std::size_t count,
                                    CoefficientMethod method) {
    if (count == 0) throw std::invalid_argument("true_coefficients: count must be at least 1");
    if (method == CoefficientMethod::Auto) {
        if (auto closed = field.closed_form_coefficients(basis, count)) return *std::move(closed);
    }

    CoefficientVector out;
    out.basis = basis.kind();
    out.values.resize(count);
    auto breaks = field.panel_breaks();
    const auto basis_breaks = basis.breakpoints(count);
    breaks.insert(breaks.end(), basis_breaks.begin(), basis_breaks.end());
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    QuadratureOptions opt;
    opt.abs_tol = 1e-10;
    for (std::size_t j = 0; j < count; ++j) {
        if (!basis.contains(j)) break;
        auto integrand = [&](double x) { return field.eval(x) * std::conj(basis.eval(j, x)); };
        out.values[j] = integrate_panels<cplx>(integrand, breaks, opt).value;
    }
    return out;
}

cplx m_term_approximation(const CoefficientVector& coeffs, const Basis& basis, std::size_t m, double x) {
    if (m > coeffs.size()) throw std::invalid_argument("m_term_approximation: m exceeds coefficient count");
    cplx sum{};
    for (std::size_t j = 0; j < m; ++j) sum += coeffs[j] * basis.eval(j, x);
    return sum;
}

double m_term_error(const CoefficientVector& coeffs, const FieldSpec& field, std::size_t m) {
    if (m > coeffs.size()) throw std::invalid_argument("m_term_error: m exceeds coefficient count");
    double captured = 0.0;
    for (std::size_t j = 0; j < m; ++j) captured += std::norm(coeffs[j]);
    return std::max(0.0, field.norm_sq() - captured);
}

double norm_sq_by_quadrature(const FieldSpec& field) {
    QuadratureOptions opt;
    opt.abs_tol = 1e-10;
    opt.max_intervals = 200000;
    const auto breaks = field.panel_breaks();
    auto sq = [&](double x) {
        const double v = field.eval(x);
        return v * v;
    };
    return integrate_panels<double>(sq, breaks, opt).value;
}

} // namespace binfield
