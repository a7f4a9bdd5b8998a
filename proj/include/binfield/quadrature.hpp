#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace binfield {

/// Thrown when adaptive quadrature exhausts its interval budget before
/// reaching the requested tolerance.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(double achieved, double requested)
        : std::runtime_error("quadrature did not converge: achieved error estimate " +
                             std::to_string(achieved) + ", requested " +
                             std::to_string(requested)),
          achieved_(achieved), requested_(requested) {}

    double achieved_tolerance() const noexcept { return achieved_; }
    double requested_tolerance() const noexcept { return requested_; }

private:
    double achieved_;
    double requested_;
};

template <class T>
struct QuadratureResult {
    T value{};
    double error = 0.0;
    int intervals = 0;
};

struct QuadratureOptions {
    double abs_tol = 1e-10;
    double rel_tol = 0.0;
    int max_intervals = 20000;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const std::complex<double>& v) { return std::abs(v); }

template <class T, class F>
QuadratureResult<T> gauss_kronrod_15(const F& f, double a, double b) {
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const T fc = f(centre);
    T kronrod = fc * kKronrodWeights[7];
    T gauss = fc * kGaussWeights[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kKronrodNodes[j];
        const T sum = f(centre - dx) + f(centre + dx);
        kronrod += sum * kKronrodWeights[j];
        if (j % 2 == 1) gauss += sum * kGaussWeights[j / 2];
    }
    QuadratureResult<T> r;
    r.value = kronrod * half;
    r.error = magnitude((kronrod - gauss) * half);
    r.intervals = 1;
    return r;
}

} // namespace detail

/// Globally adaptive Gauss–Kronrod integration of f over the panels defined by
/// `breaks` (sorted, at least two entries). The interval with the largest error
/// estimate is bisected until the summed estimate meets max(abs_tol,
/// rel_tol*|I|). Integrand discontinuities belong in `breaks`.
template <class T, class F>
QuadratureResult<T> integrate_panels(const F& f, std::span<const double> breaks,
                                     const QuadratureOptions& opt = {}) {
    if (breaks.size() < 2) throw std::invalid_argument("integrate_panels: need at least two breakpoints");

    struct Piece {
        double a, b;
        QuadratureResult<T> r;
        bool operator<(const Piece& o) const { return r.error < o.r.error; }
    };
    std::priority_queue<Piece> heap;
    T total{};
    double total_err = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) {
            if (breaks[i + 1] == breaks[i]) continue;
            throw std::invalid_argument("integrate_panels: breakpoints must be increasing");
        }
        Piece p{breaks[i], breaks[i + 1], detail::gauss_kronrod_15<T>(f, breaks[i], breaks[i + 1])};
        total += p.r.value;
        total_err += p.r.error;
        heap.push(p);
    }

    int count = static_cast<int>(heap.size());
    auto target = [&] { return std::max(opt.abs_tol, opt.rel_tol * detail::magnitude(total)); };
    while (total_err > target()) {
        if (count >= opt.max_intervals || heap.empty()) throw QuadratureError(total_err, target());
        Piece worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) throw QuadratureError(total_err, target());
        heap.pop();
        Piece left{worst.a, mid, detail::gauss_kronrod_15<T>(f, worst.a, mid)};
        Piece right{mid, worst.b, detail::gauss_kronrod_15<T>(f, mid, worst.b)};
        total += left.r.value + right.r.value - worst.r.value;
        total_err += left.r.error + right.r.error - worst.r.error;
        heap.push(left);
        heap.push(right);
        ++count;
    }

    // Re-sum from the pieces; the running total drifts by round-off.
    QuadratureResult<T> out;
    out.intervals = count;
    out.error = 0.0;
    std::vector<Piece> pieces;
    pieces.reserve(heap.size());
    while (!heap.empty()) {
        pieces.push_back(heap.top());
        heap.pop();
    }
    std::sort(pieces.begin(), pieces.end(), [](const Piece& l, const Piece& r) { return l.a < r.a; });
    for (const auto& p : pieces) {
        out.value += p.r.value;
        out.error += p.r.error;
    }
    return out;
}

template <class T, class F>
QuadratureResult<T> integrate(const F& f, double a, double b, const QuadratureOptions& opt = {}) {
    const double breaks[2] = {a, b};
    return integrate_panels<T>(f, std::span<const double>(breaks, 2), opt);
}

} // namespace binfield
