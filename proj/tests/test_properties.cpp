#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "binfield/analysis.hpp"
#include "binfield/trig.hpp"

using namespace binfield;

namespace {

/// Small generator toolkit; every case is reproducible from its seed.
struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    std::size_t index(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); }
    bool coin() { return index(0, 1) == 1; }

    FieldSpec fourier_field() {
        const std::size_t k = 2 * index(0, 12) + 1;
        std::vector<cplx> c(k);
        c[0] = uniform(-0.5, 0.5);
        for (std::size_t f = 1; 2 * f < k; ++f) {
            const cplx v(uniform(-1.0, 1.0), uniform(-1.0, 1.0));
            c[2 * f] = v / static_cast<double>(f);
            c[2 * f - 1] = std::conj(c[2 * f]);
        }
        double l1 = 0.0;
        for (const auto& v : c) l1 += std::abs(v);
        const double a = uniform(0.2, 3.0);
        for (auto& v : c) v *= a / std::max(l1, 1e-12);
        return FieldSpec::finite_dim(Basis::fourier(), c, a);
    }

    FieldSpec any_field() {
        switch (index(0, 4)) {
        case 0: return fourier_field();
        case 1: return FieldSpec::step(uniform(0.2, 0.8), uniform(-1.0, -0.2), uniform(0.2, 1.0));
        case 2: return FieldSpec::sawtooth();
        case 3: return FieldSpec::staircase({uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), 0.5});
        default: return make_sobolev_field(uniform(1.2, 2.5), rng(), uniform(0.5, 2.0));
        }
    }

    DeploymentDensity density() {
        switch (index(0, 2)) {
        case 0: return DeploymentDensity::uniform();
        case 1: return DeploymentDensity::affine_floor(uniform(0.05, 1.0));
        default: {
            const double w = uniform(1.0, 9.0), floor = uniform(0.05, 1.0);
            return DeploymentDensity::custom([=](double x) { return floor + std::cos(w * x) * std::cos(w * x); });
        }
        }
    }

    NoiseModel noise() {
        const double b = uniform(0.0, 1.0);
        switch (index(0, 3)) {
        case 0: return NoiseModel::zero();
        case 1: return NoiseModel::uniform_sym(b + 1e-3);
        case 2: return NoiseModel::trunc_gauss(uniform(0.05, 1.0), b + 1e-3);
        default: return NoiseModel::two_point(b + 1e-3);
        }
    }
};

template <class Prop>
void for_all(std::size_t cases, std::uint64_t base_seed, Prop&& prop) {
    for (std::size_t i = 0; i < cases; ++i) {
        const std::uint64_t seed = base_seed + 7919 * i;
        CAPTURE(seed);
        Gen g(seed);
        prop(g);
    }
}

} // namespace

TEST_CASE("property: Parseval energy matches quadrature") {
    for_all(40, 1, [](Gen& g) {
        const auto f = g.any_field();
        CAPTURE(f.describe());
        CHECK(f.norm_sq() == doctest::Approx(norm_sq_by_quadrature(f)).epsilon(1e-8));
    });
}

TEST_CASE("property: fast synthesis equals direct summation") {
    for_all(30, 2, [](Gen& g) {
        const std::size_t m = g.index(1, 1500);
        std::vector<cplx> c(m);
        for (auto& v : c) v = {g.uniform(-1, 1), g.uniform(-1, 1)};
        std::vector<double> xs(g.index(1, 40));
        for (auto& x : xs) x = g.uniform(0.0, 1.0);
        std::vector<cplx> out(xs.size());
        fourier_synthesis(c, xs, out);
        const Basis b = Basis::fourier();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            cplx direct{};
            for (std::size_t j = 0; j < m; ++j) direct += c[j] * b.eval(j, xs[i]);
            CHECK(std::abs(out[i] - direct) <= 1e-11 * std::sqrt(static_cast<double>(m)));
        }
    });
}

TEST_CASE("property: sensing invariants") {
    for_all(25, 3, [](Gen& g) {
        const auto f = g.any_field();
        const auto nz = g.noise();
        const auto d = g.density();
        const auto batch = simulate_batch(f, d, nz, g.index(1, 3000), g.rng());
        CHECK(batch.c == doctest::Approx(f.amplitude_bound() + nz.bound()));
        bool ok = true;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            ok = ok && batch.x[i] >= 0.0 && batch.x[i] <= 1.0 && std::abs(batch.y[i]) <= batch.c * (1 + 1e-12) &&
                 std::abs(batch.t[i]) <= batch.c && batch.b[i] == quantize_one(batch.y[i], batch.t[i]);
        }
        CHECK(ok);
    });
}

TEST_CASE("property: density sampling inverts the CDF") {
    for_all(25, 4, [](Gen& g) {
        const auto d = g.density();
        CAPTURE(d.name());
        double prev = 0.0;
        for (int i = 0; i <= 50; ++i) {
            const double u = g.uniform(0.0, 1.0);
            const double x = d.sample_from_uniform(u);
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
            CHECK(d.cdf(x) == doctest::Approx(u).epsilon(1e-9).scale(1.0));
            const double c = d.cdf(i / 50.0);
            CHECK(c >= prev - 1e-15);
            prev = c;
        }
        CHECK(d.cdf(1.0) == doctest::Approx(1.0));
    });
}

TEST_CASE("property: estimator is linear in the bits") {
    for_all(20, 5, [](Gen& g) {
        const auto d = g.density();
        auto batch = simulate_batch(g.any_field(), d, g.noise(), g.index(10, 2000), g.rng());
        EstimatorConfig cfg;
        cfg.deploy = d;
        cfg.c = batch.c;
        const std::size_t m = g.index(1, 64);
        const auto est = estimate_coefficients(batch, cfg, m);
        for (auto& b : batch.b) b = static_cast<std::int8_t>(-b);
        const auto flipped = estimate_coefficients(batch, cfg, m);
        for (std::size_t j = 0; j < m; ++j) CHECK(std::abs(est.values[j] + flipped.values[j]) < 1e-12);
    });
}

TEST_CASE("property: estimator variance respects the per-coefficient bound") {
    for_all(6, 6, [](Gen& g) {
        const auto f = g.any_field();
        const auto d = g.density();
        const auto nz = g.noise();
        const std::size_t n = 200, trials = 400, m = 6;
        const std::uint64_t seed = g.rng();
        EstimatorConfig cfg;
        cfg.deploy = d;
        cfg.c = f.amplitude_bound() + nz.bound();
        std::vector<cplx> sum(m);
        std::vector<double> sq(m);
        for (std::size_t t = 0; t < trials; ++t) {
            const auto est = estimate_coefficients(simulate_batch(f, d, nz, n, seed, t), cfg, m);
            for (std::size_t j = 0; j < m; ++j) {
                sum[j] += est.values[j];
                sq[j] += std::norm(est.values[j]);
            }
        }
        for (std::size_t j = 0; j < m; ++j) {
            const cplx mean = sum[j] / static_cast<double>(trials);
            const double var = (sq[j] - trials * std::norm(mean)) / (trials - 1);
            const double bound = cfg.c * cfg.c / n * basis_deployment_integral(Basis::fourier(), d, j).value;
            CHECK(var <= (1.0 + 5.0 / std::sqrt(static_cast<double>(trials))) * bound);
        }
    });
}

TEST_CASE("property: bound ordering and m-term monotonicity") {
    for_all(25, 7, [](Gen& g) {
        const auto f = g.any_field();
        const auto d = g.density();
        const std::size_t n = g.index(10, 1000000), m = g.index(0, 200);
        const double c = f.amplitude_bound() + g.uniform(0.0, 1.0);
        const auto r = mse_upper_bound(f, Basis::fourier(), d, n, m, c);
        CHECK(r.total <= r.reduced_total * (1.0 + 1e-9) + 1e-15);
        CHECK(r.total == doctest::Approx(r.variance_term + r.bias_term));

        const auto coeffs = true_coefficients(f, Basis::fourier(), 256);
        double prev = INFINITY;
        for (std::size_t k = 0; k <= 256; k += g.index(1, 40)) {
            const double e = m_term_error(coeffs, f, k);
            CHECK(e >= 0.0);
            CHECK(e <= prev + 1e-16);
            prev = e;
        }
    });
}

TEST_CASE("property: schedules are non-decreasing and unbounded") {
    for_all(30, 8, [](Gen& g) {
        const Schedule s = g.coin() ? Schedule::power(g.uniform(0.05, 0.95)) : Schedule::sobolev(g.uniform(0.6, 4.0));
        std::size_t prev = 0;
        for (std::size_t n = 1; n < (1u << 30); n = n * 2 + g.index(0, 5)) {
            const std::size_t m = truncation_schedule(s, n);
            CHECK(m >= prev);
            prev = m;
        }
        CHECK(prev > truncation_schedule(s, 10));
    });
}

TEST_CASE("property: fields whose tail escapes the coefficient budget are refused") {
    for_all(10, 9, [](Gen& g) {
        const double low = g.uniform(-1.0, -0.9), at = g.uniform(0.01, 0.02);
        CHECK_THROWS_AS(FieldSpec::step(at, low, 0.0), std::invalid_argument);
    });
}
