#include <doctest.h>

#include <cmath>
#include <numbers>

#include "binfield/estimator.hpp"

using namespace binfield;

namespace {

/// Direct evaluation of the estimator sum, one term at a time.
std::vector<cplx> brute_force(const SensorBatch& batch, const Basis& basis, const DeploymentDensity& d, double c,
                              std::size_t m) {
    std::vector<cplx> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        cplx s{};
        for (std::size_t i = 0; i < batch.size(); ++i)
            s += std::conj(basis.eval(j, batch.x[i])) * static_cast<double>(batch.b[i]) / d.pdf(batch.x[i]);
        out[j] = c * s / static_cast<double>(batch.size());
    }
    return out;
}

} // namespace

TEST_CASE("single sensor") {
    SensorBatch batch;
    batch.x = {0.5};
    batch.y = {0.9};
    batch.t = {0.1};
    batch.b = {1};
    batch.c = 2.0;
    EstimatorConfig cfg;
    cfg.c = 2.0;
    const auto est = estimate_coefficients(batch, cfg, 1);
    CHECK(est.n_used == 1);
    CHECK(est.values[0].real() == doctest::Approx(2.0));
    CHECK(est.values[0].imag() == doctest::Approx(0.0));
}

TEST_CASE("zero field estimates are unbiased") {
    const std::size_t trials = 10000, n = 100;
    EstimatorConfig cfg;
    const auto zero = FieldSpec::zero();
    std::vector<double> re(4), im(4), sq(4);
    for (std::size_t t = 0; t < trials; ++t) {
        const auto batch =
            simulate_batch(zero, DeploymentDensity::uniform(), NoiseModel::zero(), n, 31, t);
        const auto est = estimate_coefficients(batch, cfg, 4);
        for (std::size_t j = 0; j < 4; ++j) {
            re[j] += est.values[j].real();
            im[j] += est.values[j].imag();
            sq[j] += std::norm(est.values[j]);
        }
    }
    for (std::size_t j = 0; j < 4; ++j) {
        const double var = sq[j] / trials;
        const double se = std::sqrt(var / trials);
        CHECK(std::abs(re[j] / trials) <= 4.0 * se);
        CHECK(std::abs(im[j] / trials) <= 4.0 * se);
    }
}

TEST_CASE("sawtooth coefficient is recovered at large n") {
    const auto f = FieldSpec::sawtooth();
    const auto nz = NoiseModel::uniform_sym(0.5);
    const auto batch = simulate_batch(f, DeploymentDensity::uniform(), nz, 100000, 1234);
    EstimatorConfig cfg;
    cfg.c = batch.c;
    const auto est = estimate_coefficients(batch, cfg, 3);
    const cplx truth = {0.0, -1.0 / (2.0 * std::numbers::pi)}; // frequency -1
    // |alpha_hat| variance is at most c^2 / n per coefficient.
    CHECK(std::abs(est.values[1] - truth) <= 4.0 * batch.c / std::sqrt(1e5));
}

TEST_CASE("estimator reads only locations and bits") {
    auto batch = simulate_batch(FieldSpec::staircase(), DeploymentDensity::affine_floor(0.4),
                                NoiseModel::trunc_gauss(0.2, 0.4), 3000, 3);
    EstimatorConfig cfg;
    cfg.deploy = DeploymentDensity::affine_floor(0.4);
    cfg.c = batch.c;
    const auto before = estimate_coefficients(batch, cfg, 16);
    for (auto& y : batch.y) y = 123.0;
    for (auto& t : batch.t) t = -7.0;
    const auto after = estimate_coefficients(batch, cfg, 16);
    CHECK(before.values == after.values);
}

TEST_CASE("fast path matches brute force") {
    for (const auto& d : {DeploymentDensity::uniform(), DeploymentDensity::affine_floor(0.2)}) {
        for (const Basis& basis : {Basis::fourier(), Basis::step_indicator(16)}) {
            const auto batch = simulate_batch(make_sobolev_field(1.5, 2), d, NoiseModel::two_point(0.3), 4099, 8);
            EstimatorConfig cfg;
            cfg.basis = basis;
            cfg.deploy = d;
            cfg.c = batch.c;
            const std::size_t m = basis.contains(600) ? 600 : 16;
            const auto fast = estimate_coefficients(batch, cfg, m);
            const auto slow = brute_force(batch, basis, d, batch.c, m);
            double worst = 0.0;
            for (std::size_t j = 0; j < m; ++j) worst = std::max(worst, std::abs(fast.values[j] - slow[j]));
            CHECK(worst < 1e-10);

            const auto prefix = estimate_coefficients_prefix(batch, cfg, 1000, m);
            SensorBatch head;
            head.x.assign(batch.x.begin(), batch.x.begin() + 1000);
            head.b.assign(batch.b.begin(), batch.b.begin() + 1000);
            const auto direct = estimate_coefficients(head.x, head.b, cfg, m);
            CHECK(prefix.n_used == 1000);
            for (std::size_t j = 0; j < m; ++j) CHECK(std::abs(prefix.values[j] - direct.values[j]) < 1e-12);
        }
    }
}

TEST_CASE("truncation schedules") {
    CHECK(truncation_schedule(Schedule::bv(), 10000) == 100);
    CHECK(truncation_schedule(Schedule::bv(), 10001) == 101);
    CHECK(truncation_schedule(Schedule::sobolev(1.0), 1000) == 10);
    CHECK(truncation_schedule(Schedule::finite_dim(5), 1000000) == 5);
    CHECK(truncation_schedule(Schedule::fixed(7), 3) == 7);
    CHECK(truncation_schedule(Schedule::power(0.5), 4) == 2);
    for (const auto& s : {Schedule::bv(), Schedule::sobolev(2.0), Schedule::power(0.3), Schedule::finite_dim(3)}) {
        std::size_t prev = 0;
        for (std::size_t n = 1; n <= 100000; n = n * 3 / 2 + 1) {
            const std::size_t m = truncation_schedule(s, n);
            CHECK(m >= prev);
            CHECK(m >= 1);
            prev = m;
        }
    }
}

TEST_CASE("coefficient magnitude bound c * beta / nu") {
    for (const auto& d : {DeploymentDensity::uniform(), DeploymentDensity::affine_floor(0.25)}) {
        for (const Basis& basis : {Basis::fourier(), Basis::step_indicator(8)}) {
            const auto batch = simulate_batch(FieldSpec::step(), d, NoiseModel::uniform_sym(1.0), 500, 12);
            EstimatorConfig cfg{basis, d, batch.c, Schedule::bv()};
            const auto est = estimate_coefficients(batch, cfg, 8);
            const double cap = batch.c * basis.bound() / d.infimum();
            for (const auto& v : est.values) CHECK(std::abs(v) <= cap * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("density vanishing at a sensor location") {
    EstimatorConfig cfg;
    cfg.deploy = DeploymentDensity::linear2x();
    const std::vector<double> x = {0.3, 0.0};
    const std::vector<std::int8_t> b = {1, -1};
    CHECK_THROWS_AS(estimate_coefficients(x, b, cfg, 2), DensityError);
}

TEST_CASE("reconstruction") {
    ReconstructionCoefficients c;
    c.values = {0.0, 0.5, 0.5};
    c.n_used = 1;
    CHECK(reconstruct(c, Basis::fourier(), 0.0).real() == doctest::Approx(1.0));
    CHECK(std::abs(reconstruct(c, Basis::fourier(), 0.5) - cplx(-1.0, 0.0)) < 1e-12);
    const std::vector<double> xs = {0.0, 0.125, 0.25, 0.7};
    const auto many = reconstruct_many(c, Basis::fourier(), xs);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::abs(many[i] - reconstruct(c, Basis::fourier(), xs[i])) < 1e-12);

    ReconstructionCoefficients s;
    s.values = {1.0, -2.0};
    CHECK(reconstruct(s, Basis::step_indicator(2), 0.2).real() == doctest::Approx(std::sqrt(2.0)));
    CHECK(reconstruct(s, Basis::step_indicator(2), 0.7).real() == doctest::Approx(-2.0 * std::sqrt(2.0)));
}

TEST_CASE("single-path consistency of the first coefficients") {
    const auto f = FieldSpec::staircase();
    const auto truth = true_coefficients(f, Basis::fourier(), 4);
    SensorStream stream(f, DeploymentDensity::uniform(), NoiseModel::uniform_sym(0.25), 555);
    EstimatorConfig cfg;
    cfg.c = stream.dynamic_range();
    SensorBatch batch;
    std::vector<double> errs;
    for (std::size_t n : {1000u, 10000u, 100000u, 1000000u}) {
        stream.extend(batch, n);
        const auto est = estimate_coefficients(batch, cfg, 4);
        double e = 0.0;
        for (std::size_t j = 0; j < 4; ++j) e = std::max(e, std::abs(est.values[j] - truth[j]));
        errs.push_back(e);
    }
    CHECK(errs.back() < 0.01);
    CHECK(errs.back() < errs.front());
}
