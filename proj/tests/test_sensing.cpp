#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "binfield/quadrature.hpp"
#include "binfield/sensing.hpp"

using namespace binfield;

namespace {

std::vector<DeploymentDensity> densities() {
    return {DeploymentDensity::uniform(), DeploymentDensity::linear2x(), DeploymentDensity::affine_floor(0.5),
            DeploymentDensity::affine_floor(0.1),
            DeploymentDensity::custom([](double x) { return 0.2 + std::sin(3.0 * x) * std::sin(3.0 * x); })};
}

double ks_distance(const DeploymentDensity& d, std::size_t n, std::uint64_t seed) {
    RandomStream rng(seed, 0, StreamLabel::Locations);
    std::vector<double> xs(n);
    for (auto& x : xs) x = d.sample(rng);
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double F = d.cdf(xs[i]);
        ks = std::max({ks, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n)});
    }
    return ks;
}

} // namespace

TEST_CASE("deployment densities integrate to one and sample correctly") {
    for (const auto& d : densities()) {
        CAPTURE(d.name());
        const auto br = d.breakpoints();
        const auto r = integrate_panels<double>([&](double x) { return d.pdf(x); }, br, {1e-12, 0.0, 200000});
        CHECK(r.value == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(ks_distance(d, 100000, 17) < 0.01);

        double grid_min = INFINITY;
        for (std::size_t i = 0; i <= 1000000; ++i) grid_min = std::min(grid_min, d.pdf(i / 1e6));
        CHECK(std::abs(grid_min - d.infimum()) <= 1e-6);
    }
    CHECK(DeploymentDensity::affine_floor(0.5).pdf(0.5) == doctest::Approx(1.0));
    CHECK_THROWS_AS(DeploymentDensity::affine_floor(0.0), std::invalid_argument);
}

TEST_CASE("noise models are bounded and zero-mean") {
    for (const auto& nz : {NoiseModel::zero(), NoiseModel::uniform_sym(0.7), NoiseModel::trunc_gauss(0.5, 1.0),
                           NoiseModel::two_point(0.3)}) {
        CAPTURE(nz.name());
        RandomStream rng(5, 0, StreamLabel::Noise);
        const std::size_t n = 1000000;
        double sum = 0.0;
        bool bounded = true;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = nz.sample(rng);
            bounded = bounded && std::abs(z) <= nz.bound();
            sum += z;
        }
        CHECK(bounded);
        CHECK(std::abs(sum / n) <= 4.0 * nz.bound() / std::sqrt(static_cast<double>(n)) + 1e-300);
    }
}

TEST_CASE("quantizer tie rule and dominance") {
    CHECK(quantize_one(0.5, 0.5) == -1);
    CHECK(quantize_one(1.0, 0.999) == +1);
    CHECK(quantize_one(-1.0, -1.0) == -1);
}

TEST_CASE("dithered bits are unbiased for y / c") {
    RandomStream rng(8, 0, StreamLabel::Thresholds);
    const std::size_t n = 1000000;
    const double c = 1.0, y = 0.3;
    long sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += quantize_one(y, c * (2.0 * rng.uniform() - 1.0));
    const double mean = static_cast<double>(sum) / n;
    const double sigma = std::sqrt((1.0 - y * y) / n);
    CHECK(std::abs(mean - y / c) <= 4.0 * sigma);
}

TEST_CASE("batch invariants and boundary field") {
    const auto f = FieldSpec::step(0.4, -0.3, 0.8);
    const auto nz = NoiseModel::uniform_sym(0.2);
    const auto batch = simulate_batch(f, DeploymentDensity::affine_floor(0.3), nz, 20000, 99);
    CHECK(batch.c == doctest::Approx(1.0));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        CHECK(std::abs(batch.y[i]) <= batch.c);
        CHECK(std::abs(batch.t[i]) <= batch.c);
        CHECK(batch.b[i] == (batch.y[i] > batch.t[i] ? 1 : -1));
        CHECK(batch.x[i] >= 0.0);
        CHECK(batch.x[i] <= 1.0);
    }

    // Constant field at its amplitude bound with no noise: c = a, so every bit is +1.
    const auto top = FieldSpec::finite_dim(Basis::fourier(), {1.0}, 1.0);
    const auto all_up = simulate_batch(top, DeploymentDensity::uniform(), NoiseModel::zero(), 10000, 4);
    CHECK(std::all_of(all_up.b.begin(), all_up.b.end(), [](auto b) { return b == 1; }));
}

TEST_CASE("zero field gives balanced bits") {
    const auto batch = simulate_batch(FieldSpec::zero(1.0), DeploymentDensity::uniform(), NoiseModel::zero(),
                                      1000000, 2024);
    double s = 0.0;
    for (auto b : batch.b) s += b;
    CHECK(std::abs(s / batch.size()) <= 0.004);
}

TEST_CASE("determinism and nested extension") {
    const auto f = FieldSpec::sawtooth();
    const auto nz = NoiseModel::trunc_gauss(0.3, 0.5);
    const auto a = simulate_batch(f, DeploymentDensity::uniform(), nz, 5000, 77, 3);
    const auto b = simulate_batch(f, DeploymentDensity::uniform(), nz, 5000, 77, 3);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.t == b.t);
    CHECK(a.b == b.b);
    const auto other = simulate_batch(f, DeploymentDensity::uniform(), nz, 5000, 77, 4);
    CHECK(a.x != other.x);

    SensorStream stream(f, DeploymentDensity::uniform(), nz, 77, 3);
    SensorBatch nested;
    stream.extend(nested, 1000);
    stream.extend(nested, 5000);
    CHECK(nested.x == a.x);
    CHECK(nested.b == a.b);
}

TEST_CASE("CSV dump") {
    const auto batch = simulate_batch(FieldSpec::zero(), DeploymentDensity::uniform(), NoiseModel::zero(), 3, 1);
    std::ostringstream os;
    write_batch_csv(batch, os);
    const std::string s = os.str();
    CHECK(s.rfind("i,x,y,t,b\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 4);
}
