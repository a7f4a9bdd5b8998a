#include <CLI11.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "binfield/harness.hpp"

using namespace binfield;
using namespace binfield::harness;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kFdSlopeMin = -1.15, kFdSlopeMax = -0.85, kFdR2 = 0.98, kFdSeconds = 300.0;
constexpr double kBvSlopeMin = -0.65, kBvSlopeMax = -0.35, kBvR2 = 0.95;
constexpr double kSobSlopeMin = -0.82, kSobSlopeMax = -0.52, kSobR2 = 0.95;
constexpr double kDominanceCi = 3.0;
constexpr double kBandSigma = 4.0, kBandFraction = 0.95, kMaxSigma = 6.0;
constexpr double kVarianceFactor = 1.1;
constexpr double kLn3Tolerance = 1e-6;
constexpr double kTraceRatio = 0.3;
constexpr double kParsevalRel = 1e-6;
constexpr std::size_t kParsevalCases = 20;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') out.back() += '"', ++i;
            else if (ch == '"') quoted = false;
            else out.back() += ch;
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.emplace_back();
        } else {
            out.back() += ch;
        }
    }
    return out;
}

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::vector<std::map<std::string, std::string>> rows;
    if (!std::getline(in, line)) return rows;
    const auto header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

const ExperimentResult* find(const SuiteReport& r, const std::string& id) {
    for (const auto& e : r.results)
        if (e.experiment_id == id) return &e;
    return nullptr;
}

Outcome rate_criterion(const SuiteReport& rates, const std::string& id, double lo, double hi, double r2) {
    const auto* r = find(rates, id);
    if (!r || !r->fit) return {false, id + ": no fit"};
    const bool ok = r->fit->slope >= lo && r->fit->slope <= hi && r->fit->r_squared >= r2;
    return {ok, fmt("%s slope %.4f in [%.2f, %.2f], r^2 %.5f >= %.2f", id.c_str(), r->fit->slope, lo, hi,
                    r->fit->r_squared, r2)};
}

Outcome dominance(const SuiteReport& rates) {
    std::size_t violations = 0, points = 0;
    double worst = -INFINITY;
    for (const auto& r : rates.results) {
        for (std::size_t i = 0; i < r.points.size() && i < r.bounds.size(); ++i) {
            ++points;
            const double slack = r.points[i].mean - (r.bounds[i].total + kDominanceCi * r.points[i].ci_half_width());
            worst = std::max(worst, slack);
            if (slack > 0.0) ++violations;
        }
    }
    return {points > 0 && violations == 0,
            fmt("%zu violations over %zu points; max(mse - bound - 3 CI) = %.3g", violations, points, worst)};
}

std::pair<Outcome, Outcome> lemma1(const fs::path& csv) {
    const auto rows = read_csv(csv);
    std::size_t inside = 0, beyond_max = 0, var_bad = 0;
    double worst_z = 0.0, worst_ratio = 0.0;
    for (const auto& row : rows) {
        const double z = std::abs(std::stod(row.at("z")));
        const double ratio = std::stod(row.at("var_ratio"));
        worst_z = std::max(worst_z, z);
        worst_ratio = std::max(worst_ratio, ratio);
        if (z <= kBandSigma) ++inside;
        if (z > kMaxSigma) ++beyond_max;
        if (!(ratio <= kVarianceFactor)) ++var_bad;
    }
    const double frac = rows.empty() ? 0.0 : static_cast<double>(inside) / rows.size();
    Outcome band{!rows.empty() && frac >= kBandFraction && beyond_max == 0,
                 fmt("%zu/%zu cells within 4 sigma (%.4f >= %.2f), %zu beyond 6 sigma, max |z| %.3f", inside,
                     rows.size(), frac, kBandFraction, beyond_max, worst_z)};
    Outcome var{!rows.empty() && var_bad == 0,
                fmt("%zu/%zu cells above factor %.2f, max Var/bound %.4f", var_bad, rows.size(), kVarianceFactor,
                    worst_ratio)};
    return {band, var};
}

Outcome mismatch(const SuiteReport& cond) {
    const auto* r = find(cond, "mismatch_linear2x");
    const auto lin = basis_deployment_integral(Basis::fourier(), DeploymentDensity::linear2x(), 0);
    const auto aff = basis_deployment_integral(Basis::fourier(), DeploymentDensity::affine_floor(0.5), 0);
    const double err = std::abs(aff.value - std::log(3.0));
    const bool ok = r && r->status == Status::FailedPrecondition && lin.divergent && !aff.divergent &&
                    err <= kLn3Tolerance;
    return {ok, fmt("linear2x run %s, j=0 divergent=%d; affine floor integral %.15g (|err| %.2g)",
                    r ? to_string(r->status).c_str() : "missing", lin.divergent, aff.value, err)};
}

Outcome consistency() {
    const std::vector<std::size_t> grid = {100, 1000, 10000, 100000, 1000000};
    const auto u = DeploymentDensity::uniform();
    const auto power = check_consistency_conditions(Schedule::power(1.0), Basis::fourier(), u, grid);
    const auto bv = check_consistency_conditions(Schedule::bv(), Basis::fourier(), u, grid);
    const auto sob = check_consistency_conditions(Schedule::sobolev(1.0), Basis::fourier(), u, grid);
    const bool ok = !power.variance_sum_vanishing && bv.all_pass() && sob.all_pass();
    return {ok, fmt("power(1) variance-sum check %s; bv all=%d; sobolev(1) all=%d",
                    power.variance_sum_vanishing ? "passes" : "fails", bv.all_pass(), sob.all_pass())};
}

Outcome as_schedule() {
    const std::vector<FieldSpec> menu = {FieldSpec::zero(), FieldSpec::sawtooth(), FieldSpec::step(),
                                         FieldSpec::staircase(), make_sobolev_field(1.0, 7)};
    const auto good = validate_as_schedule(0.5, 1.5, Basis::fourier(), DeploymentDensity::uniform(), menu);
    const auto bad = validate_as_schedule(0.5, 2.5, Basis::fourier(), DeploymentDensity::uniform(), menu);
    const auto floor = validate_as_schedule(0.5, 1.5, Basis::fourier(), DeploymentDensity::affine_floor(0.5), menu);
    const bool c_ok = std::abs(good.c1 - 1.0) < 1e-12 && std::abs(floor.c1 - 2.0) < 1e-12 &&
                      std::abs(good.c2_per_unit_amplitude - 1.0) < 1e-12;
    const bool grid_ok = good.kernel_bound_ok && good.projection_bound_ok && floor.kernel_bound_ok &&
                         floor.projection_bound_ok;
    return {good.valid() && !bad.valid() && c_ok && grid_ok,
            fmt("(0.5,1.5) valid=%d; (0.5,2.5) valid=%d; C1 uniform %.3g, affine %.3g; C2/a %.3g; grid check %d",
                good.valid(), bad.valid(), good.c1, floor.c1, good.c2_per_unit_amplitude, grid_ok)};
}

Outcome traces(const SuiteReport& tr) {
    bool ok = true;
    std::string detail;
    for (const char* id : {"trace_zero", "trace_sawtooth"}) {
        const auto* r = find(tr, id);
        if (!r || !r->trace || r->trace->sup_error.size() < 2 || r->trace->n_checkpoints.front() != 1000 ||
            r->trace->n_checkpoints.back() != 1000000) {
            ok = false;
            detail += std::string(id) + ": missing; ";
            continue;
        }
        const double ratio = r->trace->sup_error.back() / r->trace->sup_error.front();
        ok = ok && ratio < kTraceRatio;
        detail += fmt("%s ratio %.4f; ", id, ratio);
    }
    return {ok, detail + fmt("threshold %.2f (single fixed-seed path)", kTraceRatio)};
}

Outcome parseval(std::uint64_t seed) {
    using boost::math::quadrature::gauss_kronrod;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (std::size_t c = 0; c < kParsevalCases; ++c) {
        FieldSpec f = c % 4 == 0 ? FieldSpec::sawtooth()
                    : c % 4 == 1 ? FieldSpec::step(0.2 + 0.6 * (u(rng) + 1.0) / 2.0, -0.5, 0.5)
                    : c % 4 == 2 ? FieldSpec::staircase()
                                 : make_sobolev_field(1.0 + (u(rng) + 1.0), rng());
        const std::size_t m = 1 + static_cast<std::size_t>((u(rng) + 1.0) * 12.0);
        const auto truth = true_coefficients(f, Basis::fourier(), m);
        ReconstructionCoefficients est;
        est.values.resize(m);
        for (std::size_t j = 0; j < m; ++j) est.values[j] = truth[j] + 0.05 * cplx(u(rng), u(rng));
        auto integrand = [&](double x) { return std::norm(reconstruct(est, Basis::fourier(), x) - f.eval(x)); };
        const auto breaks = f.panel_breaks();
        double direct = 0.0;
        for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
            direct += gauss_kronrod<double, 61>::integrate(integrand, breaks[i], breaks[i + 1], 30, 1e-13);
        const double ise = integrated_squared_error(est, truth, f);
        worst = std::max(worst, std::abs(ise - direct) / direct);
    }
    return {worst <= kParsevalRel, fmt("%zu cases, max relative difference %.3g <= %.0e", kParsevalCases, worst,
                                       kParsevalRel)};
}

std::vector<fs::path> csv_files(const fs::path& root) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), root));
    std::sort(out.begin(), out.end());
    return out;
}

Outcome determinism(const fs::path& first, const fs::path& second) {
    const auto a = csv_files(first), b = csv_files(second);
    if (a != b || a.empty()) return {false, fmt("file sets differ (%zu vs %zu)", a.size(), b.size())};
    std::size_t differing = 0;
    for (const auto& p : a)
        if (slurp(first / p) != slurp(second / p)) ++differing;
    return {differing == 0, fmt("%zu CSV files compared, %zu differ", a.size(), differing)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Runs every acceptance criterion and prints one PASS/FAIL line per criterion."};
    fs::path out = "acceptance_out";
    unsigned workers = 1;
    fs::path configs = BINFIELD_TEST_CONFIG_DIR;
    app.add_option("--out", out, "Output directory");
    app.add_option("--workers", workers, "Worker threads for the first pass")->check(CLI::Range(1u, 1024u));
    app.add_option("--configs", configs, "Configuration directory");
    CLI11_PARSE(app, argc, argv);

    fs::remove_all(out);
    RunOptions first;
    first.out_dir = out / "pass1";
    first.workers = workers;
    first.quiet = true;

    const auto t0 = std::chrono::steady_clock::now();
    const auto fd_only = load_config(configs / "finite_dim_k5.json");
    SuiteReport rates;
    rates.results.push_back(run_experiment(fd_only, first));
    const double fd_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const char* id : {"bv_sawtooth.json", "sobolev_s1.json"})
        rates.results.push_back(run_experiment(load_config(configs / id), first));
    const auto lemma = run_suite("lemma1", configs, first);
    const auto tr = run_suite("as_traces", configs, first);
    const auto cond = run_suite("conditions", configs, first);

    RunOptions second = first;
    second.out_dir = out / "pass2";
    second.workers = workers == 3 ? 1 : 3;
    run_suite("all", configs, second);

    std::vector<Outcome> results;
    auto fd = rate_criterion(rates, "finite_dim_k5", kFdSlopeMin, kFdSlopeMax, kFdR2);
    fd.pass = fd.pass && fd_seconds <= kFdSeconds;
    fd.detail += fmt(", %.1f s <= %.0f s", fd_seconds, kFdSeconds);
    results.push_back(fd);
    results.push_back(rate_criterion(rates, "bv_sawtooth", kBvSlopeMin, kBvSlopeMax, kBvR2));
    results.push_back(rate_criterion(rates, "sobolev_s1", kSobSlopeMin, kSobSlopeMax, kSobR2));
    results.push_back(dominance(rates));
    const auto [band, var] = lemma1(*first.out_dir / "lemma1.csv");
    results.push_back(band);
    results.push_back(var);
    results.push_back(mismatch(cond));
    results.push_back(consistency());
    results.push_back(as_schedule());
    results.push_back(traces(tr));
    results.push_back(parseval(20261019));
    results.push_back(determinism(*first.out_dir, *second.out_dir));

    bool all = true;
    for (std::size_t i = 0; i < results.size(); ++i) {
        std::printf("%s criterion %zu: %s\n", results[i].pass ? "PASS" : "FAIL", i + 1, results[i].detail.c_str());
        all = all && results[i].pass;
    }
    std::fflush(stdout);
    return all ? 0 : 1;
}
