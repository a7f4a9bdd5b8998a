#include "binfield/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "binfield/quadrature.hpp"
#include "binfield/trig.hpp"

namespace binfield {

namespace {

std::vector<double> merged_breaks(std::vector<double> a, const std::vector<double>& b, double lo, double hi) {
    a.insert(a.end(), b.begin(), b.end());
    a.push_back(lo);
    a.push_back(hi);
    std::vector<double> out;
    for (double v : a)
        if (v >= lo && v <= hi) out.push_back(v);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Decade-graded panels on [lo, 1] so endpoint singularities near 0 get
// resolved without exhausting the interval budget.
std::vector<double> graded_breaks(double lo) {
    std::vector<double> out;
    for (double edge = lo; edge < 1.0; edge *= 10.0) out.push_back(edge);
    out.push_back(1.0);
    return out;
}

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

} // namespace

// ---------------------------------------------------------------------------
// integrals and bounds

IntegralValue basis_deployment_integral(const Basis& basis, const DeploymentDensity& deploy, std::size_t j) {
    if (!basis.contains(j)) throw std::invalid_argument("basis_deployment_integral: index beyond basis size");
    auto integrand = [&](double x) {
        const double mod2 = std::norm(basis.eval(j, x));
        if (mod2 == 0.0) return 0.0;
        return mod2 / deploy.pdf(x);
    };
    QuadratureOptions opt;
    opt.abs_tol = 1e-12;
    opt.rel_tol = 1e-13;
    opt.max_intervals = 100000;
    const auto basis_breaks = basis.breakpoints(j + 1);

    IntegralValue out;
    if (deploy.infimum() > 0.0) {
        const auto breaks = merged_breaks(basis_breaks, deploy.breakpoints(), 0.0, 1.0);
        out.value = integrate_panels<double>(integrand, breaks, opt).value;
        return out;
    }

    if (deploy.kind() == DensityKind::Custom) {
        // Piecewise-constant density: a zero cell under the support of phi_j
        // makes the integrand infinite on a set of positive measure.
        const auto cells = deploy.cell_density();
        const std::size_t count = cells.size();
        for (std::size_t i = 0; i < count; ++i) {
            if (cells[i] > 0.0) continue;
            const double mid = (i + 0.5) / count;
            if (std::norm(basis.eval(j, mid)) > 0.0) {
                out.value = kInfinity;
                out.divergent = true;
                return out;
            }
        }
        auto safe = [&](double x) {
            const double mod2 = std::norm(basis.eval(j, x));
            const double p = deploy.pdf(x);
            return (mod2 == 0.0 || p == 0.0) ? 0.0 : mod2 / p;
        };
        const auto breaks = merged_breaks(basis_breaks, deploy.breakpoints(), 0.0, 1.0);
        out.value = integrate_panels<double>(safe, breaks, opt).value;
        return out;
    }

    // Density vanishing at x = 0: escalate the lower limit and watch growth.
    for (double delta : {1e-3, 1e-6, 1e-9}) {
        const auto breaks = merged_breaks(graded_breaks(delta), basis_breaks, delta, 1.0);
        out.probes.push_back(integrate_panels<double>(integrand, breaks, opt).value);
    }
    const double i1 = out.probes[0], i2 = out.probes[1], i3 = out.probes[2];
    const bool power_blowup = i3 > 1e3 && i3 > 10.0 * i2;
    const double d1 = i2 - i1, d2 = i3 - i2;
    const bool log_blowup = d2 > 1e-9 * std::max(1.0, std::abs(i3)) && d2 >= 0.9 * d1;
    if (power_blowup || log_blowup) {
        out.value = kInfinity;
        out.divergent = true;
        return out;
    }
    const auto breaks = merged_breaks(graded_breaks(1e-15), basis_breaks, 0.0, 1.0);
    out.value = integrate_panels<double>(integrand, breaks, opt).value;
    return out;
}

namespace {

std::vector<IntegralValue> integrals_up_to(const Basis& basis, const DeploymentDensity& deploy, std::size_t m) {
    std::vector<IntegralValue> out;
    out.reserve(m);
    if (basis.has_unit_modulus() && m > 0) {
        const auto first = basis_deployment_integral(basis, deploy, 0);
        out.assign(m, first);
        return out;
    }
    for (std::size_t j = 0; j < m; ++j) out.push_back(basis_deployment_integral(basis, deploy, j));
    return out;
}

} // namespace

BoundReport mse_upper_bound(const FieldSpec& field, const CoefficientVector& true_coeffs, const Basis& basis,
                            const DeploymentDensity& deploy, std::size_t n, std::size_t m, double c) {
    if (n == 0) throw std::invalid_argument("mse_upper_bound: n must be at least 1");
    BoundReport r;
    r.bias_term = m_term_error(true_coeffs, field, m);
    const auto integrals = integrals_up_to(basis, deploy, m);
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        r.per_j_integrals.push_back(integrals[j].value);
        if (integrals[j].divergent) r.divergent_j.push_back(j);
        sum += integrals[j].value;
    }
    const double nd = static_cast<double>(n);
    r.variance_term = r.divergent() ? kInfinity : c * c / nd * sum;
    r.total = r.variance_term + r.bias_term;
    const double nu = deploy.infimum();
    if (m == 0)
        r.reduced_total = r.bias_term;
    else
        r.reduced_total = nu > 0.0 ? c * c * static_cast<double>(m) / (nd * nu) + r.bias_term : kInfinity;
    return r;
}

BoundReport mse_upper_bound(const FieldSpec& field, const Basis& basis, const DeploymentDensity& deploy,
                            std::size_t n, std::size_t m, double c) {
    const auto coeffs = true_coefficients(field, basis, std::max<std::size_t>(m, 1));
    return mse_upper_bound(field, coeffs, basis, deploy, n, m, c);
}

ConsistencyReport check_consistency_conditions(const Schedule& schedule, const Basis& basis,
                                               const DeploymentDensity& deploy, std::span<const std::size_t> n_grid) {
    if (n_grid.size() < 2) throw std::invalid_argument("check_consistency_conditions: need at least two grid points");
    for (std::size_t i = 1; i < n_grid.size(); ++i)
        if (n_grid[i] <= n_grid[i - 1]) throw std::invalid_argument("check_consistency_conditions: n_grid must increase");

    ConsistencyReport r;
    r.n_grid.assign(n_grid.begin(), n_grid.end());
    for (std::size_t n : n_grid) r.m_values.push_back(truncation_schedule(schedule, n));

    bool non_decreasing = true;
    for (std::size_t i = 1; i < r.m_values.size(); ++i)
        if (r.m_values[i] < r.m_values[i - 1]) non_decreasing = false;
    r.m_unbounded = non_decreasing && r.m_values.back() > r.m_values.front();
    r.positive_infimum = deploy.infimum() > 0.0;

    const std::size_t cap = basis.size() == 0 ? r.m_values.back() : std::min(basis.size(), r.m_values.back());
    if (basis.size() != 0 && r.m_values.back() > basis.size()) {
        r.m_unbounded = false;
        r.note = "schedule exceeds the size of the basis";
    }
    const auto integrals = integrals_up_to(basis, deploy, basis.has_unit_modulus() ? 1 : cap);
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        const std::size_t m = std::min(r.m_values[i], cap);
        double sum = 0.0;
        bool divergent = false;
        if (basis.has_unit_modulus()) {
            divergent = integrals[0].divergent;
            sum = integrals[0].value * static_cast<double>(m);
        } else {
            for (std::size_t j = 0; j < m; ++j) {
                divergent = divergent || integrals[j].divergent;
                sum += integrals[j].value;
            }
        }
        r.variance_sums.push_back(divergent ? kInfinity : sum / static_cast<double>(n_grid[i]));
    }
    bool decreasing = std::isfinite(r.variance_sums.front());
    for (std::size_t i = 1; i < r.variance_sums.size(); ++i)
        if (!(r.variance_sums[i] < r.variance_sums[i - 1])) decreasing = false;
    r.variance_sum_vanishing = decreasing;
    return r;
}

double integrated_squared_error(const ReconstructionCoefficients& estimate, const CoefficientVector& true_coeffs,
                                const FieldSpec& field) {
    const std::size_t m = estimate.size();
    if (true_coeffs.size() < m) throw std::invalid_argument("integrated_squared_error: too few true coefficients");
    double variance = 0.0, captured = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        variance += std::norm(estimate.values[j] - true_coeffs[j]);
        captured += std::norm(true_coeffs[j]);
    }
    return variance + std::max(0.0, field.norm_sq() - captured);
}

// ---------------------------------------------------------------------------
// Monte Carlo

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& job) {
    workers = std::max(1u, workers);
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, count); ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = count;
                    return;
                }
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

std::vector<MsePoint> monte_carlo_mse(const FieldSpec& field, const DeploymentDensity& deploy,
                                      const NoiseModel& noise, const EstimatorConfig& cfg,
                                      const MonteCarloSpec& spec) {
    if (spec.trials.size() != spec.n_grid.size())
        throw std::invalid_argument("monte_carlo_mse: trials must have one entry per grid point");
    const double c = field.amplitude_bound() + noise.bound();
    if (std::abs(cfg.c - c) > 1e-12 * std::max(1.0, c))
        throw std::invalid_argument("monte_carlo_mse: estimator c differs from a + b");

    std::size_t max_m = 1;
    for (std::size_t n : spec.n_grid) max_m = std::max(max_m, truncation_schedule(cfg.schedule, n));
    const auto truth = true_coefficients(field, cfg.basis, max_m);

    std::vector<MsePoint> out;
    for (std::size_t g = 0; g < spec.n_grid.size(); ++g) {
        const std::size_t n = spec.n_grid[g];
        const std::size_t trials = spec.trials[g];
        if (trials < 2) throw std::invalid_argument("monte_carlo_mse: need at least two trials");
        const std::size_t m = truncation_schedule(cfg.schedule, n);

        std::vector<double> errors(trials);
        parallel_for(trials, spec.workers, [&](std::size_t t) {
            SensorStream stream(field, deploy, noise, spec.seed, (static_cast<std::uint64_t>(g) << 32) | t);
            const SensorBatch batch = stream.draw(n);
            const auto estimate = estimate_coefficients(batch, cfg, m);
            errors[t] = integrated_squared_error(estimate, truth, field);
        });

        MsePoint p;
        p.n = n;
        p.m = m;
        p.trials = trials;
        const double td = static_cast<double>(trials);
        p.mean = pairwise_sum(errors) / td;
        std::vector<double> dev(trials);
        for (std::size_t t = 0; t < trials; ++t) dev[t] = (errors[t] - p.mean) * (errors[t] - p.mean);
        p.std_dev = std::sqrt(pairwise_sum(dev) / (td - 1.0));
        const double half = 1.959963984540054 * p.std_dev / std::sqrt(td);
        p.ci_lo = p.mean - half;
        p.ci_hi = p.mean + half;
        out.push_back(p);
    }
    return out;
}

RateFitResult rate_fit(std::span<const double> n_grid, std::span<const double> mse_values) {
    if (n_grid.size() != mse_values.size()) throw std::invalid_argument("rate_fit: length mismatch");
    if (n_grid.size() < 4) throw std::invalid_argument("rate_fit: need at least four points");
    RateFitResult r;
    r.n_grid.assign(n_grid.begin(), n_grid.end());
    r.mse_values.assign(mse_values.begin(), mse_values.end());
    const std::size_t k = n_grid.size();
    std::vector<double> lx(k), ly(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (!(n_grid[i] > 0.0)) throw std::invalid_argument("rate_fit: n must be positive");
        if (!(mse_values[i] > 0.0)) throw std::invalid_argument("rate_fit: MSE values must be positive");
        lx[i] = std::log(n_grid[i]);
        ly[i] = std::log(mse_values[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / k;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / k;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("rate_fit: n values must not all be equal");
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double e = ly[i] - (r.intercept + r.slope * lx[i]);
        ss_res += e * e;
    }
    r.r_squared = syy > 1e-300 ? 1.0 - ss_res / syy : 1.0;
    return r;
}

// ---------------------------------------------------------------------------
// almost-sure convergence machinery

ScheduleValidation validate_as_schedule(double psi, double gamma, const Basis& basis,
                                        const DeploymentDensity& deploy, std::span<const FieldSpec> fields,
                                        std::span<const std::size_t> m_grid, std::size_t grid_points) {
    if (!(psi > 0.0 && psi < 1.0)) throw std::invalid_argument("validate_as_schedule: psi must lie in (0,1)");
    ScheduleValidation v;
    v.psi = psi;
    v.gamma = gamma;
    v.psi_prime = gamma * psi;
    v.gamma_in_range = gamma > 1.0 && v.psi_prime < 1.0;
    v.summability_ok = v.psi_prime > 0.0 && v.psi_prime < 1.0;
    {
        // log(e^t q(e^t) / q(t)) for q(t) = exp(-eps^2 t^{1-psi'}).
        const double t = 200.0, eps2 = 0.01;
        const double expo = 1.0 - v.psi_prime;
        v.ermakoff_log_ratio = t - eps2 * std::exp(t * expo) + eps2 * std::pow(t, expo);
    }
    v.uniformly_bounded = basis.is_uniformly_bounded();
    v.beta = basis.bound();
    const double nu = deploy.infimum();
    v.c1 = nu > 0.0 ? v.beta * v.beta / nu : kInfinity;
    v.c2_per_unit_amplitude = v.beta * 1.0; // sqrt(vol [0,1]) = 1
    v.linear_lambda_summable = 2.0 * psi < 1.0;

    if (m_grid.empty()) {
        for (std::size_t m = 2; m <= 256; m *= 2) v.m_grid.push_back(m);
    } else {
        v.m_grid.assign(m_grid.begin(), m_grid.end());
    }
    std::size_t max_m = *std::max_element(v.m_grid.begin(), v.m_grid.end());
    if (basis.size() != 0) {
        max_m = std::min(max_m, basis.size());
        std::erase_if(v.m_grid, [&](std::size_t m) { return m > basis.size(); });
    }

    std::vector<double> grid(grid_points);
    for (std::size_t i = 0; i < grid_points; ++i) grid[i] = static_cast<double>(i) / (grid_points - 1);
    // phi table: phi[j * grid_points + i] = phi_j(grid[i])
    std::vector<cplx> phi(max_m * grid_points);
    for (std::size_t j = 0; j < max_m; ++j)
        for (std::size_t i = 0; i < grid_points; ++i) phi[j * grid_points + i] = basis.eval(j, grid[i]);
    std::vector<double> inv_p(grid_points);
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double p = deploy.pdf(grid[i]);
        inv_p[i] = p > 0.0 ? 1.0 / p : kInfinity;
    }

    std::vector<CoefficientVector> truths;
    for (const auto& f : fields) truths.push_back(true_coefficients(f, basis, max_m));

    v.kernel_bound_ok = std::isfinite(v.c1);
    v.projection_bound_ok = true;
    for (std::size_t m : v.m_grid) {
        double kernel = 0.0;
        for (std::size_t ix = 0; ix < grid_points; ++ix) {
            for (std::size_t iy = 0; iy < grid_points; ++iy) {
                cplx sum{};
                for (std::size_t j = 0; j < m; ++j)
                    sum += phi[j * grid_points + ix] * std::conj(phi[j * grid_points + iy]);
                kernel = std::max(kernel, std::abs(sum) * inv_p[iy]);
            }
        }
        v.kernel_sup.push_back(kernel);
        if (!(kernel <= v.c1 * static_cast<double>(m) * (1.0 + 1e-9))) v.kernel_bound_ok = false;

        double proj = 0.0;
        for (std::size_t f = 0; f < truths.size(); ++f) {
            const double a = fields[f].amplitude_bound();
            for (std::size_t ix = 0; ix < grid_points; ++ix) {
                cplx sum{};
                for (std::size_t j = 0; j < m; ++j) sum += truths[f][j] * phi[j * grid_points + ix];
                proj = std::max(proj, std::abs(sum) / a);
            }
        }
        v.projection_sup.push_back(proj);
        if (!(proj <= v.c2_per_unit_amplitude * static_cast<double>(m) * (1.0 + 1e-9))) v.projection_bound_ok = false;
    }
    return v;
}

ASTraceResult as_error_trace(const FieldSpec& field, const DeploymentDensity& deploy, const NoiseModel& noise,
                             const Schedule& schedule, std::uint64_t seed,
                             std::span<const std::size_t> checkpoints, std::size_t eval_grid_points,
                             const Basis& basis, double jump_exclusion) {
    if (checkpoints.empty()) throw std::invalid_argument("as_error_trace: need at least one checkpoint");
    for (std::size_t i = 1; i < checkpoints.size(); ++i)
        if (checkpoints[i] <= checkpoints[i - 1]) throw std::invalid_argument("as_error_trace: checkpoints must increase");
    if (eval_grid_points < 2) throw std::invalid_argument("as_error_trace: eval grid needs two points");

    ASTraceResult r;
    r.schedule = schedule;
    r.jump_exclusion = jump_exclusion;
    r.n_checkpoints.assign(checkpoints.begin(), checkpoints.end());

    if (schedule.kind == ScheduleKind::Power && schedule.param > 0.0 && schedule.param < 1.0) {
        const double psi = schedule.param;
        r.gamma = 0.5 * (1.0 + 1.0 / psi);
        const FieldSpec fields[1] = {field};
        r.conditions = validate_as_schedule(psi, r.gamma, basis, deploy, fields);
    }

    std::vector<double> grid(eval_grid_points), truth_on_grid(eval_grid_points);
    for (std::size_t i = 0; i < eval_grid_points; ++i) grid[i] = static_cast<double>(i) / (eval_grid_points - 1);
    field.eval_many(grid, truth_on_grid);

    // Discontinuities of the periodic extension: interior jumps, plus the
    // endpoints when f(0) != f(1).
    auto jumps = field.jump_points();
    if (std::abs(field.eval(0.0) - field.eval(1.0)) > 1e-12) {
        jumps.push_back(0.0);
        jumps.push_back(1.0);
    }
    std::vector<bool> away(eval_grid_points, true);
    for (std::size_t i = 0; i < eval_grid_points; ++i)
        for (double j : jumps)
            if (std::abs(grid[i] - j) < jump_exclusion) away[i] = false;

    std::size_t max_m = 1;
    for (std::size_t n : checkpoints) max_m = std::max(max_m, truncation_schedule(schedule, n));
    const auto truth = true_coefficients(field, basis, max_m);

    EstimatorConfig cfg;
    cfg.basis = basis;
    cfg.deploy = deploy;
    cfg.c = field.amplitude_bound() + noise.bound();
    cfg.schedule = schedule;

    SensorStream stream(field, deploy, noise, seed, 0);
    SensorBatch batch;
    for (std::size_t n : checkpoints) {
        stream.extend(batch, n);
        const std::size_t m = truncation_schedule(schedule, n);
        const auto estimate = estimate_coefficients_prefix(batch, cfg, n, m);

        ReconstructionCoefficients diff = estimate;
        for (std::size_t j = 0; j < m; ++j) diff.values[j] -= truth[j];
        const auto s_values = reconstruct_many(diff, basis, grid);
        const auto f_hat = reconstruct_many(estimate, basis, grid);

        double sup_s = 0.0, sup_f = 0.0, sup_away = 0.0;
        for (std::size_t i = 0; i < eval_grid_points; ++i) {
            sup_s = std::max(sup_s, std::abs(s_values[i]));
            const double e = std::abs(f_hat[i] - truth_on_grid[i]);
            sup_f = std::max(sup_f, e);
            if (away[i]) sup_away = std::max(sup_away, e);
        }
        r.m_values.push_back(m);
        r.sup_error.push_back(sup_s);
        r.sup_field_error.push_back(sup_f);
        r.sup_field_error_away.push_back(sup_away);
    }
    r.note = "single sample path with a fixed seed; a finite trace illustrates but cannot establish almost-sure "
             "convergence";
    return r;
}

} // namespace binfield
