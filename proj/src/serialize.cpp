#include "binfield/serialize.hpp"

#include <cmath>

namespace binfield {

namespace {

const json& member(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(path + "." + key, "missing");
    return *it;
}

double number(const json& j, const char* key, const std::string& path) {
    const json& v = member(j, key, path);
    if (!v.is_number()) throw SchemaError(path + "." + key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw SchemaError(path + "." + key, "must be finite");
    return x;
}

double number_or(const json& j, const char* key, double fallback, const std::string& path) {
    return j.contains(key) ? number(j, key, path) : fallback;
}

std::uint64_t count(const json& j, const char* key, const std::string& path) {
    const json& v = member(j, key, path);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw SchemaError(path + "." + key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

std::string kind_of(const json& j, const std::string& path) {
    if (j.is_string()) return j.get<std::string>();
    const json& v = member(j, "kind", path);
    if (!v.is_string()) throw SchemaError(path + ".kind", "expected a string");
    return v.get<std::string>();
}

template <class F>
auto wrap(const std::string& path, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const SchemaError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw SchemaError(path, e.what());
    }
}

} // namespace

// ---------------------------------------------------------------------------

json basis_to_json(const Basis& basis) {
    if (basis.kind() == BasisKind::FourierComplex) return json{{"kind", "fourier"}};
    return json{{"kind", "step"}, {"cells", basis.cells()}};
}

Basis basis_from_json(const json& j, const std::string& path) {
    const std::string kind = kind_of(j, path);
    if (kind == "fourier") return Basis::fourier();
    if (kind == "step") {
        const auto cells = count(j, "cells", path);
        return wrap(path, [&] { return Basis::step_indicator(cells); });
    }
    throw SchemaError(path + ".kind", "unknown basis '" + kind + "' (expected fourier or step)");
}

json complex_array_to_json(std::span<const cplx> values) {
    json arr = json::array();
    for (const auto& c : values) arr.push_back(json::array({c.real(), c.imag()}));
    return arr;
}

std::vector<cplx> complex_array_from_json(const json& j, const std::string& path) {
    if (!j.is_array()) throw SchemaError(path, "expected an array");
    std::vector<cplx> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const json& e = j[i];
        const std::string at = path + "[" + std::to_string(i) + "]";
        if (e.is_number()) {
            out.emplace_back(e.get<double>(), 0.0);
        } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
            out.emplace_back(e[0].get<double>(), e[1].get<double>());
        } else {
            throw SchemaError(at, "expected a number or a [re, im] pair");
        }
        if (!std::isfinite(out.back().real()) || !std::isfinite(out.back().imag()))
            throw SchemaError(at, "must be finite");
    }
    return out;
}

json field_to_json(const FieldSpec& field) {
    json out;
    switch (field.field_class()) {
    case FieldClass::FiniteDim: {
        const auto coeffs = field.native_coefficients();
        out["class"] = "finite_dim";
        out["params"] = json{{"basis", basis_to_json(field.native_basis())}, {"k", coeffs.size()}};
        out["a"] = field.amplitude_bound();
        out["coefficients"] = complex_array_to_json(coeffs);
        break;
    }
    case FieldClass::BoundedVariation: {
        out["class"] = "bounded_variation";
        const auto p = field.shape_params();
        switch (field.shape()) {
        case BvShape::Step:
            out["params"] = json{{"shape", "step"}, {"at", p[0]}, {"low", p[1]}, {"high", p[2]}};
            break;
        case BvShape::Sawtooth: out["params"] = json{{"shape", "sawtooth"}}; break;
        case BvShape::Staircase:
            out["params"] = json{{"shape", "staircase"}, {"levels", json(std::vector<double>(p.begin(), p.end()))}};
            break;
        }
        out["a"] = field.amplitude_bound();
        break;
    }
    case FieldClass::Sobolev:
        out["class"] = "sobolev";
        out["params"] = json{{"s", field.sobolev_s()}, {"seed", field.sobolev_seed()}};
        out["a"] = field.amplitude_bound();
        break;
    }
    return out;
}

FieldSpec field_from_json(const json& j, const std::string& path) {
    const json& cls_json = member(j, "class", path);
    if (!cls_json.is_string()) throw SchemaError(path + ".class", "expected a string");
    const std::string cls = cls_json.get<std::string>();
    const json empty = json::object();
    const json& params = j.contains("params") ? j["params"] : empty;
    const std::string ppath = path + ".params";
    if (!params.is_object()) throw SchemaError(ppath, "expected an object");

    if (cls == "finite_dim") {
        const double a = number(j, "a", path);
        const Basis basis = params.contains("basis") ? basis_from_json(params["basis"], ppath + ".basis")
                                                     : Basis::fourier();
        auto coeffs = complex_array_from_json(member(j, "coefficients", path), path + ".coefficients");
        if (params.contains("k") && count(params, "k", ppath) != coeffs.size())
            throw SchemaError(ppath + ".k", "does not match the number of coefficients");
        return wrap(path, [&] { return FieldSpec::finite_dim(basis, std::move(coeffs), a); });
    }
    if (cls == "zero") {
        const double a = number_or(j, "a", 1.0, path);
        return wrap(path, [&] { return FieldSpec::zero(a); });
    }
    if (cls == "bounded_variation") {
        const json& shape_json = member(params, "shape", ppath);
        if (!shape_json.is_string()) throw SchemaError(ppath + ".shape", "expected a string");
        const std::string shape = shape_json.get<std::string>();
        FieldSpec f = [&] {
            if (shape == "step") {
                const double at = number_or(params, "at", 0.5, ppath);
                const double low = number_or(params, "low", 0.0, ppath);
                const double high = number_or(params, "high", 1.0, ppath);
                return wrap(path, [&] { return FieldSpec::step(at, low, high); });
            }
            if (shape == "sawtooth") return FieldSpec::sawtooth();
            if (shape == "staircase") {
                if (!params.contains("levels")) return FieldSpec::staircase();
                const json& lv = params["levels"];
                if (!lv.is_array() || lv.size() != 4)
                    throw SchemaError(ppath + ".levels", "expected an array of 4 numbers");
                std::array<double, 4> levels{};
                for (std::size_t i = 0; i < 4; ++i) {
                    if (!lv[i].is_number()) throw SchemaError(ppath + ".levels", "expected an array of 4 numbers");
                    levels[i] = lv[i].get<double>();
                }
                return wrap(path, [&] { return FieldSpec::staircase(levels); });
            }
            throw SchemaError(ppath + ".shape", "unknown shape '" + shape + "' (expected step, sawtooth or staircase)");
        }();
        if (j.contains("a")) {
            const double a = number(j, "a", path);
            return wrap(path + ".a", [&] { return f.with_amplitude_bound(a); });
        }
        return f;
    }
    if (cls == "sobolev") {
        const double s = number(params, "s", ppath);
        const std::uint64_t seed = count(params, "seed", ppath);
        const double a = number_or(j, "a", 1.0, path);
        return wrap(path, [&] { return make_sobolev_field(s, seed, a); });
    }
    throw SchemaError(path + ".class",
                      "unknown field class '" + cls + "' (expected finite_dim, zero, bounded_variation or sobolev)");
}

// ---------------------------------------------------------------------------

json density_to_json(const DeploymentDensity& deploy) {
    switch (deploy.kind()) {
    case DensityKind::Uniform: return json{{"kind", "uniform"}};
    case DensityKind::Linear2x: return json{{"kind", "linear2x"}};
    case DensityKind::AffineFloor: return json{{"kind", "affine_floor"}, {"nu", deploy.param()}};
    case DensityKind::Custom: {
        const auto cells = deploy.cell_density();
        return json{{"kind", "custom_cells"}, {"values", json(std::vector<double>(cells.begin(), cells.end()))}};
    }
    }
    return {};
}

DeploymentDensity density_from_json(const json& j, const std::string& path) {
    const std::string kind = kind_of(j, path);
    if (kind == "uniform") return DeploymentDensity::uniform();
    if (kind == "linear2x") return DeploymentDensity::linear2x();
    if (kind == "affine_floor") {
        const double nu = number(j, "nu", path);
        return wrap(path, [&] { return DeploymentDensity::affine_floor(nu); });
    }
    if (kind == "custom" || kind == "custom_cells") {
        const json& v = member(j, "values", path);
        if (!v.is_array()) throw SchemaError(path + ".values", "expected an array of numbers");
        std::vector<double> values;
        for (const auto& e : v) {
            if (!e.is_number()) throw SchemaError(path + ".values", "expected an array of numbers");
            values.push_back(e.get<double>());
        }
        if (kind == "custom_cells") return wrap(path, [&] { return DeploymentDensity::custom_cells(values); });
        return wrap(path, [&] { return DeploymentDensity::custom(values); });
    }
    throw SchemaError(path + ".kind",
                      "unknown deployment '" + kind + "' (expected uniform, linear2x, affine_floor or custom)");
}

json noise_to_json(const NoiseModel& noise) {
    switch (noise.kind()) {
    case NoiseKind::Zero: return json{{"kind", "zero"}};
    case NoiseKind::UniformSym: return json{{"kind", "uniform"}, {"b", noise.bound()}};
    case NoiseKind::TruncGauss: return json{{"kind", "trunc_gauss"}, {"sigma", noise.sigma()}, {"b", noise.bound()}};
    case NoiseKind::TwoPoint: return json{{"kind", "two_point"}, {"b", noise.bound()}};
    }
    return {};
}

NoiseModel noise_from_json(const json& j, const std::string& path) {
    const std::string kind = kind_of(j, path);
    if (kind == "zero") return NoiseModel::zero();
    if (kind == "uniform") {
        const double b = number(j, "b", path);
        return wrap(path, [&] { return NoiseModel::uniform_sym(b); });
    }
    if (kind == "trunc_gauss") {
        const double sigma = number(j, "sigma", path);
        const double b = number(j, "b", path);
        return wrap(path, [&] { return NoiseModel::trunc_gauss(sigma, b); });
    }
    if (kind == "two_point") {
        const double b = number(j, "b", path);
        return wrap(path, [&] { return NoiseModel::two_point(b); });
    }
    throw SchemaError(path + ".kind", "unknown noise '" + kind + "' (expected zero, uniform, trunc_gauss or two_point)");
}

json schedule_to_json(const Schedule& schedule) {
    switch (schedule.kind) {
    case ScheduleKind::FixedM: return json{{"kind", "fixed"}, {"m", static_cast<std::size_t>(schedule.param)}};
    case ScheduleKind::FiniteDim: return json{{"kind", "finite_dim"}, {"k", static_cast<std::size_t>(schedule.param)}};
    case ScheduleKind::BV: return json{{"kind", "bv"}};
    case ScheduleKind::Sobolev: return json{{"kind", "sobolev"}, {"s", schedule.param}};
    case ScheduleKind::Power: return json{{"kind", "power"}, {"psi", schedule.param}};
    }
    return {};
}

Schedule schedule_from_json(const json& j, const std::string& path) {
    const std::string kind = kind_of(j, path);
    if (kind == "fixed") {
        const auto m = count(j, "m", path);
        if (m == 0) throw SchemaError(path + ".m", "must be at least 1");
        return Schedule::fixed(m);
    }
    if (kind == "finite_dim") {
        const auto k = count(j, "k", path);
        if (k == 0) throw SchemaError(path + ".k", "must be at least 1");
        return Schedule::finite_dim(k);
    }
    if (kind == "bv") return Schedule::bv();
    if (kind == "sobolev") {
        const double s = number(j, "s", path);
        if (!(s > 0.0)) throw SchemaError(path + ".s", "must be positive");
        return Schedule::sobolev(s);
    }
    if (kind == "power") {
        const double psi = number(j, "psi", path);
        if (!(psi > 0.0)) throw SchemaError(path + ".psi", "must be positive");
        return Schedule::power(psi);
    }
    throw SchemaError(path + ".kind",
                      "unknown schedule '" + kind + "' (expected fixed, finite_dim, bv, sobolev or power)");
}

// ---------------------------------------------------------------------------

json coefficients_to_json(const ReconstructionCoefficients& coeffs) {
    return json{{"n_used", coeffs.n_used}, {"values", complex_array_to_json(coeffs.values)}};
}

ReconstructionCoefficients coefficients_from_json(const json& j) {
    ReconstructionCoefficients out;
    out.n_used = count(j, "n_used", "coefficients");
    out.values = complex_array_from_json(member(j, "values", "coefficients"), "coefficients.values");
    return out;
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json doubles(std::span<const double> v) {
    json arr = json::array();
    for (double x : v) arr.push_back(finite_or_null(x));
    return arr;
}

} // namespace

json bound_report_to_json(const BoundReport& r) {
    return json{{"variance_term", finite_or_null(r.variance_term)},
                {"bias_term", r.bias_term},
                {"total", finite_or_null(r.total)},
                {"reduced_total", finite_or_null(r.reduced_total)},
                {"divergent_j", r.divergent_j},
                {"per_j_integrals", doubles(r.per_j_integrals)}};
}

json rate_fit_to_json(const RateFitResult& fit) {
    return json{{"slope", fit.slope},
                {"intercept", fit.intercept},
                {"r_squared", fit.r_squared},
                {"n_grid", fit.n_grid},
                {"mse_values", fit.mse_values}};
}

json schedule_validation_to_json(const ScheduleValidation& v) {
    return json{{"psi", v.psi},
                {"gamma", v.gamma},
                {"psi_prime", v.psi_prime},
                {"gamma_in_range", v.gamma_in_range},
                {"summability_ok", v.summability_ok},
                {"valid", v.valid()},
                {"ermakoff_log_ratio", finite_or_null(v.ermakoff_log_ratio)},
                {"uniformly_bounded", v.uniformly_bounded},
                {"beta", v.beta},
                {"c1", finite_or_null(v.c1)},
                {"c2_per_unit_amplitude", v.c2_per_unit_amplitude},
                {"linear_lambda_summable", v.linear_lambda_summable},
                {"m_grid", v.m_grid},
                {"kernel_sup", doubles(v.kernel_sup)},
                {"projection_sup", doubles(v.projection_sup)},
                {"kernel_bound_ok", v.kernel_bound_ok},
                {"projection_bound_ok", v.projection_bound_ok}};
}

json trace_to_json(const ASTraceResult& t) {
    return json{{"schedule", schedule_to_json(t.schedule)},
                {"gamma", t.gamma},
                {"jump_exclusion", t.jump_exclusion},
                {"n_checkpoints", t.n_checkpoints},
                {"m_values", t.m_values},
                {"sup_error", t.sup_error},
                {"sup_field_error", t.sup_field_error},
                {"sup_field_error_away", t.sup_field_error_away},
                {"conditions", schedule_validation_to_json(t.conditions)},
                {"note", t.note}};
}

json consistency_to_json(const ConsistencyReport& r) {
    return json{{"n_grid", r.n_grid},
                {"m_values", r.m_values},
                {"variance_sums", doubles(r.variance_sums)},
                {"m_unbounded", r.m_unbounded},
                {"positive_infimum", r.positive_infimum},
                {"variance_sum_vanishing", r.variance_sum_vanishing},
                {"all_pass", r.all_pass()},
                {"note", r.note}};
}

} // namespace binfield
