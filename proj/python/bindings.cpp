#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "binfield/harness.hpp"

namespace py = pybind11;
using namespace binfield;

namespace {

template <class T>
py::array_t<T> to_array(const std::vector<T>& v) {
    py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::dict bound_dict(const BoundReport& r) {
    py::dict d;
    d["variance_term"] = r.variance_term;
    d["bias_term"] = r.bias_term;
    d["total"] = r.total;
    d["reduced_total"] = r.reduced_total;
    d["divergent_j"] = r.divergent_j;
    return d;
}

py::dict result_dict(const harness::ExperimentResult& r) {
    py::dict d;
    d["experiment_id"] = r.experiment_id;
    d["status"] = harness::to_string(r.status);
    d["passed"] = r.passed();
    d["summary"] = r.summary;
    py::list checks;
    for (const auto& c : r.checks) checks.append(py::make_tuple(c.name, c.pass, c.detail));
    d["checks"] = checks;
    std::vector<std::string> files;
    for (const auto& f : r.files) files.push_back(f.string());
    d["files"] = files;
    if (r.fit) d["slope"] = r.fit->slope;
    return d;
}

harness::RunOptions options(std::optional<std::string> out, unsigned workers) {
    harness::RunOptions opt;
    if (out) opt.out_dir = *out;
    opt.workers = workers;
    opt.quiet = true;
    return opt;
}

} // namespace

PYBIND11_MODULE(_binfield, m) {
    m.doc() = "Core of the binfield package.";

    py::class_<Basis>(m, "Basis")
        .def_static("fourier", &Basis::fourier)
        .def_static("step_indicator", &Basis::step_indicator, py::arg("cells"))
        .def("eval", &Basis::eval, py::arg("j"), py::arg("x"))
        .def("bound", &Basis::bound)
        .def_property_readonly("name", &Basis::name)
        .def("__repr__", [](const Basis& b) { return "Basis(" + b.name() + ")"; });

    py::class_<FieldSpec>(m, "FieldSpec")
        .def_static("finite_dim", &FieldSpec::finite_dim, py::arg("basis"), py::arg("coefficients"), py::arg("a"))
        .def_static("zero", &FieldSpec::zero, py::arg("a") = 1.0)
        .def_static("step", &FieldSpec::step, py::arg("at") = 0.5, py::arg("low") = 0.0, py::arg("high") = 1.0)
        .def_static("sawtooth", &FieldSpec::sawtooth)
        .def_static("staircase", [] { return FieldSpec::staircase(); })
        .def("eval", &FieldSpec::eval, py::arg("x"))
        .def("eval_many",
             [](const FieldSpec& f, const std::vector<double>& xs) {
                 std::vector<double> out(xs.size());
                 f.eval_many(xs, out);
                 return to_array(out);
             })
        .def("norm_sq", &FieldSpec::norm_sq)
        .def_property_readonly("amplitude_bound", &FieldSpec::amplitude_bound)
        .def("__repr__", &FieldSpec::describe);

    m.def("make_sobolev_field", &make_sobolev_field, py::arg("s"), py::arg("seed"), py::arg("a") = 1.0);
    m.def(
        "true_coefficients",
        [](const FieldSpec& f, const Basis& b, std::size_t count) { return true_coefficients(f, b, count).values; },
        py::arg("field"), py::arg("basis"), py::arg("count"));

    py::class_<DeploymentDensity>(m, "DeploymentDensity")
        .def_static("uniform", &DeploymentDensity::uniform)
        .def_static("linear2x", &DeploymentDensity::linear2x)
        .def_static("affine_floor", &DeploymentDensity::affine_floor, py::arg("nu"))
        .def_static("custom",
                    py::overload_cast<const std::function<double(double)>&>(&DeploymentDensity::custom),
                    py::arg("shape"))
        .def("pdf", &DeploymentDensity::pdf)
        .def("cdf", &DeploymentDensity::cdf)
        .def_property_readonly("infimum", &DeploymentDensity::infimum)
        .def("__repr__", &DeploymentDensity::name);

    py::class_<NoiseModel>(m, "NoiseModel")
        .def_static("zero", &NoiseModel::zero)
        .def_static("uniform_sym", &NoiseModel::uniform_sym, py::arg("b"))
        .def_static("trunc_gauss", &NoiseModel::trunc_gauss, py::arg("sigma"), py::arg("b"))
        .def_static("two_point", &NoiseModel::two_point, py::arg("b"))
        .def_property_readonly("bound", &NoiseModel::bound)
        .def("__repr__", &NoiseModel::name);

    py::class_<Schedule>(m, "Schedule")
        .def_static("fixed", &Schedule::fixed)
        .def_static("finite_dim", &Schedule::finite_dim)
        .def_static("bv", &Schedule::bv)
        .def_static("sobolev", &Schedule::sobolev)
        .def_static("power", &Schedule::power)
        .def("__repr__", &Schedule::name);
    m.def("truncation_schedule", &truncation_schedule, py::arg("schedule"), py::arg("n"));

    m.def(
        "simulate_batch",
        [](const FieldSpec& f, const DeploymentDensity& d, const NoiseModel& nz, std::size_t n, std::uint64_t seed,
           std::uint64_t trial) {
            const auto b = simulate_batch(f, d, nz, n, seed, trial);
            py::dict out;
            out["x"] = to_array(b.x);
            out["y"] = to_array(b.y);
            out["t"] = to_array(b.t);
            out["b"] = to_array(b.b);
            out["c"] = b.c;
            return out;
        },
        py::arg("field"), py::arg("deploy"), py::arg("noise"), py::arg("n"), py::arg("seed"), py::arg("trial") = 0);

    m.def(
        "estimate_coefficients",
        [](const std::vector<double>& x, const std::vector<std::int8_t>& bits, std::size_t m, double c,
           const Basis& basis, const DeploymentDensity& deploy) {
            EstimatorConfig cfg{basis, deploy, c, Schedule::fixed(m)};
            return estimate_coefficients(x, bits, cfg, m).values;
        },
        py::arg("x"), py::arg("bits"), py::arg("m"), py::arg("c"), py::arg("basis") = Basis::fourier(),
        py::arg("deploy") = DeploymentDensity::uniform());

    m.def(
        "reconstruct",
        [](const std::vector<cplx>& coeffs, const Basis& basis, const std::vector<double>& xs) {
            ReconstructionCoefficients rc;
            rc.values = coeffs;
            return to_array(reconstruct_many(rc, basis, xs));
        },
        py::arg("coefficients"), py::arg("basis"), py::arg("xs"));

    m.def(
        "integrated_squared_error",
        [](const std::vector<cplx>& estimate, const FieldSpec& f) {
            ReconstructionCoefficients rc;
            rc.values = estimate;
            return integrated_squared_error(rc, true_coefficients(f, Basis::fourier(), estimate.size()), f);
        },
        py::arg("estimate"), py::arg("field"));

    m.def(
        "basis_deployment_integral",
        [](const Basis& b, const DeploymentDensity& d, std::size_t j) {
            const auto v = basis_deployment_integral(b, d, j);
            return py::make_tuple(v.value, v.divergent);
        },
        py::arg("basis"), py::arg("deploy"), py::arg("j"));

    m.def(
        "mse_upper_bound",
        [](const FieldSpec& f, const Basis& b, const DeploymentDensity& d, std::size_t n, std::size_t mm, double c) {
            return bound_dict(mse_upper_bound(f, b, d, n, mm, c));
        },
        py::arg("field"), py::arg("basis"), py::arg("deploy"), py::arg("n"), py::arg("m"), py::arg("c"));

    m.def(
        "monte_carlo_mse",
        [](const FieldSpec& f, const DeploymentDensity& d, const NoiseModel& nz, const Schedule& s,
           std::vector<std::size_t> n_grid, std::size_t trials, std::uint64_t seed, unsigned workers) {
            EstimatorConfig cfg{Basis::fourier(), d, f.amplitude_bound() + nz.bound(), s};
            MonteCarloSpec spec{n_grid, std::vector<std::size_t>(n_grid.size(), trials), seed, workers};
            py::list rows;
            for (const auto& p : monte_carlo_mse(f, d, nz, cfg, spec)) {
                py::dict r;
                r["n"] = p.n;
                r["m"] = p.m;
                r["trials"] = p.trials;
                r["mse_mean"] = p.mean;
                r["mse_std"] = p.std_dev;
                r["ci_lo"] = p.ci_lo;
                r["ci_hi"] = p.ci_hi;
                rows.append(r);
            }
            return rows;
        },
        py::arg("field"), py::arg("deploy"), py::arg("noise"), py::arg("schedule"), py::arg("n_grid"),
        py::arg("trials"), py::arg("seed"), py::arg("workers") = 1);

    m.def(
        "rate_fit",
        [](const std::vector<double>& n, const std::vector<double>& mse) {
            const auto r = rate_fit(n, mse);
            return py::make_tuple(r.slope, r.intercept, r.r_squared);
        },
        py::arg("n_grid"), py::arg("mse_values"));

    m.def(
        "run_config",
        [](const std::string& path, std::optional<std::string> out, unsigned workers,
           std::optional<std::uint64_t> seed) {
            const auto cfg = harness::load_config(path, seed);
            return result_dict(harness::run_experiment(cfg, options(out, workers)));
        },
        py::arg("path"), py::arg("out") = py::none(), py::arg("workers") = 1, py::arg("seed") = py::none());

    m.def(
        "run_suite",
        [](const std::string& name, std::optional<std::string> configs, std::optional<std::string> out,
           unsigned workers, std::optional<std::uint64_t> seed) {
            const auto dir = configs ? std::filesystem::path(*configs) : harness::default_config_dir();
            const auto report = harness::run_suite(name, dir, options(out, workers), seed);
            py::list rows;
            for (const auto& r : report.results) rows.append(result_dict(r));
            return rows;
        },
        py::arg("name"), py::arg("configs") = py::none(), py::arg("out") = py::none(), py::arg("workers") = 1,
        py::arg("seed") = py::none());

    py::register_exception<harness::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DensityError>(m, "DensityError", PyExc_ValueError);
}
