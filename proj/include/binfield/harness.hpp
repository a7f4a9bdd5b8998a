#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "binfield/analysis.hpp"
#include "binfield/serialize.hpp"

namespace binfield::harness {

/// Every problem found while validating one configuration document.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string source, std::vector<std::string> violations);
    const std::vector<std::string>& violations() const noexcept { return violations_; }
    const std::string& source() const noexcept { return source_; }

private:
    std::string source_;
    std::vector<std::string> violations_;
};

enum class ExperimentKind { Rate, Lemma1, Trace, Conditions };

/// Trials per grid point: `base` up to `threshold`, `above` beyond it.
struct TrialsPolicy {
    std::size_t base = 200;
    std::size_t above = 50;
    std::size_t threshold = 16384;

    std::size_t at(std::size_t n) const noexcept { return n <= threshold ? base : above; }
};

struct Tolerances {
    std::optional<double> slope_min;
    std::optional<double> slope_max;
    std::optional<double> r_squared_min;
    bool bound_dominance = true;
    double dominance_ci_multiple = 3.0;
    // lemma1
    double band_sigma = 4.0;
    double band_fraction = 0.95;
    double max_sigma = 6.0;
    double variance_factor = 1.1;
    // trace
    double ratio_max = 0.3;
};

/// One condition-check case of a "conditions" document.
struct ConditionCase {
    enum class Type { Consistency, Integral, AsSchedule } type = Type::Consistency;
    std::string label;
    Schedule schedule;
    Basis basis = Basis::fourier();
    DeploymentDensity deploy = DeploymentDensity::uniform();
    std::vector<std::size_t> n_grid;
    std::size_t j = 0;
    double psi = 0.0;
    double gamma = 0.0;
    std::vector<FieldSpec> fields;
    bool grid_check = false;
    // Expectations
    std::optional<bool> expect_pass;
    std::optional<bool> expect_divergent;
    std::optional<double> expect_value;
    double value_tolerance = 1e-6;
    std::optional<double> expect_c1;
    std::optional<double> expect_c2;
};

struct Lemma1Cell {
    std::string field_label;
    FieldSpec field;
};

struct ExperimentConfig {
    std::string experiment_id;
    ExperimentKind kind = ExperimentKind::Rate;
    std::filesystem::path source;
    std::filesystem::path outputs = "out";
    std::uint64_t seed = 0;
    std::string config_hash;
    json canonical;

    // rate / trace
    std::optional<FieldSpec> field;
    DeploymentDensity deploy = DeploymentDensity::uniform();
    NoiseModel noise = NoiseModel::zero();
    Schedule schedule;
    Basis basis = Basis::fourier();
    std::vector<std::size_t> n_grid;
    TrialsPolicy trials;
    bool expect_failed_precondition = false;

    // trace
    std::vector<std::size_t> checkpoints;
    std::size_t eval_grid_points = 1001;
    double jump_exclusion = 0.02;

    // lemma1
    std::vector<Lemma1Cell> lemma_fields;
    std::vector<DeploymentDensity> lemma_deploys;
    std::vector<NoiseModel> lemma_noises;
    std::size_t lemma_n = 1000;
    std::size_t lemma_trials = 10000;
    std::size_t lemma_j = 8;

    // conditions
    std::vector<ConditionCase> cases;

    Tolerances tol;
};

/// Parses and validates a configuration. Field references given as strings
/// are resolved relative to `base_dir`. `seed_override` replaces the seed.
ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir,
                              std::optional<std::uint64_t> seed_override = std::nullopt,
                              const std::string& source = "<inline>");
ExperimentConfig load_config(const std::filesystem::path& file,
                             std::optional<std::uint64_t> seed_override = std::nullopt);

/// git-style object hash: SHA-1 of "blob <len>\0<bytes>", lowercase hex.
std::string git_blob_hash(const std::string& bytes);

struct RunOptions {
    std::optional<std::filesystem::path> out_dir; // overrides the config's outputs
    unsigned workers = 1;
    bool quiet = false;
};

enum class Status { Passed, Failed, FailedPrecondition };
std::string to_string(Status s);

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ExperimentResult {
    std::string experiment_id;
    ExperimentKind kind = ExperimentKind::Rate;
    Status status = Status::Passed;
    bool expect_failed_precondition = false;
    std::vector<Check> checks;
    std::vector<std::filesystem::path> files;
    std::string summary;

    // Rate
    std::vector<MsePoint> points;
    std::vector<BoundReport> bounds;
    std::optional<RateFitResult> fit;
    // Trace
    std::optional<ASTraceResult> trace;

    /// Whether the run met its declared expectations.
    bool passed() const noexcept;
};

/// Explanation attached to FAILED-PRECONDITION results.
std::string divergence_explanation(const DeploymentDensity& deploy, std::size_t j);

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt);
ExperimentResult run_check_conditions(const ExperimentConfig& cfg, const RunOptions& opt);
ExperimentResult run_trace(const ExperimentConfig& cfg, const RunOptions& opt);

struct SuiteReport {
    std::string name;
    std::vector<ExperimentResult> results;
    bool passed() const noexcept;
    std::string table() const;
};

std::vector<std::string> suite_names();
/// Runs every config listed for `name` in `<config_dir>/suites.json`.
SuiteReport run_suite(const std::string& name, const std::filesystem::path& config_dir, const RunOptions& opt,
                      std::optional<std::uint64_t> seed_override = std::nullopt);

std::filesystem::path default_config_dir();

} // namespace binfield::harness
