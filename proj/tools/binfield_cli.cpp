#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "binfield/harness.hpp"

namespace bh = binfield::harness;

namespace {

int report(const bh::ExperimentResult& r) {
    std::fputs(r.summary.c_str(), stdout);
    std::printf("status: %s\n", bh::to_string(r.status).c_str());
    for (const auto& f : r.files) std::printf("wrote %s\n", f.string().c_str());
    return r.passed() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Field reconstruction from dithered one-bit sensor readings: experiment runner"};
    app.require_subcommand(1);

    std::string out_dir;
    unsigned workers = 1;
    std::uint64_t seed = 0;
    std::string config_dir = bh::default_config_dir().string();
    app.add_option("--out", out_dir, "Output directory (overrides the config's outputs)");
    app.add_option("--workers", workers, "Worker threads for Monte Carlo trials")->check(CLI::Range(1u, 1024u));
    auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config's seed)");
    app.add_option("--configs", config_dir, "Directory holding suites.json and the shipped configs");

    std::string config;
    auto* run = app.add_subcommand("run", "Run one experiment configuration");
    run->add_option("config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    auto* check = app.add_subcommand("check-conditions", "Check consistency and schedule conditions of a config");
    check->add_option("config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    auto* trace = app.add_subcommand("trace-as", "Single-path error trace for a power schedule");
    trace->add_option("config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    std::string suite;
    auto* suite_cmd = app.add_subcommand("suite", "Run a named acceptance suite");
    suite_cmd->add_option("name", suite, "rates, lemma1, as_traces, conditions or all")
        ->required()
        ->check(CLI::IsMember(bh::suite_names()));

    // Global flags may also follow the subcommand.
    for (auto* sub : {run, check, trace, suite_cmd}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    bh::RunOptions opt;
    if (!out_dir.empty()) opt.out_dir = out_dir;
    opt.workers = workers;
    std::optional<std::uint64_t> seed_override;
    if (*seed_opt) seed_override = seed;

    try {
        if (*suite_cmd) {
            const auto rep = bh::run_suite(suite, config_dir, opt, seed_override);
            std::fputs(rep.table().c_str(), stdout);
            return rep.passed() ? 0 : 1;
        }
        auto cfg = bh::load_config(config, seed_override);
        if (*run) return report(bh::run_experiment(cfg, opt));
        if (*check) return report(bh::run_check_conditions(cfg, opt));
        if (*trace) return report(bh::run_trace(cfg, opt));
    } catch (const bh::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
