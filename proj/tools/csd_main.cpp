#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <exception>
#include <iostream>

#include "csd/config.hpp"
#include "csd/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Collaborative score distillation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
    run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    auto* seed_opt = run->add_option("--seed", seed, "Override the config's root seed");
    auto* out_opt = run->add_option("--out", out_dir, "Override the output directory");

    auto* check = app.add_subcommand("check", "Run the built-in invariant suite");

    std::string metrics_path;
    std::string plot_out;
    auto* plot = app.add_subcommand("plot", "Split metrics.csv into per-metric (step, value) series");
    plot->add_option("metrics", metrics_path, "metrics.csv from a run")->required()->check(CLI::ExistingFile);
    plot->add_option("--out", plot_out, "Directory for the series files (default: next to metrics.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : csd::kExitConfig;
    }

    try {
        if (*run) {
            csd::RunOptions options;
            if (*seed_opt) options.seed = seed;
            if (*out_opt) options.output_dir = out_dir;
            return csd::run_experiment(config_path, options, std::cerr);
        }
        if (*check) return csd::run_check(std::cout);
        if (*plot) {
            csd::emit_plotdata(metrics_path, plot_out);
            return 0;
        }
    } catch (const csd::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return csd::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return csd::kExitFailure;
    }
    return 0;
}
