#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "csd/config.hpp"
#include "csd/oracle.hpp"

namespace csd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> output_dir;
};

/// Loads, validates and executes an experiment. Writes metrics.csv,
/// timings.csv, manifest.json, summary.json and the mode's final-state files
/// into the output directory. Returns 0, 2 (invalid config) or 3 (numeric
/// abort); diagnostics go to `log`.
int run_experiment(const std::filesystem::path& config_path, const RunOptions& options, std::ostream& log);
int run_experiment(ExperimentConfig config, const RunOptions& options, std::ostream& log);

/// Runs the invariant suite and prints one line per check. 0 if all pass.
int run_check(std::ostream& log, std::uint64_t seed = 0);

/// Writes one "step,<metric>" series file per metrics column into `out_dir`
/// (default: next to the input). Throws ConfigError listing the expected
/// schema when columns are missing.
void emit_plotdata(const std::filesystem::path& metrics_csv, const std::filesystem::path& out_dir = {});

std::unique_ptr<ScoreOracle> make_oracle(const OracleSection& section);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace csd
