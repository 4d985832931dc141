#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "csd/bridge.hpp"
#include "csd/canvas.hpp"
#include "csd/distill.hpp"
#include "csd/kernel.hpp"
#include "csd/oracle.hpp"
#include "csd/schedule.hpp"

namespace csd {

/// Invalid experiment configuration; `path` is the dotted field path
/// (e.g. "distill.lr_decay.factor").
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

enum class RunMode { Svgd, Generate, EditCanvas, EditFrames, Check };

std::string_view to_string(RunMode mode);

/// Random initial particles N(mean, std^2 I).
struct ParticleInit {
    std::size_t count = 1;
    Vector mean;
    double std = 1.0;
};

struct SvgdSection {
    ParticleInit init;
    double eta = 0.3;
    std::size_t steps = 500;
    Vector probe;  // stein residual probe; defaults to the origin
};

struct GenerateSection {
    ParticleInit init;
    Condition condition = Unconditional{};
};

/// Where a source canvas comes from: a file, or a seeded Gaussian draw.
struct CanvasSource {
    std::optional<std::filesystem::path> file;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    double mean = 0.0;
    double std = 1.0;
};

struct CanvasSection {
    CanvasSource source;
    std::size_t patch = 0;
    std::size_t stride = 0;
    std::size_t batch = 1;
    CountMode count_mode = CountMode::Batch;
    Condition condition = Unconditional{};
};

/// Frames given as files, or generated along a line: frame f is
/// start + f * step * direction + jitter noise.
struct FramesSection {
    std::vector<std::filesystem::path> files;
    std::size_t count = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    Vector start;
    Vector direction;
    double step = 0.0;
    double jitter = 0.0;
    std::size_t batch = 1;
    Condition condition = Unconditional{};
};

struct OracleSection {
    std::optional<nlohmann::json> inline_spec;  // EditOracle JSON
    std::optional<BridgeEndpoint> bridge;
};

struct ExperimentConfig {
    RunMode mode = RunMode::Check;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    NoiseSchedule schedule = NoiseSchedule::editing();
    KernelSpec kernel = KernelSpec::median();
    DistillConfig distill;
    OracleSection oracle;
    std::optional<SvgdSection> svgd;
    std::optional<GenerateSection> generate;
    std::optional<CanvasSection> canvas;
    std::optional<FramesSection> frames;

    /// Canonical JSON the config was parsed from (sorted keys), used for hashing.
    nlohmann::json source;
};

/// Parses and validates; throws ConfigError with the offending field path.
/// Unknown keys are errors. Relative file paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Mixture spec: {"weights": [...], "means": [...], "variances": [...], "dim": d}.
/// A mean or variance entry may be a scalar broadcast to `dim`. Weights
/// default to uniform.
GaussianMixture mixture_from_json(const nlohmann::json& j, const std::string& path = "mixture");

/// {"unconditional": mixture, "image": {src: mixture}, "image_text": {src: {text: mixture}}}
EditOracle edit_oracle_from_json(const nlohmann::json& j, const std::string& path = "oracle");

Condition condition_from_json(const nlohmann::json& j, const std::string& path = "condition");
nlohmann::json condition_to_json(const Condition& cond);

}  // namespace csd
