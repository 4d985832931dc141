#include "csd/harness.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "csd/bridge.hpp"
#include "csd/canvas.hpp"
#include "csd/distill.hpp"
#include "csd/errors.hpp"
#include "csd/metrics.hpp"
#include "csd/self_check.hpp"
#include "csd/svgd.hpp"

namespace csd {
namespace {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string timings_csv(const std::vector<double>& wall_ms) {
    std::ostringstream out;
    out << "step,wall_ms\n";
    for (std::size_t i = 0; i < wall_ms.size(); ++i) out << i << ',' << format_real(wall_ms[i]) << '\n';
    return out.str();
}

std::string particles_csv(const VectorList& particles) {
    std::ostringstream out;
    out << "particle";
    const auto dim = particles.empty() ? 0 : particles.front().size();
    for (Eigen::Index k = 0; k < dim; ++k) out << ",x" << k;
    out << '\n';
    for (std::size_t i = 0; i < particles.size(); ++i) {
        out << i;
        for (Eigen::Index k = 0; k < dim; ++k) out << ',' << format_real(particles[i][k]);
        out << '\n';
    }
    return out.str();
}

VectorList init_particles(const ParticleInit& init, std::uint64_t seed) {
    Rng rng = derive_stream(seed, "harness/init");
    VectorList out;
    for (std::size_t i = 0; i < init.count; ++i) {
        out.push_back(init.mean + init.std * standard_normal(rng, init.mean.size()));
    }
    return out;
}

json particle_summary(const VectorList& particles) {
    Vector mean = Vector::Zero(particles.front().size());
    for (const auto& p : particles) mean += p;
    mean /= static_cast<double>(particles.size());
    Vector var = Vector::Zero(mean.size());
    for (const auto& p : particles) var += (p - mean).array().square().matrix();
    if (particles.size() > 1) var /= static_cast<double>(particles.size() - 1);
    const auto stats = pairwise_distance_stats(particles);
    return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
            {"variance", std::vector<double>(var.data(), var.data() + var.size())},
            {"mean_pairwise_distance", stats.mean},
            {"min_pairwise_distance", stats.min}};
}

struct ModeOutput {
    std::vector<MetricsRow> rows;
    std::vector<double> wall_ms;
    json summary;
    std::vector<std::string> files;
};

ModeOutput run_svgd(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    const auto& sec = *cfg.svgd;
    const EditOracle oracle = edit_oracle_from_json(*cfg.oracle.inline_spec);
    const GaussianMixture& target = oracle.unconditional();
    const ScoreFn score = [&](const Vector& x) { return gmm_score(target, x); };

    ParticleSet set{init_particles(sec.init, cfg.seed)};
    ModeOutput out;
    for (std::size_t step = 0; step < sec.steps; ++step) {
        const auto start = std::chrono::steady_clock::now();
        const SvgdDirection dir = svgd_direction(set, score, cfg.kernel);
        double norm_sum = 0.0;
        for (std::size_t i = 0; i < set.size(); ++i) {
            set.particles[i] += sec.eta * dir.total[i];
            norm_sum += dir.total[i].norm();
            if (!set.particles[i].allFinite()) {
                throw NumericError("particle " + std::to_string(i) + " became non-finite at step " + std::to_string(step),
                                   step);
            }
        }
        const auto stats = pairwise_distance_stats(set.particles);
        MetricsRow row;
        row.step = step;
        row.eta = sec.eta;
        row.mean_grad_norm = norm_sum / static_cast<double>(set.size());
        row.mean_pairwise_distance = stats.mean;
        row.min_pairwise_distance = stats.min;
        row.stein_residual = stein_residual(set, score, cfg.kernel, sec.probe).norm();
        out.rows.push_back(row);
        out.wall_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
    write_text(out_dir / "particles.csv", particles_csv(set.particles));
    out.files.push_back("particles.csv");
    out.summary = particle_summary(set.particles);
    return out;
}

ModeOutput run_generate(const ExperimentConfig& cfg, const ScoreOracle& oracle, const std::filesystem::path& out_dir) {
    const auto& sec = *cfg.generate;
    const ParticleSet init{init_particles(sec.init, cfg.seed)};
    Trajectory traj = optimize_generate(init, oracle, {sec.condition}, cfg.distill, cfg.seed);
    write_text(out_dir / "particles.csv", particles_csv(traj.final_state.particles));
    ModeOutput out{std::move(traj.rows), std::move(traj.wall_ms), particle_summary(traj.final_state.particles),
                   {"particles.csv"}};
    return out;
}

Canvas load_canvas_file(const std::filesystem::path& file, const std::string& field) {
    try {
        return file.extension() == ".csv" ? read_canvas_csv(file) : read_canvas_binary(file);
    } catch (const std::runtime_error& e) {
        throw ConfigError(field, e.what());
    }
}

Canvas make_source_canvas(const CanvasSource& src, std::uint64_t seed) {
    if (src.file) return load_canvas_file(*src.file, "canvas.source.file");
    Rng rng = derive_stream(seed, "harness/canvas");
    Canvas c = Canvas::zeros(src.height, src.width, src.channels);
    c.values = Vector::Constant(c.values.size(), src.mean) + src.std * standard_normal(rng, c.values.size());
    return c;
}

ModeOutput run_edit_canvas(const ExperimentConfig& cfg, const ScoreOracle& oracle, const std::filesystem::path& out_dir) {
    const auto& sec = *cfg.canvas;
    const Canvas source = make_source_canvas(sec.source, cfg.seed);
    PatchGrid grid;
    try {
        grid = PatchGrid::build(source.height, source.width, sec.patch, sec.stride);
    } catch (const DomainError& e) {
        throw ConfigError("canvas.patch", e.what());
    }
    if (sec.batch > grid.origins.size()) throw ConfigError("canvas.batch", "exceeds the number of patches");
    CanvasEditResult res = edit_canvas(source, grid, oracle, sec.condition, cfg.distill, sec.batch, cfg.seed, sec.count_mode);

    write_canvas_binary(out_dir / "source.csdc", source);
    write_canvas_binary(out_dir / "canvas.csdc", res.canvas);
    std::ostringstream visits;
    visits << "row,col,visits\n";
    for (std::size_t r = 0; r < grid.height; ++r) {
        for (std::size_t c = 0; c < grid.width; ++c) visits << r << ',' << c << ',' << res.visit_counts[r * grid.width + c] << '\n';
    }
    write_text(out_dir / "visits.csv", visits.str());

    ModeOutput out{std::move(res.rows), std::move(res.wall_ms), {}, {"source.csdc", "canvas.csdc", "visits.csv"}};
    out.summary = {{"patches", grid.origins.size()},
                   {"seam_discrepancy", seam_discrepancy(source, res.canvas, grid)},
                   {"mean_edit", (res.canvas.values - source.values).mean()}};
    return out;
}

ModeOutput run_edit_frames(const ExperimentConfig& cfg, const ScoreOracle& oracle, const std::filesystem::path& out_dir) {
    const auto& sec = *cfg.frames;
    std::vector<Canvas> frames;
    if (!sec.files.empty()) {
        for (std::size_t i = 0; i < sec.files.size(); ++i) {
            frames.push_back(load_canvas_file(sec.files[i], "frames.files[" + std::to_string(i) + "]"));
        }
    } else {
        Rng rng = derive_stream(cfg.seed, "harness/frames");
        for (std::size_t f = 0; f < sec.count; ++f) {
            Canvas c = Canvas::zeros(sec.height, sec.width, sec.channels);
            c.values = sec.start + (static_cast<double>(f) * sec.step) * sec.direction +
                       sec.jitter * standard_normal(rng, c.values.size());
            frames.push_back(std::move(c));
        }
    }
    FramesEditResult res = edit_frames(frames, oracle, sec.condition, cfg.distill, sec.batch, cfg.seed);
    ModeOutput out{std::move(res.rows), std::move(res.wall_ms), {}, {}};
    for (std::size_t f = 0; f < res.frames.size(); ++f) {
        std::ostringstream name;
        name << "frame_" << std::setw(3) << std::setfill('0') << f << ".csdc";
        write_canvas_binary(out_dir / name.str(), res.frames[f]);
        out.files.push_back(name.str());
    }
    out.summary = {{"frames", frames.size()}, {"frame_delta_dispersion", frame_delta_dispersion(frames, res.frames)}};
    return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return out.str();
}

std::unique_ptr<ScoreOracle> make_oracle(const OracleSection& section) {
    if (section.bridge) return std::make_unique<BridgeOracle>(*section.bridge);
    if (section.inline_spec) return std::make_unique<EditOracle>(edit_oracle_from_json(*section.inline_spec));
    throw ConfigError("oracle", "no oracle configured");
}

int run_check(std::ostream& log, std::uint64_t seed) {
    bool ok = true;
    for (const auto& r : run_self_check(seed)) {
        log << (r.passed ? "PASS " : "FAIL ") << r.name;
        if (!r.detail.empty()) log << " (" << r.detail << ")";
        log << '\n';
        ok = ok && r.passed;
    }
    return ok ? kExitOk : kExitFailure;
}

int run_experiment(ExperimentConfig cfg, const RunOptions& options, std::ostream& log) {
    if (options.seed) cfg.seed = *options.seed;
    if (options.output_dir) cfg.output_dir = *options.output_dir;
    if (cfg.mode == RunMode::Check) return run_check(log, cfg.seed);

    try {
        std::filesystem::create_directories(cfg.output_dir);
        const std::unique_ptr<ScoreOracle> oracle = cfg.mode == RunMode::Svgd ? nullptr : make_oracle(cfg.oracle);

        ModeOutput out;
        switch (cfg.mode) {
            case RunMode::Svgd: out = run_svgd(cfg, cfg.output_dir); break;
            case RunMode::Generate: out = run_generate(cfg, *oracle, cfg.output_dir); break;
            case RunMode::EditCanvas: out = run_edit_canvas(cfg, *oracle, cfg.output_dir); break;
            case RunMode::EditFrames: out = run_edit_frames(cfg, *oracle, cfg.output_dir); break;
            case RunMode::Check: break;
        }

        write_text(cfg.output_dir / "metrics.csv", metrics_to_csv(out.rows));
        write_text(cfg.output_dir / "timings.csv", timings_csv(out.wall_ms));
        write_text(cfg.output_dir / "summary.json", out.summary.dump(2) + "\n");
        out.files.insert(out.files.begin(), {"metrics.csv", "timings.csv", "summary.json"});
        const json manifest = {
            {"mode", std::string(to_string(cfg.mode))},
            {"seed", cfg.seed},
            {"config_sha256", sha256_hex(cfg.source.dump())},
            {"steps", out.rows.size()},
            {"outputs", out.files},
        };
        write_text(cfg.output_dir / "manifest.json", manifest.dump(2) + "\n");
        log << "wrote " << out.rows.size() << " metric rows to " << (cfg.output_dir / "metrics.csv").string() << '\n';
        return kExitOk;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericError& e) {
        log << "numeric abort at step " << e.index() << ": " << e.what() << '\n';
        return kExitNumeric;
    } catch (const ContractError& e) {
        // Inconsistencies only detectable once inputs are loaded (e.g. canvas file vs oracle dimension).
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DimensionError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

int run_experiment(const std::filesystem::path& config_path, const RunOptions& options, std::ostream& log) {
    ExperimentConfig cfg;
    try {
        cfg = load_experiment_config(config_path);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    return run_experiment(std::move(cfg), options, log);
}

void emit_plotdata(const std::filesystem::path& metrics_csv, const std::filesystem::path& out_dir) {
    std::ifstream in(metrics_csv);
    if (!in) throw std::runtime_error("cannot open " + metrics_csv.string());

    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };

    std::string header;
    std::getline(in, header);
    const auto columns = split(header);
    const auto& expected = metrics_columns();
    std::string schema;
    for (const auto& c : expected) schema += (schema.empty() ? "" : ",") + c;
    for (const auto& c : expected) {
        if (std::find(columns.begin(), columns.end(), c) == columns.end()) {
            throw ConfigError(metrics_csv.string(), "missing column '" + c + "'; expected schema: " + schema);
        }
    }
    auto column_index = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(columns.begin(), columns.end(), name) - columns.begin());
    };

    const std::filesystem::path dir = out_dir.empty() ? metrics_csv.parent_path() : out_dir;
    if (!dir.empty()) std::filesystem::create_directories(dir);
    std::vector<std::ostringstream> series(expected.size());
    for (std::size_t m = 1; m < expected.size(); ++m) series[m] << "step," << expected[m] << '\n';

    const std::size_t step_col = column_index("step");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        for (std::size_t m = 1; m < expected.size(); ++m) {
            const std::size_t col = column_index(expected[m]);
            if (col < cells.size() && !cells[col].empty()) series[m] << cells[step_col] << ',' << cells[col] << '\n';
        }
    }
    for (std::size_t m = 1; m < expected.size(); ++m) write_text(dir / (expected[m] + ".dat"), series[m].str());
}

}  // namespace csd
