#include "csd/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "csd/errors.hpp"

namespace csd {
namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

std::string index_path(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

/// Object view that records which keys were read and rejects the rest.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    const std::string& path() const { return path_; }
    std::string at(const std::string& key) const { return join(path_, key); }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json* find(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    const json& require(const std::string& key) {
        const json* v = find(key);
        if (v == nullptr) throw ConfigError(at(key), "required field is missing");
        return *v;
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        const json* v = find(key);
        if (v == nullptr) {
            if (fallback) return *fallback;
            throw ConfigError(at(key), "required field is missing");
        }
        if (!v->is_number()) throw ConfigError(at(key), "expected a number");
        const double d = v->get<double>();
        if (!std::isfinite(d)) throw ConfigError(at(key), "must be finite");
        return d;
    }

    std::uint64_t count(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) {
        const json* v = find(key);
        if (v == nullptr) {
            if (fallback) return *fallback;
            throw ConfigError(at(key), "required field is missing");
        }
        if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
            throw ConfigError(at(key), "expected a non-negative integer");
        }
        return v->get<std::uint64_t>();
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        const json* v = find(key);
        if (v == nullptr) {
            if (fallback) return *fallback;
            throw ConfigError(at(key), "required field is missing");
        }
        if (!v->is_string()) throw ConfigError(at(key), "expected a string");
        return v->get<std::string>();
    }

    bool flag(const std::string& key, bool fallback) {
        const json* v = find(key);
        if (v == nullptr) return fallback;
        if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false");
        return v->get<bool>();
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) throw ConfigError(at(key), "unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

/// Vector from an array, or a scalar broadcast to `dim` (dim > 0 required then).
Vector vector_from_json(const json& j, Eigen::Index dim, const std::string& path) {
    if (j.is_number()) {
        if (dim <= 0) throw ConfigError(path, "scalar shorthand needs an explicit dim");
        return Vector::Constant(dim, j.get<double>());
    }
    if (!j.is_array()) throw ConfigError(path, "expected an array of numbers or a number");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (!j[k].is_number()) throw ConfigError(index_path(path, k), "expected a number");
        v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
    }
    if (dim > 0 && v.size() != dim) {
        throw ConfigError(path, "expected " + std::to_string(dim) + " entries, got " + std::to_string(v.size()));
    }
    if (!v.allFinite()) throw ConfigError(path, "entries must be finite");
    return v;
}

template <typename Fn>
auto wrap_contract(const std::string& path, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
}

NoiseSchedule parse_schedule(const json& j, const std::string& path) {
    Section s(j, path);
    NoiseSchedule sched;
    sched.kind = wrap_contract(s.at("kind"), [&] { return schedule_kind_from_string(s.text("kind", "vp-cosine")); });
    sched.t_min = s.number("t_min", 0.2);
    sched.t_max = s.number("t_max", 0.5);
    s.finish();
    if (!(sched.t_min >= 0.0 && sched.t_min < 1.0)) throw ConfigError(s.at("t_min"), "must lie in [0, 1)");
    if (!(sched.t_max >= sched.t_min && sched.t_max <= 1.0)) throw ConfigError(s.at("t_max"), "must lie in [t_min, 1]");
    return sched;
}

KernelSpec parse_kernel(const json& j, const std::string& path) {
    Section s(j, path);
    KernelSpec k;
    k.distance = s.text("distance", std::string(kSquaredEuclidean));
    if (const json* bw = s.find("bandwidth")) {
        if (bw->is_string()) {
            if (bw->get<std::string>() != "median") throw ConfigError(s.at("bandwidth"), "expected \"median\" or a number");
            k.bandwidth = BandwidthPolicy::Median;
        } else if (bw->is_number()) {
            k.bandwidth = BandwidthPolicy::Fixed;
            k.h = bw->get<double>();
            if (!(k.h > 0.0) || !std::isfinite(k.h)) throw ConfigError(s.at("bandwidth"), "fixed bandwidth must be > 0");
        } else {
            throw ConfigError(s.at("bandwidth"), "expected \"median\" or a number");
        }
    }
    s.finish();
    wrap_contract(s.at("distance"), [&] { k.validate(); return 0; });
    return k;
}

DistillConfig parse_distill(const json& j, const std::string& path) {
    Section s(j, path);
    DistillConfig c;
    c.guidance.omega_y = s.number("omega_y", 7.5);
    c.guidance.omega_s = s.number("omega_s", 1.5);
    if (c.guidance.omega_y < 0.0) throw ConfigError(s.at("omega_y"), "must be >= 0");
    if (c.guidance.omega_s < 0.0) throw ConfigError(s.at("omega_s"), "must be >= 0");
    c.weight = wrap_contract(s.at("weight"), [&] { return weight_policy_from_string(s.text("weight", "constant-one")); });
    c.noise_sharing =
        wrap_contract(s.at("noise_sharing"), [&] { return noise_sharing_from_string(s.text("noise_sharing", "shared")); });
    c.baseline =
        wrap_contract(s.at("baseline"), [&] { return baseline_from_string(s.text("baseline", "source-conditional")); });
    if (const json* dds = s.find("dds")) {
        Section d(*dds, s.at("dds"));
        c.dds_source_text = d.text("source_text");
        c.dds_target_text = d.text("target_text");
        d.finish();
    }
    if (c.baseline == Baseline::Dds && c.dds_source_text.empty()) {
        throw ConfigError(s.at("dds"), "dds baseline requires {source_text, target_text}");
    }
    c.kernel_on = wrap_contract(s.at("kernel_on"), [&] { return kernel_on_from_string(s.text("kernel_on", "noised")); });
    c.kernel_mixing = s.flag("kernel_mixing", true);
    c.eta = s.number("eta", 1.0);
    if (!(c.eta > 0.0)) throw ConfigError(s.at("eta"), "must be > 0");
    if (const json* lr = s.find("lr_decay")) {
        Section d(*lr, s.at("lr_decay"));
        c.lr_decay.every = d.count("every", 0);
        c.lr_decay.factor = d.number("factor", 1.0);
        d.finish();
        if (!(c.lr_decay.factor > 0.0 && c.lr_decay.factor <= 1.0)) {
            throw ConfigError(d.at("factor"), "must lie in (0, 1]");
        }
    }
    c.steps = s.count("steps", 100);
    if (c.steps < 1) throw ConfigError(s.at("steps"), "must be >= 1");
    s.finish();
    return c;
}

ParticleInit parse_init(Section& s) {
    ParticleInit init;
    init.count = s.count("particles");
    if (init.count < 1) throw ConfigError(s.at("particles"), "must be >= 1");
    const auto dim = static_cast<Eigen::Index>(s.count("dim"));
    if (dim < 1) throw ConfigError(s.at("dim"), "must be >= 1");
    init.mean = vector_from_json(s.require("init_mean"), dim, s.at("init_mean"));
    init.std = s.number("init_std", 1.0);
    if (!(init.std >= 0.0)) throw ConfigError(s.at("init_std"), "must be >= 0");
    return init;
}

BridgeEndpoint parse_bridge(const json& j, const std::string& path) {
    Section s(j, path);
    BridgeEndpoint e;
    const std::string transport = s.text("transport");
    if (transport == "stdio") {
        e.transport = Transport::Stdio;
        const json& cmd = s.require("command");
        if (!cmd.is_array() || cmd.empty()) throw ConfigError(s.at("command"), "expected a non-empty array of strings");
        for (std::size_t i = 0; i < cmd.size(); ++i) {
            if (!cmd[i].is_string()) throw ConfigError(index_path(s.at("command"), i), "expected a string");
            e.command.push_back(cmd[i].get<std::string>());
        }
    } else if (transport == "tcp") {
        e.transport = Transport::Tcp;
        e.host = s.text("host", "127.0.0.1");
        const auto port = s.count("port");
        if (port == 0 || port > 65535) throw ConfigError(s.at("port"), "must lie in [1, 65535]");
        e.port = static_cast<std::uint16_t>(port);
    } else {
        throw ConfigError(s.at("transport"), "expected \"stdio\" or \"tcp\"");
    }
    const auto timeout = s.count("timeout_ms", 10000);
    if (timeout == 0 || timeout > std::numeric_limits<std::uint32_t>::max()) {
        throw ConfigError(s.at("timeout_ms"), "must be > 0");
    }
    e.timeout_ms = static_cast<std::uint32_t>(timeout);
    const auto batch = s.count("max_batch", 8);
    if (batch == 0 || batch > 1u << 20) throw ConfigError(s.at("max_batch"), "must be >= 1");
    e.max_batch = static_cast<std::uint32_t>(batch);
    e.dim = static_cast<Eigen::Index>(s.count("dim", 0));
    s.finish();
    return e;
}

}  // namespace

std::string_view to_string(RunMode mode) {
    switch (mode) {
        case RunMode::Svgd: return "svgd";
        case RunMode::Generate: return "generate";
        case RunMode::EditCanvas: return "edit-canvas";
        case RunMode::EditFrames: return "edit-frames";
        case RunMode::Check: return "check";
    }
    return "unknown";
}

GaussianMixture mixture_from_json(const json& j, const std::string& path) {
    Section s(j, path);
    const auto dim = static_cast<Eigen::Index>(s.count("dim", 0));
    const json& means = s.require("means");
    const json& variances = s.require("variances");
    if (!means.is_array() || means.empty()) throw ConfigError(s.at("means"), "expected a non-empty array");
    if (!variances.is_array() || variances.size() != means.size()) {
        throw ConfigError(s.at("variances"), "expected one entry per mean");
    }
    GaussianMixture gmm;
    for (std::size_t i = 0; i < means.size(); ++i) {
        gmm.means.push_back(vector_from_json(means[i], dim, index_path(s.at("means"), i)));
        gmm.variances.push_back(vector_from_json(variances[i], gmm.means.back().size(), index_path(s.at("variances"), i)));
        if (!(gmm.variances.back().array() > 0.0).all()) throw ConfigError(index_path(s.at("variances"), i), "must be > 0");
    }
    if (const json* w = s.find("weights")) {
        if (!w->is_array() || w->size() != means.size()) throw ConfigError(s.at("weights"), "expected one weight per mean");
        for (std::size_t i = 0; i < w->size(); ++i) {
            if (!(*w)[i].is_number()) throw ConfigError(index_path(s.at("weights"), i), "expected a number");
            gmm.weights.push_back((*w)[i].get<double>());
            if (!(gmm.weights.back() > 0.0)) throw ConfigError(index_path(s.at("weights"), i), "must be > 0");
        }
        double total = 0.0;
        for (double x : gmm.weights) total += x;
        if (std::abs(total - 1.0) > 1e-12) throw ConfigError(s.at("weights"), "must sum to 1");
    } else {
        gmm.weights.assign(means.size(), 1.0 / static_cast<double>(means.size()));
        // Uniform weights may not sum to 1 exactly in floating point; put the residue on the last one.
        double head = 0.0;
        for (std::size_t i = 0; i + 1 < gmm.weights.size(); ++i) head += gmm.weights[i];
        gmm.weights.back() = 1.0 - head;
    }
    s.finish();
    wrap_contract(path, [&] { gmm.validate(); return 0; });
    return gmm;
}

EditOracle edit_oracle_from_json(const json& j, const std::string& path) {
    Section s(j, path);
    GaussianMixture uncond = mixture_from_json(s.require("unconditional"), s.at("unconditional"));
    EditOracle::ImageBranches image;
    EditOracle::ImageTextBranches image_text;
    if (const json* img = s.find("image")) {
        if (!img->is_object()) throw ConfigError(s.at("image"), "expected an object keyed by source ref");
        for (const auto& [ref, spec] : img->items()) image.emplace(ref, mixture_from_json(spec, s.at("image") + "." + ref));
    }
    if (const json* it = s.find("image_text")) {
        if (!it->is_object()) throw ConfigError(s.at("image_text"), "expected an object keyed by source ref");
        for (const auto& [ref, texts] : it->items()) {
            const std::string p = s.at("image_text") + "." + ref;
            if (!texts.is_object()) throw ConfigError(p, "expected an object keyed by text ref");
            if (!image.contains(ref)) throw ConfigError(p, "no image branch for source ref '" + ref + "'");
            for (const auto& [text, spec] : texts.items()) {
                image_text[ref].emplace(text, mixture_from_json(spec, p + "." + text));
            }
        }
    }
    s.finish();
    return wrap_contract(path, [&] { return EditOracle(std::move(uncond), std::move(image), std::move(image_text)); });
}

Condition condition_from_json(const json& j, const std::string& path) {
    Section s(j, path);
    const std::string kind = s.text("kind");
    Condition cond;
    if (kind == "unconditional") {
        cond = Unconditional{};
    } else if (kind == "image") {
        cond = ImageCondition{s.text("source_ref")};
    } else if (kind == "image_text") {
        const std::string source = s.text("source_ref");
        cond = ImageTextCondition{source, s.text("text_ref")};
    } else {
        throw ConfigError(s.at("kind"), "expected unconditional, image or image_text");
    }
    s.finish();
    return cond;
}

json condition_to_json(const Condition& cond) {
    json j;
    j["kind"] = std::string(condition_kind(cond));
    if (const auto* img = std::get_if<ImageCondition>(&cond)) j["source_ref"] = img->source_ref;
    if (const auto* it = std::get_if<ImageTextCondition>(&cond)) {
        j["source_ref"] = it->source_ref;
        j["text_ref"] = it->text_ref;
    }
    return j;
}

ExperimentConfig parse_experiment_config(const json& doc, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    Section s(doc, "");
    const std::string mode = s.text("mode");
    if (mode == "svgd") cfg.mode = RunMode::Svgd;
    else if (mode == "generate") cfg.mode = RunMode::Generate;
    else if (mode == "edit-canvas") cfg.mode = RunMode::EditCanvas;
    else if (mode == "edit-frames") cfg.mode = RunMode::EditFrames;
    else if (mode == "check") cfg.mode = RunMode::Check;
    else throw ConfigError("mode", "expected svgd, generate, edit-canvas, edit-frames or check");

    cfg.seed = s.count("seed", 0);
    cfg.output_dir = s.text("output_dir", "out");
    if (const json* v = s.find("schedule")) cfg.schedule = parse_schedule(*v, "schedule");
    if (const json* v = s.find("kernel")) cfg.kernel = parse_kernel(*v, "kernel");
    if (const json* v = s.find("distill")) cfg.distill = parse_distill(*v, "distill");
    cfg.distill.schedule = cfg.schedule;
    cfg.distill.kernel = cfg.kernel;

    if (const json* v = s.find("oracle")) {
        Section o(*v, "oracle");
        if (o.has("bridge")) {
            cfg.oracle.bridge = parse_bridge(o.require("bridge"), "oracle.bridge");
            o.finish();
        } else {
            edit_oracle_from_json(*v, "oracle");  // validates every mixture
            cfg.oracle.inline_spec = *v;
        }
    }

    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };

    if (const json* v = s.find("svgd")) {
        Section sv(*v, "svgd");
        SvgdSection sec;
        sec.init = parse_init(sv);
        sec.eta = sv.number("eta", 0.3);
        if (!(sec.eta > 0.0)) throw ConfigError(sv.at("eta"), "must be > 0");
        sec.steps = sv.count("steps", 500);
        if (sec.steps < 1) throw ConfigError(sv.at("steps"), "must be >= 1");
        const json* probe = sv.find("probe");
        sec.probe = probe ? vector_from_json(*probe, sec.init.mean.size(), sv.at("probe"))
                          : Vector::Zero(sec.init.mean.size());
        sv.finish();
        cfg.svgd = sec;
    }
    if (const json* v = s.find("generate")) {
        Section g(*v, "generate");
        GenerateSection sec;
        sec.init = parse_init(g);
        if (const json* c = g.find("condition")) sec.condition = condition_from_json(*c, g.at("condition"));
        g.finish();
        cfg.generate = sec;
    }
    if (const json* v = s.find("canvas")) {
        Section c(*v, "canvas");
        CanvasSection sec;
        {
            Section src(c.require("source"), c.at("source"));
            if (src.has("file")) {
                sec.source.file = resolve(src.text("file"));
            } else {
                sec.source.height = src.count("height");
                sec.source.width = src.count("width");
                sec.source.channels = src.count("channels");
                if (sec.source.height < 1 || sec.source.width < 1 || sec.source.channels < 1) {
                    throw ConfigError(src.path(), "height, width and channels must be >= 1");
                }
                sec.source.mean = src.number("mean", 0.0);
                sec.source.std = src.number("std", 1.0);
                if (sec.source.std < 0.0) throw ConfigError(src.at("std"), "must be >= 0");
            }
            src.finish();
        }
        sec.patch = c.count("patch");
        sec.stride = c.count("stride");
        sec.batch = c.count("batch", 1);
        const std::string counts = c.text("count_mode", "batch");
        if (counts == "batch") sec.count_mode = CountMode::Batch;
        else if (counts == "full-grid") sec.count_mode = CountMode::FullGrid;
        else throw ConfigError(c.at("count_mode"), "expected batch or full-grid");
        if (const json* cond = c.find("condition")) sec.condition = condition_from_json(*cond, c.at("condition"));
        c.finish();
        if (!sec.source.file) {
            wrap_contract("canvas.patch", [&] {
                return enumerate_patches(sec.source.height, sec.source.width, sec.patch, sec.stride);
            });
            const auto n = enumerate_patches(sec.source.height, sec.source.width, sec.patch, sec.stride).size();
            if (sec.batch < 1 || sec.batch > n) {
                throw ConfigError("canvas.batch", "must lie in [1, " + std::to_string(n) + "]");
            }
        } else if (sec.patch < 1 || sec.stride < 1 || sec.stride > sec.patch) {
            throw ConfigError("canvas.stride", "must lie in [1, patch]");
        }
        cfg.canvas = sec;
    }
    if (const json* v = s.find("frames")) {
        Section f(*v, "frames");
        FramesSection sec;
        if (const json* files = f.find("files")) {
            if (!files->is_array() || files->empty()) throw ConfigError(f.at("files"), "expected a non-empty array");
            for (std::size_t i = 0; i < files->size(); ++i) {
                if (!(*files)[i].is_string()) throw ConfigError(index_path(f.at("files"), i), "expected a path string");
                sec.files.push_back(resolve((*files)[i].get<std::string>()));
            }
        } else {
            sec.count = f.count("count");
            sec.height = f.count("height");
            sec.width = f.count("width");
            sec.channels = f.count("channels");
            if (sec.count < 1 || sec.height < 1 || sec.width < 1 || sec.channels < 1) {
                throw ConfigError(f.path(), "count, height, width and channels must be >= 1");
            }
            const auto dim = static_cast<Eigen::Index>(sec.height * sec.width * sec.channels);
            sec.start = vector_from_json(f.require("start"), dim, f.at("start"));
            sec.direction = vector_from_json(f.require("direction"), dim, f.at("direction"));
            sec.step = f.number("step", 0.0);
            sec.jitter = f.number("jitter", 0.0);
            if (sec.jitter < 0.0) throw ConfigError(f.at("jitter"), "must be >= 0");
        }
        sec.batch = f.count("batch", 1);
        const std::size_t frame_count = sec.files.empty() ? sec.count : sec.files.size();
        if (sec.batch < 1 || sec.batch > frame_count) {
            throw ConfigError(f.at("batch"), "must lie in [1, " + std::to_string(frame_count) + "]");
        }
        if (const json* cond = f.find("condition")) sec.condition = condition_from_json(*cond, f.at("condition"));
        f.finish();
        cfg.frames = sec;
    }
    s.finish();

    // Cross-section requirements.
    const bool needs_oracle = cfg.mode != RunMode::Check;
    if (needs_oracle && !cfg.oracle.inline_spec && !cfg.oracle.bridge) throw ConfigError("oracle", "required for this mode");
    if (cfg.mode == RunMode::Svgd) {
        if (!cfg.svgd) throw ConfigError("svgd", "required for mode svgd");
        if (!cfg.oracle.inline_spec) throw ConfigError("oracle", "svgd mode needs an inline mixture (scores at t = 0)");
    }
    if (cfg.mode == RunMode::Generate && !cfg.generate) throw ConfigError("generate", "required for mode generate");
    if (cfg.mode == RunMode::EditCanvas && !cfg.canvas) throw ConfigError("canvas", "required for mode edit-canvas");
    if (cfg.mode == RunMode::EditFrames && !cfg.frames) throw ConfigError("frames", "required for mode edit-frames");
    if (cfg.distill.baseline == Baseline::Dds) {
        const Condition* cond = cfg.canvas ? &cfg.canvas->condition : cfg.frames ? &cfg.frames->condition : nullptr;
        if (cond && !std::holds_alternative<ImageTextCondition>(*cond)) {
            throw ConfigError("distill.baseline", "dds needs an image_text condition");
        }
    }
    if (cfg.mode == RunMode::EditCanvas || cfg.mode == RunMode::EditFrames) {
        const Condition& cond = cfg.mode == RunMode::EditCanvas ? cfg.canvas->condition : cfg.frames->condition;
        const std::string where = cfg.mode == RunMode::EditCanvas ? "canvas.condition" : "frames.condition";
        if (cfg.distill.baseline == Baseline::SourceConditional && !std::holds_alternative<ImageTextCondition>(cond)) {
            throw ConfigError(where, "source-conditional editing needs an image_text condition");
        }
        if (cfg.oracle.inline_spec) {
            const EditOracle oracle = edit_oracle_from_json(*cfg.oracle.inline_spec);
            wrap_contract(where, [&] { oracle.branch(cond); return 0; });
            if (cfg.distill.baseline == Baseline::Dds) {
                const auto& it = std::get<ImageTextCondition>(cond);
                wrap_contract("distill.dds.source_text",
                              [&] { oracle.branch(ImageTextCondition{it.source_ref, cfg.distill.dds_source_text}); return 0; });
                wrap_contract("distill.dds.target_text",
                              [&] { oracle.branch(ImageTextCondition{it.source_ref, cfg.distill.dds_target_text}); return 0; });
            }
        }
    }
    if (cfg.mode == RunMode::Generate && cfg.oracle.inline_spec) {
        const EditOracle oracle = edit_oracle_from_json(*cfg.oracle.inline_spec);
        wrap_contract("generate.condition", [&] { oracle.branch(cfg.generate->condition); return 0; });
    }
    if (cfg.oracle.inline_spec) {
        const auto oracle_dim = edit_oracle_from_json(*cfg.oracle.inline_spec).dim();
        auto require_dim = [&](const std::string& where, std::size_t expected) {
            if (static_cast<std::size_t>(oracle_dim) != expected) {
                throw ConfigError(where, "oracle dimension " + std::to_string(oracle_dim) + " does not match " +
                                             std::to_string(expected));
            }
        };
        if (cfg.mode == RunMode::Svgd) require_dim("svgd.dim", static_cast<std::size_t>(cfg.svgd->init.mean.size()));
        if (cfg.mode == RunMode::Generate) {
            require_dim("generate.dim", static_cast<std::size_t>(cfg.generate->init.mean.size()));
        }
        if (cfg.mode == RunMode::EditCanvas && !cfg.canvas->source.file) {
            require_dim("canvas.patch", cfg.canvas->patch * cfg.canvas->patch * cfg.canvas->source.channels);
        }
        if (cfg.mode == RunMode::EditFrames && cfg.frames->files.empty()) {
            require_dim("frames", cfg.frames->height * cfg.frames->width * cfg.frames->channels);
        }
    }
    cfg.source = doc;
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
    }
    return parse_experiment_config(doc, path.parent_path());
}

}  // namespace csd
