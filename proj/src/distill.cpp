#include "csd/distill.hpp"

#include <chrono>
#include <cmath>

#include "csd/errors.hpp"
#include "csd/parallel.hpp"

namespace csd {
namespace {

const Condition& pick_condition(const std::vector<Condition>& conds, std::size_t i) {
    if (conds.empty()) throw ContractError("at least one condition is required");
    return conds.size() == 1 ? conds.front() : conds.at(i);
}

void check_condition_count(const std::vector<Condition>& conds, std::size_t n) {
    if (conds.empty() || (conds.size() != 1 && conds.size() != n)) {
        throw ContractError("expected 1 or " + std::to_string(n) + " conditions, got " + std::to_string(conds.size()));
    }
}

void check_draw(const StepDraw& draw, std::size_t n, Eigen::Index dim) {
    if (draw.eps.empty() || (draw.eps.size() != 1 && draw.eps.size() != n)) {
        throw ContractError("step draw must carry 1 or " + std::to_string(n) + " noise vectors");
    }
    for (const auto& e : draw.eps) {
        if (e.size() != dim) throw DimensionError("noise dimension does not match the particles");
    }
}

void check_residual(const Vector& r, std::size_t i) {
    if (!r.allFinite()) throw NumericError("non-finite distillation residual at particle " + std::to_string(i), i);
}

KernelMatrix step_kernel(const VectorList& kernel_points, const DistillConfig& config) {
    if (!config.kernel_mixing) {
        return identity_kernel(kernel_points.size(), kernel_points.empty() ? 0 : kernel_points.front().size());
    }
    return kernel_matrix(kernel_points, config.kernel);
}

double mean_norm(const VectorList& v) {
    double s = 0.0;
    for (const auto& x : v) s += x.norm();
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

template <typename GradFn>
Trajectory run_loop(ParticleSet state, const DistillConfig& config, std::uint64_t seed, GradFn&& grads_for) {
    Rng timestep_rng = derive_stream(seed, "distill/timestep");
    Rng noise_rng = derive_stream(seed, "distill/noise");
    Trajectory traj;
    traj.rows.reserve(config.steps);
    for (std::size_t step = 0; step < config.steps; ++step) {
        const auto start = std::chrono::steady_clock::now();
        const StepDraw draw = draw_step(timestep_rng, noise_rng, config, state.size(), state.dim());
        const VectorList grads = grads_for(state, draw);
        const double eta = config.eta_at(step);
        for (std::size_t i = 0; i < state.size(); ++i) {
            state.particles[i] -= eta * grads[i];
            if (!state.particles[i].allFinite()) {
                throw NumericError("particle " + std::to_string(i) + " became non-finite at step " +
                                       std::to_string(step),
                                   step);
            }
        }
        const auto stats = pairwise_distance_stats(state.particles);
        MetricsRow row;
        row.step = step;
        row.eta = eta;
        row.t_drawn = draw.t;
        row.mean_grad_norm = mean_norm(grads);
        row.mean_pairwise_distance = stats.mean;
        row.min_pairwise_distance = stats.min;
        traj.rows.push_back(row);
        traj.wall_ms.push_back(
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
    traj.final_state = std::move(state);
    return traj;
}

}  // namespace

void DistillConfig::validate() const {
    guidance.validate();
    schedule.validate();
    kernel.validate();
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ContractError("eta must be > 0");
    if (steps < 1) throw ContractError("steps must be >= 1");
    if (!(lr_decay.factor > 0.0 && lr_decay.factor <= 1.0)) throw ContractError("lr_decay.factor must lie in (0, 1]");
    if (baseline == Baseline::Dds && (dds_source_text.empty() || dds_target_text.empty())) {
        throw ContractError("dds baseline needs both source and target text refs");
    }
}

double DistillConfig::weight_at(double t) const {
    if (weight == WeightPolicy::SigmaSquared) {
        const double sigma = alpha_sigma(schedule, t).sigma;
        return sigma * sigma;
    }
    return 1.0;
}

double DistillConfig::eta_at(std::size_t step) const {
    if (lr_decay.every == 0 || lr_decay.factor == 1.0) return eta;
    return eta * std::pow(lr_decay.factor, static_cast<double>(step / lr_decay.every));
}

std::string_view to_string(WeightPolicy v) { return v == WeightPolicy::ConstantOne ? "constant-one" : "sigma-squared"; }
std::string_view to_string(NoiseSharing v) { return v == NoiseSharing::Shared ? "shared" : "per-particle"; }
std::string_view to_string(Baseline v) {
    switch (v) {
        case Baseline::RandomNoise: return "random-noise";
        case Baseline::SourceConditional: return "source-conditional";
        case Baseline::Dds: return "dds";
    }
    return "unknown";
}
std::string_view to_string(KernelOn v) { return v == KernelOn::Noised ? "noised" : "clean"; }

WeightPolicy weight_policy_from_string(std::string_view s) {
    if (s == "constant-one") return WeightPolicy::ConstantOne;
    if (s == "sigma-squared") return WeightPolicy::SigmaSquared;
    throw ContractError("unknown weight policy '" + std::string(s) + "'");
}
NoiseSharing noise_sharing_from_string(std::string_view s) {
    if (s == "shared") return NoiseSharing::Shared;
    if (s == "per-particle") return NoiseSharing::PerParticle;
    throw ContractError("unknown noise sharing '" + std::string(s) + "'");
}
Baseline baseline_from_string(std::string_view s) {
    if (s == "random-noise") return Baseline::RandomNoise;
    if (s == "source-conditional") return Baseline::SourceConditional;
    if (s == "dds") return Baseline::Dds;
    throw ContractError("unknown baseline '" + std::string(s) + "'");
}
KernelOn kernel_on_from_string(std::string_view s) {
    if (s == "noised") return KernelOn::Noised;
    if (s == "clean") return KernelOn::Clean;
    throw ContractError("unknown kernel_on '" + std::string(s) + "'");
}

Vector sds_grad(const Vector& x, const ScoreOracle& oracle, const Condition& cond, const GuidanceParams& g,
                const NoiseSchedule& schedule, double t, const Vector& eps, double w) {
    const Vector x_t = noise_sample(schedule, x, t, eps);
    return w * (oracle.eps(schedule, x_t, t, cond, g) - eps);
}

VectorList mix_residuals(const VectorList& residuals, const KernelMatrix& km, double w) {
    const std::size_t n = residuals.size();
    if (km.size() != n) throw DimensionError("kernel matrix size does not match particle count");
    const double scale = w / static_cast<double>(n);
    VectorList grads(n);
    parallel_for(n, [&](std::size_t i) {
        Vector acc = Vector::Zero(residuals[i].size());
        for (std::size_t j = 0; j < n; ++j) {
            acc += km.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) * residuals[j];
            acc -= km.grad_first[j][i];
        }
        grads[i] = scale * acc;
    });
    return grads;
}

StepDraw draw_step(Rng& timestep_rng, Rng& noise_rng, const DistillConfig& config, std::size_t particles,
                   Eigen::Index dim) {
    StepDraw draw;
    draw.t = sample_timestep(timestep_rng, config.schedule);
    const std::size_t count = config.noise_sharing == NoiseSharing::Shared ? 1 : particles;
    draw.eps.reserve(count);
    for (std::size_t i = 0; i < count; ++i) draw.eps.push_back(standard_normal(noise_rng, dim));
    return draw;
}

VectorList csd_grads(const ParticleSet& set, const ScoreOracle& oracle, const std::vector<Condition>& conds,
                     const StepDraw& draw, const DistillConfig& config) {
    set.validate();
    check_condition_count(conds, set.size());
    check_draw(draw, set.size(), set.dim());
    const std::size_t n = set.size();

    VectorList noised(n);
    VectorList residuals(n);
    parallel_for(n, [&](std::size_t j) {
        const Vector& eps = draw.eps_for(j);
        noised[j] = noise_sample(config.schedule, set.particles[j], draw.t, eps);
        residuals[j] = oracle.eps(config.schedule, noised[j], draw.t, pick_condition(conds, j), config.guidance) - eps;
        check_residual(residuals[j], j);
    });
    const auto& points = config.kernel_on == KernelOn::Noised ? noised : set.particles;
    return mix_residuals(residuals, step_kernel(points, config), config.weight_at(draw.t));
}

Vector csd_edit_delta(const Vector& x, const Vector& x_src, const ScoreOracle& oracle, const Condition& cond,
                      const GuidanceParams& g, const NoiseSchedule& schedule, double t, const Vector& eps) {
    const auto* full = std::get_if<ImageTextCondition>(&cond);
    if (full == nullptr) {
        throw ContractError("csd_edit_delta needs an image_text condition, got " + std::string(condition_kind(cond)));
    }
    const Vector x_t = noise_sample(schedule, x, t, eps);
    const Vector src_t = noise_sample(schedule, x_src, t, eps);
    return oracle.eps(schedule, x_t, t, cond, g) - oracle.eps(schedule, src_t, t, ImageCondition{full->source_ref}, g);
}

void EditProblem::validate() const {
    if (oracle == nullptr) throw ContractError("edit problem has no oracle");
    source.validate();
    target.validate();
    if (source.size() != target.size() || source.dim() != target.dim()) {
        throw ContractError("edit source and target must have equal particle count and dimension");
    }
    check_condition_count(conditions, source.size());
    if (oracle->dim() != 0 && oracle->dim() != source.dim()) {
        throw DimensionError("oracle dimension " + std::to_string(oracle->dim()) + " does not match particles (" +
                             std::to_string(source.dim()) + ")");
    }
}

const Condition& EditProblem::condition_for(std::size_t i) const { return pick_condition(conditions, i); }

EditProblem EditProblem::from_source(ParticleSet source, std::vector<Condition> conditions, const ScoreOracle& oracle) {
    EditProblem p{source, source, std::move(conditions), &oracle};
    p.validate();
    return p;
}

VectorList edit_residuals(const EditProblem& problem, const StepDraw& draw, const DistillConfig& config) {
    problem.validate();
    const std::size_t n = problem.target.size();
    check_draw(draw, n, problem.target.dim());
    const auto& schedule = config.schedule;
    const auto& g = config.guidance;
    const ScoreOracle& oracle = *problem.oracle;

    VectorList residuals(n);
    parallel_for(n, [&](std::size_t i) {
        const Vector& eps = draw.eps_for(i);
        const Vector& x = problem.target.particles[i];
        const Vector& x_src = problem.source.particles[i];
        const Condition& cond = problem.condition_for(i);
        switch (config.baseline) {
            case Baseline::SourceConditional:
                residuals[i] = csd_edit_delta(x, x_src, oracle, cond, g, schedule, draw.t, eps);
                break;
            case Baseline::RandomNoise:
                residuals[i] = oracle.eps(schedule, noise_sample(schedule, x, draw.t, eps), draw.t, cond, g) - eps;
                break;
            case Baseline::Dds: {
                const auto* full = std::get_if<ImageTextCondition>(&cond);
                if (full == nullptr) throw ContractError("dds baseline needs image_text conditions");
                const ImageTextCondition target_cond{full->source_ref, config.dds_target_text};
                const ImageTextCondition source_cond{full->source_ref, config.dds_source_text};
                residuals[i] = oracle.eps(schedule, noise_sample(schedule, x, draw.t, eps), draw.t, target_cond, g) -
                               oracle.eps(schedule, noise_sample(schedule, x_src, draw.t, eps), draw.t, source_cond, g);
                break;
            }
        }
        check_residual(residuals[i], i);
    });
    return residuals;
}

VectorList csd_edit_grads(const EditProblem& problem, const StepDraw& draw, const DistillConfig& config) {
    const VectorList residuals = edit_residuals(problem, draw, config);
    VectorList points;
    if (config.kernel_on == KernelOn::Noised) {
        points.resize(problem.target.size());
        for (std::size_t j = 0; j < points.size(); ++j) {
            points[j] = noise_sample(config.schedule, problem.target.particles[j], draw.t, draw.eps_for(j));
        }
    } else {
        points = problem.target.particles;
    }
    return mix_residuals(residuals, step_kernel(points, config), config.weight_at(draw.t));
}

Trajectory optimize(const EditProblem& problem, const DistillConfig& config, std::uint64_t seed) {
    problem.validate();
    if (config.steps == 0) return {{}, {}, problem.target};
    config.validate();
    EditProblem working = problem;
    return run_loop(problem.target, config, seed, [&](const ParticleSet& state, const StepDraw& draw) {
        working.target = state;
        return csd_edit_grads(working, draw, config);
    });
}

Trajectory optimize_generate(const ParticleSet& init, const ScoreOracle& oracle, const std::vector<Condition>& conds,
                             const DistillConfig& config, std::uint64_t seed) {
    init.validate();
    if (config.steps == 0) return {{}, {}, init};
    config.validate();
    check_condition_count(conds, init.size());
    return run_loop(init, config, seed, [&](const ParticleSet& state, const StepDraw& draw) {
        return csd_grads(state, oracle, conds, draw, config);
    });
}

}  // namespace csd
