#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "csd/kernel.hpp"
#include "csd/metrics.hpp"
#include "csd/oracle.hpp"
#include "csd/rng.hpp"
#include "csd/schedule.hpp"
#include "csd/svgd.hpp"

namespace csd {

enum class WeightPolicy { ConstantOne, SigmaSquared };
enum class NoiseSharing { Shared, PerParticle };

/// What is subtracted from the guided eps-prediction before descent.
enum class Baseline {
    RandomNoise,        // eps_hat(x_t) - eps
    SourceConditional,  // eps_hat(x_t) - image-guided eps at the noised source
    Dds,                // eps(x_t; y_tgt) - eps(x~_t; y_src)
};

/// Which positions the kernel is evaluated on.
enum class KernelOn { Noised, Clean };

struct LrDecay {
    std::size_t every = 0;  // 0 disables decay
    double factor = 1.0;
};

struct DistillConfig {
    GuidanceParams guidance;
    NoiseSchedule schedule = NoiseSchedule::editing();
    WeightPolicy weight = WeightPolicy::ConstantOne;
    NoiseSharing noise_sharing = NoiseSharing::Shared;
    Baseline baseline = Baseline::SourceConditional;
    std::string dds_source_text;  // Dds only
    std::string dds_target_text;  // Dds only
    KernelSpec kernel = KernelSpec::median();
    KernelOn kernel_on = KernelOn::Noised;
    bool kernel_mixing = true;  // false: identity kernel, no repulsion (ablation)
    double eta = 1.0;
    LrDecay lr_decay;
    std::size_t steps = 100;

    void validate() const;

    /// w(t).
    double weight_at(double t) const;

    /// eta * factor^(step / every).
    double eta_at(std::size_t step) const;
};

std::string_view to_string(WeightPolicy v);
std::string_view to_string(NoiseSharing v);
std::string_view to_string(Baseline v);
std::string_view to_string(KernelOn v);
WeightPolicy weight_policy_from_string(std::string_view s);
NoiseSharing noise_sharing_from_string(std::string_view s);
Baseline baseline_from_string(std::string_view s);
KernelOn kernel_on_from_string(std::string_view s);

/// Score distillation residual w (eps_hat(x_t; cond) - eps), x_t = alpha x + sigma eps.
/// The renderer Jacobian is applied by the caller.
Vector sds_grad(const Vector& x, const ScoreOracle& oracle, const Condition& cond, const GuidanceParams& g,
                const NoiseSchedule& schedule, double t, const Vector& eps, double w);

/// Kernel-mixed descent gradients from per-particle residuals:
///   grad_i = (w/N) sum_j [ k(x_j, x_i) r_j - grad_{x_j} k(x_j, x_i) ].
/// The kernel-gradient term is subtracted so it repels under x <- x - eta grad.
VectorList mix_residuals(const VectorList& residuals, const KernelMatrix& km, double w);

/// Draws the step's shared timestep and either one shared or N per-particle noise vectors.
StepDraw draw_step(Rng& timestep_rng, Rng& noise_rng, const DistillConfig& config, std::size_t particles,
                   Eigen::Index dim);

/// Collaborative score distillation gradients for generation. `conds` holds
/// either one condition for all particles or one per particle.
VectorList csd_grads(const ParticleSet& set, const ScoreOracle& oracle, const std::vector<Condition>& conds,
                     const StepDraw& draw, const DistillConfig& config);

/// Instruction-only delta: dual-guided eps at the noised target minus the
/// image-guided eps at the noised source, both noised with the same draw.
/// Throws ContractError unless `cond` is ImageText.
Vector csd_edit_delta(const Vector& x, const Vector& x_src, const ScoreOracle& oracle, const Condition& cond,
                      const GuidanceParams& g, const NoiseSchedule& schedule, double t, const Vector& eps);

struct EditProblem {
    ParticleSet source;  // frozen
    ParticleSet target;  // optimized, starts equal to source
    std::vector<Condition> conditions;  // one, or one per particle
    const ScoreOracle* oracle = nullptr;

    void validate() const;
    const Condition& condition_for(std::size_t i) const;

    static EditProblem from_source(ParticleSet source, std::vector<Condition> conditions, const ScoreOracle& oracle);
};

/// Per-particle residual of the configured baseline (before kernel mixing).
VectorList edit_residuals(const EditProblem& problem, const StepDraw& draw, const DistillConfig& config);

/// Kernel-mixed editing gradients (w/N) sum_j [k_ji dE_j - grad k].
VectorList csd_edit_grads(const EditProblem& problem, const StepDraw& draw, const DistillConfig& config);

struct Trajectory {
    std::vector<MetricsRow> rows;
    std::vector<double> wall_ms;
    ParticleSet final_state;
};

/// Editing loop: per step draw (t, eps), compute csd_edit_grads, descend with
/// the decayed step size. Deterministic given `seed`; throws NumericError
/// carrying the step index if a particle becomes non-finite.
Trajectory optimize(const EditProblem& problem, const DistillConfig& config, std::uint64_t seed);

/// Generation loop using csd_grads.
Trajectory optimize_generate(const ParticleSet& init, const ScoreOracle& oracle, const std::vector<Condition>& conds,
                             const DistillConfig& config, std::uint64_t seed);

}  // namespace csd
