#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "csd/rng.hpp"
#include "csd/types.hpp"

namespace csd {

enum class ScheduleKind { VpCosine, VpLinear };

std::string_view to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(std::string_view name);

/// Variance-preserving forward process over t in [0, 1] together with the
/// timestep range sampled during distillation.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::VpCosine;
    double t_min = 0.2;
    double t_max = 0.5;

    /// Throws ContractError unless 0 <= t_min < 1 and t_min <= t_max <= 1.
    void validate() const;

    /// Editing range [0.2, 0.5].
    static NoiseSchedule editing(ScheduleKind kind = ScheduleKind::VpCosine);
    /// Generation range [0.2, 0.98].
    static NoiseSchedule generation(ScheduleKind kind = ScheduleKind::VpCosine);
};

struct AlphaSigma {
    double alpha;
    double sigma;
};

/// (alpha_t, sigma_t) with alpha^2 + sigma^2 = 1.
///   vp-cosine: (cos(pi t / 2), sin(pi t / 2))
///   vp-linear: (sqrt(1 - t), sqrt(t))
/// Throws DomainError for t outside [0, 1].
AlphaSigma alpha_sigma(const NoiseSchedule& schedule, double t);

/// x_t = alpha_t * x0 + sigma_t * eps.
Vector noise_sample(const NoiseSchedule& schedule, const Vector& x0, double t, const Vector& eps);

/// Uniform draw on [t_min, t_max].
double sample_timestep(Rng& rng, const NoiseSchedule& schedule);

/// One (t, eps) draw for a distillation step. `eps` holds either a single
/// shared vector or one vector per particle.
struct StepDraw {
    double t = 0.0;
    VectorList eps;

    bool shared() const { return eps.size() == 1; }
    const Vector& eps_for(std::size_t particle) const { return shared() ? eps.front() : eps.at(particle); }
};

}  // namespace csd
