#include "csd/schedule.hpp"

#include <cmath>
#include <numbers>

#include "csd/errors.hpp"

namespace csd {

std::string_view to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::VpCosine: return "vp-cosine";
        case ScheduleKind::VpLinear: return "vp-linear";
    }
    return "unknown";
}

ScheduleKind schedule_kind_from_string(std::string_view name) {
    if (name == "vp-cosine") return ScheduleKind::VpCosine;
    if (name == "vp-linear") return ScheduleKind::VpLinear;
    throw ContractError("unknown schedule kind '" + std::string(name) + "' (expected vp-cosine or vp-linear)");
}

void NoiseSchedule::validate() const {
    if (!(t_min >= 0.0 && t_min < 1.0)) {
        throw ContractError("t_min must lie in [0, 1), got " + std::to_string(t_min));
    }
    if (!(t_max >= t_min && t_max <= 1.0)) {
        throw ContractError("t_max must lie in [t_min, 1], got " + std::to_string(t_max));
    }
}

NoiseSchedule NoiseSchedule::editing(ScheduleKind kind) { return {kind, 0.2, 0.5}; }

NoiseSchedule NoiseSchedule::generation(ScheduleKind kind) { return {kind, 0.2, 0.98}; }

AlphaSigma alpha_sigma(const NoiseSchedule& schedule, double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError("timestep must lie in [0, 1], got " + std::to_string(t));
    }
    switch (schedule.kind) {
        case ScheduleKind::VpCosine: {
            // Pin the endpoints so alpha_1 is exactly 0 rather than cos(pi/2) ~ 6e-17.
            if (t == 0.0) return {1.0, 0.0};
            if (t == 1.0) return {0.0, 1.0};
            const double angle = 0.5 * std::numbers::pi * t;
            return {std::cos(angle), std::sin(angle)};
        }
        case ScheduleKind::VpLinear:
            return {std::sqrt(1.0 - t), std::sqrt(t)};
    }
    throw ContractError("unknown schedule kind");
}

Vector noise_sample(const NoiseSchedule& schedule, const Vector& x0, double t, const Vector& eps) {
    if (x0.size() != eps.size()) {
        throw DimensionError("noise_sample: x0 has dimension " + std::to_string(x0.size()) +
                             " but eps has " + std::to_string(eps.size()));
    }
    const auto [alpha, sigma] = alpha_sigma(schedule, t);
    return alpha * x0 + sigma * eps;
}

double sample_timestep(Rng& rng, const NoiseSchedule& schedule) {
    if (schedule.t_max <= schedule.t_min) return schedule.t_min;
    std::uniform_real_distribution<double> uniform(schedule.t_min, schedule.t_max);
    return uniform(rng);
}

}  // namespace csd
