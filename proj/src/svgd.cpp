#include "csd/svgd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csd/errors.hpp"
#include "csd/parallel.hpp"

namespace csd {

void ParticleSet::validate() const {
    if (particles.empty()) throw ContractError("particle set must contain at least one particle");
    const auto d = particles.front().size();
    for (std::size_t i = 0; i < particles.size(); ++i) {
        if (particles[i].size() != d) {
            throw ContractError("particle " + std::to_string(i) + " has dimension " +
                                std::to_string(particles[i].size()) + ", expected " + std::to_string(d));
        }
        if (!particles[i].allFinite()) throw NumericError("particle " + std::to_string(i) + " is not finite", i);
    }
}

SvgdDirection svgd_direction(const VectorList& scores, const KernelMatrix& km) {
    const std::size_t n = scores.size();
    if (km.size() != n) throw DimensionError("kernel matrix size does not match particle count");
    const double inv_n = 1.0 / static_cast<double>(n);

    SvgdDirection out;
    out.bandwidth = km.bandwidth;
    out.attraction.resize(n);
    out.repulsion.resize(n);
    out.total.resize(n);
    parallel_for(n, [&](std::size_t i) {
        Vector attraction = Vector::Zero(scores[i].size());
        Vector repulsion = Vector::Zero(scores[i].size());
        for (std::size_t j = 0; j < n; ++j) {
            attraction += km.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) * scores[j];
            repulsion += km.grad_first[j][i];
        }
        attraction *= inv_n;
        repulsion *= inv_n;
        out.total[i] = attraction + repulsion;
        out.attraction[i] = std::move(attraction);
        out.repulsion[i] = std::move(repulsion);
    });
    return out;
}

SvgdDirection svgd_direction(const ParticleSet& set, const ScoreFn& score, const KernelSpec& kernel) {
    set.validate();
    VectorList scores(set.size());
    parallel_for(set.size(), [&](std::size_t j) {
        Vector s = score(set.particles[j]);
        if (s.size() != set.dim()) {
            throw DimensionError("score for particle " + std::to_string(j) + " has wrong dimension");
        }
        if (!s.allFinite()) throw NumericError("non-finite score at particle " + std::to_string(j), j);
        scores[j] = std::move(s);
    });
    return svgd_direction(scores, kernel_matrix(set.particles, kernel));
}

ParticleSet svgd_step(const ParticleSet& set, const ScoreFn& score, const KernelSpec& kernel, double eta) {
    if (!(eta >= 0.0)) throw ContractError("svgd step size must be >= 0");
    const SvgdDirection dir = svgd_direction(set, score, kernel);
    ParticleSet next = set;
    for (std::size_t i = 0; i < next.size(); ++i) next.particles[i] += eta * dir.total[i];
    return next;
}

Vector stein_residual(const ParticleSet& samples, const ScoreFn& score, const KernelSpec& kernel,
                      const Vector& probe) {
    samples.validate();
    const Distance& distance = lookup_distance(kernel.distance);
    const double h = resolve_bandwidth(kernel, samples.particles);
    const std::size_t m = samples.size();

    VectorList terms(m);
    parallel_for(m, [&](std::size_t j) {
        const Vector& x = samples.particles[j];
        terms[j] = rbf(distance, x, probe, h) * score(x) + rbf_grad_first(distance, x, probe, h);
    });
    // Fixed-order reduction keeps the result independent of the worker count.
    Vector acc = Vector::Zero(probe.size());
    for (const auto& term : terms) acc += term;
    return acc / static_cast<double>(m);
}

PairwiseStats pairwise_distance_stats(const VectorList& points) {
    const std::size_t n = points.size();
    if (n < 2) return {};
    double sum = 0.0;
    double smallest = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const double d = (points[a] - points[b]).norm();
            sum += d;
            smallest = std::min(smallest, d);
        }
    }
    return {sum / static_cast<double>(n * (n - 1) / 2), smallest};
}

}  // namespace csd
