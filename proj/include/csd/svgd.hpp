#pragma once

#include <cstddef>
#include <functional>

#include "csd/kernel.hpp"
#include "csd/types.hpp"

namespace csd {

/// N >= 1 particles of a common dimension d.
struct ParticleSet {
    VectorList particles;

    std::size_t size() const { return particles.size(); }
    Eigen::Index dim() const { return particles.empty() ? 0 : particles.front().size(); }

    /// Throws ContractError on empty set or mixed dimensions, NumericError naming
    /// the particle on non-finite entries.
    void validate() const;
};

using ScoreFn = std::function<Vector(const Vector&)>;

/// Per-particle SVGD direction; total[i] == attraction[i] + repulsion[i].
struct SvgdDirection {
    VectorList attraction;
    VectorList repulsion;
    VectorList total;
    double bandwidth = 1.0;
};

/// Kernel-smoothed score plus repulsion:
///   dx_i = (1/N) sum_j [ k(x_j, x_i) score(x_j) + grad_{x_j} k(x_j, x_i) ].
/// `score` must be safe to call concurrently. Throws NumericError naming the
/// particle whose score is non-finite.
SvgdDirection svgd_direction(const ParticleSet& set, const ScoreFn& score, const KernelSpec& kernel);

/// Same, against a precomputed kernel matrix and scores.
SvgdDirection svgd_direction(const VectorList& scores, const KernelMatrix& km);

/// Synchronous update x_i <- x_i + eta * dx_i, all directions taken from the
/// pre-step snapshot.
ParticleSet svgd_step(const ParticleSet& set, const ScoreFn& score, const KernelSpec& kernel, double eta);

/// Empirical Stein operator applied to the kernel at `probe`:
///   (1/M) sum_j [ k(x_j, probe) score(x_j) + grad_{x_j} k(x_j, probe) ].
/// Vanishes in expectation when the samples come from the density of `score`.
Vector stein_residual(const ParticleSet& samples, const ScoreFn& score, const KernelSpec& kernel,
                      const Vector& probe);

/// Mean and minimum of the N(N-1)/2 pairwise Euclidean distances (0 for N < 2).
struct PairwiseStats {
    double mean = 0.0;
    double min = 0.0;
};
PairwiseStats pairwise_distance_stats(const VectorList& points);

}  // namespace csd
