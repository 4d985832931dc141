// Frozen toy problems shared by unit and acceptance tests.
#pragma once

#include <cstdint>
#include <vector>

#include "csd/canvas.hpp"
#include "csd/distill.hpp"
#include "csd/oracle.hpp"
#include "csd/rng.hpp"

namespace toys {

using csd::Vector;

// Three-branch oracle with distinct means and variances; used for the
// variance-reduction comparison.
inline csd::EditOracle variance_oracle(Eigen::Index d) {
    using csd::GaussianMixture;
    Vector lin = Vector::LinSpaced(d, -1.0, 1.0);
    auto unc = GaussianMixture::isotropic(Vector::Zero(d), 1.0);
    GaussianMixture img{{0.6, 0.4}, {0.5 * lin, -0.5 * lin}, {Vector::Constant(d, 0.6), Vector::Constant(d, 0.8)}};
    GaussianMixture txt{{0.5, 0.5}, {0.5 * lin + Vector::Constant(d, 0.4), -0.5 * lin + Vector::Constant(d, 0.4)},
                        {Vector::Constant(d, 0.5), Vector::Constant(d, 0.7)}};
    return csd::EditOracle(unc, {{"src", img}}, {{"src", {{"txt", txt}}}});
}

// Two-mode instruction toy: every branch has variance 0.5, the instruction
// branch is an equal mixture at +1 and -1 on all axes. Edits are pure shifts,
// and the only way to be inconsistent is for neighbours to pick different modes.
inline csd::EditOracle bimodal_oracle(Eigen::Index d) {
    using csd::GaussianMixture;
    auto base = GaussianMixture::isotropic(Vector::Zero(d), 0.5);
    GaussianMixture txt{{0.5, 0.5}, {Vector::Constant(d, 1.0), Vector::Constant(d, -1.0)},
                        {Vector::Constant(d, 0.5), Vector::Constant(d, 0.5)}};
    return csd::EditOracle(base, {{"src", base}}, {{"src", {{"txt", txt}}}});
}

inline const csd::Condition kEdit = csd::ImageTextCondition{"src", "txt"};

// 4 x 26 x 1 canvas with 4 x 4 patches at stride 2: 12 patches.
struct CanvasToy {
    static constexpr std::size_t kHeight = 4, kWidth = 26, kPatch = 4, kStride = 2, kBatch = 4, kSteps = 300;

    csd::PatchGrid grid = csd::PatchGrid::build(kHeight, kWidth, kPatch, kStride);
    csd::EditOracle oracle = bimodal_oracle(static_cast<Eigen::Index>(kPatch * kPatch));

    csd::Canvas source(std::uint64_t seed) const {
        csd::Rng rng = csd::derive_stream(seed, "toy/canvas");
        csd::Canvas c = csd::Canvas::zeros(kHeight, kWidth, 1);
        c.values = 0.3 * csd::standard_normal(rng, c.values.size());
        return c;
    }

    csd::DistillConfig config(bool mixing) const {
        csd::DistillConfig cfg;
        cfg.steps = kSteps;
        cfg.kernel_mixing = mixing;
        return cfg;
    }
};

// Eight 4 x 4 frames drifting along a random unit direction. Each frame gets
// its own noise and the step is small, so mode choices form over many batches
// instead of in the first visit.
struct FramesToy {
    static constexpr std::size_t kFrames = 8, kSide = 4, kBatch = 4, kSteps = 300;
    static constexpr double kDrift = 0.2, kJitter = 0.05, kEta = 0.1;

    csd::EditOracle oracle = bimodal_oracle(static_cast<Eigen::Index>(kSide * kSide));

    std::vector<csd::Canvas> frames(std::uint64_t seed) const {
        csd::Rng rng = csd::derive_stream(seed, "toy/frames");
        const auto d = static_cast<Eigen::Index>(kSide * kSide);
        Vector dir = csd::standard_normal(rng, d);
        dir.normalize();
        const Vector start = 0.3 * csd::standard_normal(rng, d);
        std::vector<csd::Canvas> out;
        for (std::size_t f = 0; f < kFrames; ++f) {
            csd::Canvas c = csd::Canvas::zeros(kSide, kSide, 1);
            c.values = start + static_cast<double>(f) * kDrift * dir + kJitter * csd::standard_normal(rng, d);
            out.push_back(c);
        }
        return out;
    }

    csd::DistillConfig config(bool mixing) const {
        csd::DistillConfig cfg;
        cfg.steps = kSteps;
        cfg.eta = kEta;
        cfg.noise_sharing = csd::NoiseSharing::PerParticle;
        cfg.kernel_mixing = mixing;
        return cfg;
    }
};

inline double pairwise_cv(const std::vector<csd::Canvas>& frames) {
    std::vector<double> d;
    for (std::size_t i = 0; i < frames.size(); ++i)
        for (std::size_t j = i + 1; j < frames.size(); ++j) d.push_back((frames[i].values - frames[j].values).norm());
    double mean = 0.0;
    for (double x : d) mean += x;
    mean /= static_cast<double>(d.size());
    double var = 0.0;
    for (double x : d) var += (x - mean) * (x - mean);
    var /= static_cast<double>(d.size());
    return std::sqrt(var) / mean;
}

}  // namespace toys
