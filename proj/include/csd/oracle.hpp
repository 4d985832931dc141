#pragma once

#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "csd/schedule.hpp"
#include "csd/types.hpp"

namespace csd {

/// Mixture of axis-aligned Gaussians. Stands in for a data density whose
/// noised marginals and scores are available in closed form.
struct GaussianMixture {
    std::vector<double> weights;
    VectorList means;
    VectorList variances;  // per-axis variances, one vector per component

    Eigen::Index dim() const { return means.empty() ? 0 : means.front().size(); }
    std::size_t components() const { return weights.size(); }

    /// Throws ContractError on empty mixture, weights not summing to 1 within
    /// 1e-12, non-positive weight or variance, or mixed dimensions.
    void validate() const;

    static GaussianMixture isotropic(const Vector& mean, double variance);
};

/// log p(x); stable for large |x| via log-sum-exp.
double gmm_log_density(const GaussianMixture& gmm, const Vector& x);

/// grad_x log p(x).
Vector gmm_score(const GaussianMixture& gmm, const Vector& x);

/// Marginal of x_t = alpha_t x0 + sigma_t eps under x0 ~ gmm:
/// means alpha*mu, variances alpha^2*v + sigma^2, weights unchanged.
GaussianMixture gmm_marginal(const GaussianMixture& gmm, const NoiseSchedule& schedule, double t);

/// eps-prediction -sigma_t * grad log p_t(x_t). Throws DomainError when sigma_t == 0.
Vector gmm_eps(const GaussianMixture& gmm, const NoiseSchedule& schedule, const Vector& x_t, double t);

struct GuidanceParams {
    double omega_y = 7.5;  // text
    double omega_s = 1.5;  // source image

    void validate() const;
};

/// eps_u + omega_y (eps_c - eps_u)
Vector cfg_combine(const Vector& eps_uncond, const Vector& eps_cond, double omega_y);

/// eps_u + omega_s (eps_img - eps_u) + omega_y (eps_imgtxt - eps_img)
Vector ip2p_combine(const Vector& eps_uncond, const Vector& eps_img, const Vector& eps_imgtxt,
                    const GuidanceParams& g);

struct Unconditional {
    bool operator==(const Unconditional&) const = default;
};
struct ImageCondition {
    std::string source_ref;
    bool operator==(const ImageCondition&) const = default;
};
struct ImageTextCondition {
    std::string source_ref;
    std::string text_ref;
    bool operator==(const ImageTextCondition&) const = default;
};
using Condition = std::variant<Unconditional, ImageCondition, ImageTextCondition>;

/// "unconditional", "image" or "image_text".
std::string_view condition_kind(const Condition& cond);

/// Anything that answers "eps-prediction at (x_t, t, condition)" with the
/// guidance combination already applied. Implementations are immutable after
/// construction and safe for concurrent eps() calls.
class ScoreOracle {
public:
    virtual ~ScoreOracle() = default;

    virtual Eigen::Index dim() const = 0;

    /// Guided eps: raw unconditional for Unconditional, CFG with omega_s for
    /// Image, dual guidance for ImageText.
    virtual Vector eps(const NoiseSchedule& schedule, const Vector& x_t, double t, const Condition& cond,
                       const GuidanceParams& g) const = 0;
};

/// Three-way conditioned analytic oracle: one unconditional mixture, one
/// mixture per source ref, one per (source ref, text ref).
class EditOracle final : public ScoreOracle {
public:
    using ImageBranches = std::map<std::string, GaussianMixture>;
    using ImageTextBranches = std::map<std::string, std::map<std::string, GaussianMixture>>;

    EditOracle(GaussianMixture unconditional, ImageBranches image = {}, ImageTextBranches image_text = {});

    Eigen::Index dim() const override { return unconditional_.dim(); }

    /// Mixture behind the raw (unguided) branch selected by `cond`.
    /// Throws LookupError for unknown refs.
    const GaussianMixture& branch(const Condition& cond) const;

    /// Raw per-branch eps without guidance.
    Vector branch_eps(const NoiseSchedule& schedule, const Vector& x_t, double t, const Condition& cond) const;

    Vector eps(const NoiseSchedule& schedule, const Vector& x_t, double t, const Condition& cond,
               const GuidanceParams& g) const override;

    const GaussianMixture& unconditional() const { return unconditional_; }
    const ImageBranches& image_branches() const { return image_; }
    const ImageTextBranches& image_text_branches() const { return image_text_; }

private:
    GaussianMixture unconditional_;
    ImageBranches image_;
    ImageTextBranches image_text_;
};

}  // namespace csd
