#include "csd/oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "csd/errors.hpp"

namespace csd {
namespace {

void require_same_dim(const Vector& a, const Vector& b, const char* what) {
    if (a.size() != b.size()) {
        throw DimensionError(std::string(what) + ": dimensions " + std::to_string(a.size()) + " and " +
                             std::to_string(b.size()) + " differ");
    }
}

// Per-component log(w_i N(x; mu_i, diag v_i)).
std::vector<double> component_log_terms(const GaussianMixture& gmm, const Vector& x) {
    if (x.size() != gmm.dim()) {
        throw DimensionError("mixture has dimension " + std::to_string(gmm.dim()) + " but point has " +
                             std::to_string(x.size()));
    }
    const double log_two_pi = std::log(2.0 * std::numbers::pi);
    std::vector<double> terms(gmm.components());
    for (std::size_t i = 0; i < gmm.components(); ++i) {
        const Vector& v = gmm.variances[i];
        const double mahalanobis = ((x - gmm.means[i]).array().square() / v.array()).sum();
        const double log_det = v.array().log().sum();
        terms[i] = std::log(gmm.weights[i]) - 0.5 * (static_cast<double>(x.size()) * log_two_pi + log_det + mahalanobis);
    }
    return terms;
}

double log_sum_exp(const std::vector<double>& terms) {
    double peak = -std::numeric_limits<double>::infinity();
    for (const double v : terms) peak = std::max(peak, v);
    if (!std::isfinite(peak)) return peak;
    double acc = 0.0;
    for (const double v : terms) acc += std::exp(v - peak);
    return peak + std::log(acc);
}

}  // namespace

void GaussianMixture::validate() const {
    if (weights.empty()) throw ContractError("mixture has no components");
    if (means.size() != weights.size() || variances.size() != weights.size()) {
        throw ContractError("mixture weights, means and variances must have equal length");
    }
    double total = 0.0;
    for (const double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) throw ContractError("mixture weights must be positive and finite");
        total += w;
    }
    if (std::abs(total - 1.0) >= 1e-12) {
        throw ContractError("mixture weights must sum to 1 (got " + std::to_string(total) + ")");
    }
    const Eigen::Index d = means.front().size();
    if (d == 0) throw ContractError("mixture dimension must be >= 1");
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (means[i].size() != d || variances[i].size() != d) {
            throw ContractError("mixture component " + std::to_string(i) + " has mismatched dimension");
        }
        if (!means[i].allFinite()) throw ContractError("mixture means must be finite");
        if (!((variances[i].array() > 0.0).all() && variances[i].allFinite())) {
            throw ContractError("mixture variances must be positive and finite");
        }
    }
}

GaussianMixture GaussianMixture::isotropic(const Vector& mean, double variance) {
    return {{1.0}, {mean}, {Vector::Constant(mean.size(), variance)}};
}

double gmm_log_density(const GaussianMixture& gmm, const Vector& x) {
    return log_sum_exp(component_log_terms(gmm, x));
}

Vector gmm_score(const GaussianMixture& gmm, const Vector& x) {
    const auto terms = component_log_terms(gmm, x);
    const double normalizer = log_sum_exp(terms);
    Vector score = Vector::Zero(x.size());
    for (std::size_t i = 0; i < gmm.components(); ++i) {
        const double responsibility = std::exp(terms[i] - normalizer);
        score.array() -= responsibility * (x - gmm.means[i]).array() / gmm.variances[i].array();
    }
    return score;
}

GaussianMixture gmm_marginal(const GaussianMixture& gmm, const NoiseSchedule& schedule, double t) {
    const auto [alpha, sigma] = alpha_sigma(schedule, t);
    GaussianMixture out = gmm;
    for (std::size_t i = 0; i < out.components(); ++i) {
        out.means[i] = alpha * gmm.means[i];
        out.variances[i] = (alpha * alpha) * gmm.variances[i].array() + sigma * sigma;
    }
    return out;
}

Vector gmm_eps(const GaussianMixture& gmm, const NoiseSchedule& schedule, const Vector& x_t, double t) {
    const double sigma = alpha_sigma(schedule, t).sigma;
    if (!(sigma > 0.0)) {
        throw DomainError("eps-prediction undefined at sigma_t = 0 (t = " + std::to_string(t) + ")");
    }
    return -sigma * gmm_score(gmm_marginal(gmm, schedule, t), x_t);
}

void GuidanceParams::validate() const {
    if (!(std::isfinite(omega_y) && omega_y >= 0.0)) throw ContractError("omega_y must be finite and >= 0");
    if (!(std::isfinite(omega_s) && omega_s >= 0.0)) throw ContractError("omega_s must be finite and >= 0");
}

Vector cfg_combine(const Vector& eps_uncond, const Vector& eps_cond, double omega_y) {
    require_same_dim(eps_uncond, eps_cond, "cfg_combine");
    return eps_uncond + omega_y * (eps_cond - eps_uncond);
}

Vector ip2p_combine(const Vector& eps_uncond, const Vector& eps_img, const Vector& eps_imgtxt,
                    const GuidanceParams& g) {
    require_same_dim(eps_uncond, eps_img, "ip2p_combine");
    require_same_dim(eps_img, eps_imgtxt, "ip2p_combine");
    return eps_uncond + g.omega_s * (eps_img - eps_uncond) + g.omega_y * (eps_imgtxt - eps_img);
}

std::string_view condition_kind(const Condition& cond) {
    switch (cond.index()) {
        case 0: return "unconditional";
        case 1: return "image";
        default: return "image_text";
    }
}

EditOracle::EditOracle(GaussianMixture unconditional, ImageBranches image, ImageTextBranches image_text)
    : unconditional_(std::move(unconditional)), image_(std::move(image)), image_text_(std::move(image_text)) {
    unconditional_.validate();
    const auto d = unconditional_.dim();
    for (const auto& [ref, gmm] : image_) {
        gmm.validate();
        if (gmm.dim() != d) throw ContractError("image branch '" + ref + "' has mismatched dimension");
    }
    for (const auto& [source, texts] : image_text_) {
        if (!image_.contains(source)) {
            throw ContractError("image_text branch for source '" + source + "' has no matching image branch");
        }
        for (const auto& [text, gmm] : texts) {
            gmm.validate();
            if (gmm.dim() != d) {
                throw ContractError("image_text branch ('" + source + "', '" + text + "') has mismatched dimension");
            }
        }
    }
}

const GaussianMixture& EditOracle::branch(const Condition& cond) const {
    if (std::holds_alternative<Unconditional>(cond)) return unconditional_;
    if (const auto* img = std::get_if<ImageCondition>(&cond)) {
        const auto it = image_.find(img->source_ref);
        if (it == image_.end()) throw LookupError("unknown source ref '" + img->source_ref + "'");
        return it->second;
    }
    const auto& it_cond = std::get<ImageTextCondition>(cond);
    const auto source = image_text_.find(it_cond.source_ref);
    if (source == image_text_.end()) throw LookupError("unknown source ref '" + it_cond.source_ref + "'");
    const auto text = source->second.find(it_cond.text_ref);
    if (text == source->second.end()) {
        throw LookupError("unknown text ref '" + it_cond.text_ref + "' for source '" + it_cond.source_ref + "'");
    }
    return text->second;
}

Vector EditOracle::branch_eps(const NoiseSchedule& schedule, const Vector& x_t, double t,
                              const Condition& cond) const {
    return gmm_eps(branch(cond), schedule, x_t, t);
}

Vector EditOracle::eps(const NoiseSchedule& schedule, const Vector& x_t, double t, const Condition& cond,
                       const GuidanceParams& g) const {
    const Vector uncond = gmm_eps(unconditional_, schedule, x_t, t);
    if (std::holds_alternative<Unconditional>(cond)) return uncond;
    if (const auto* img = std::get_if<ImageCondition>(&cond)) {
        return cfg_combine(uncond, branch_eps(schedule, x_t, t, *img), g.omega_s);
    }
    const auto& full = std::get<ImageTextCondition>(cond);
    const Vector image = branch_eps(schedule, x_t, t, ImageCondition{full.source_ref});
    const Vector image_text = branch_eps(schedule, x_t, t, full);
    return ip2p_combine(uncond, image, image_text, g);
}

}  // namespace csd
