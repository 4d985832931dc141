#include "csd/self_check.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "csd/canvas.hpp"
#include "csd/distill.hpp"
#include "csd/kernel.hpp"
#include "csd/oracle.hpp"
#include "csd/rng.hpp"
#include "csd/schedule.hpp"
#include "csd/svgd.hpp"

namespace csd {
namespace {

GaussianMixture random_mixture(Rng& rng, Eigen::Index dim, std::size_t components) {
    std::uniform_real_distribution<double> var(0.3, 2.0);
    GaussianMixture g;
    double total = 0.0;
    for (std::size_t i = 0; i < components; ++i) {
        g.weights.push_back(0.2 + var(rng));
        total += g.weights.back();
        g.means.push_back(2.0 * standard_normal(rng, dim));
        Vector v(dim);
        for (Eigen::Index k = 0; k < dim; ++k) v[k] = var(rng);
        g.variances.push_back(v);
    }
    for (auto& w : g.weights) w /= total;
    double head = 0.0;
    for (std::size_t i = 0; i + 1 < components; ++i) head += g.weights[i];
    g.weights.back() = 1.0 - head;
    return g;
}

double rel_err(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1e-12, b.norm()); }

CheckResult check(const std::string& name, const std::function<std::string()>& body) {
    try {
        std::string failure = body();
        return {name, failure.empty(), failure};
    } catch (const std::exception& e) {
        return {name, false, std::string("threw: ") + e.what()};
    }
}

}  // namespace

std::vector<CheckResult> run_self_check(std::uint64_t seed) {
    std::vector<CheckResult> out;
    Rng rng = derive_stream(seed, "self-check");

    out.push_back(check("schedule: alpha^2 + sigma^2 = 1", [] {
        for (const auto kind : {ScheduleKind::VpCosine, ScheduleKind::VpLinear}) {
            const NoiseSchedule s{kind, 0.0, 1.0};
            for (int i = 0; i <= 1000; ++i) {
                const auto [a, sg] = alpha_sigma(s, i / 1000.0);
                if (std::abs(a * a + sg * sg - 1.0) >= 1e-12) return std::string("violated at t = ") + std::to_string(i / 1000.0);
            }
        }
        return std::string();
    }));

    out.push_back(check("oracle: eps matches -sigma * finite-difference score", [&] {
        const NoiseSchedule s;
        for (int c = 0; c < 20; ++c) {
            const auto g = random_mixture(rng, 3, 3);
            const double t = 0.05 + 0.9 * std::uniform_real_distribution<double>(0, 1)(rng);
            const Vector x = 1.5 * standard_normal(rng, 3);
            const auto marginal = gmm_marginal(g, s, t);
            Vector fd(3);
            for (int k = 0; k < 3; ++k) {
                Vector xp = x, xm = x;
                xp[k] += 1e-5;
                xm[k] -= 1e-5;
                fd[k] = (gmm_log_density(marginal, xp) - gmm_log_density(marginal, xm)) / 2e-5;
            }
            const Vector expected = -alpha_sigma(s, t).sigma * fd;
            if (rel_err(gmm_eps(g, s, x, t), expected) >= 1e-6) return std::string("relative error too large");
        }
        return std::string();
    }));

    out.push_back(check("kernel: gradient matches finite differences", [&] {
        for (int c = 0; c < 20; ++c) {
            const Vector x = standard_normal(rng, 4), y = standard_normal(rng, 4);
            const double h = 0.5 + std::uniform_real_distribution<double>(0, 3)(rng);
            Vector fd(4);
            for (int k = 0; k < 4; ++k) {
                Vector xp = x, xm = x;
                xp[k] += 1e-6;
                xm[k] -= 1e-6;
                fd[k] = (rbf(xp, y, h) - rbf(xm, y, h)) / 2e-6;
            }
            if (rel_err(rbf_grad_first(x, y, h), fd) >= 1e-6) return std::string("relative error too large");
            if ((rbf_grad_first(x, y, h) + rbf_grad_first(y, x, h)).norm() > 1e-15) return std::string("not antisymmetric");
        }
        return std::string();
    }));

    out.push_back(check("svgd: single particle follows the raw score", [&] {
        const ParticleSet set{{standard_normal(rng, 3)}};
        const ScoreFn score = [](const Vector& x) -> Vector { return -x; };
        const auto dir = svgd_direction(set, score, KernelSpec::median());
        return (dir.total[0] - score(set.particles[0])).norm() < 1e-15 ? std::string() : std::string("mismatch");
    }));

    out.push_back(check("distill: N = 1 collaborative gradient equals SDS", [&] {
        const EditOracle oracle(random_mixture(rng, 3, 2));
        DistillConfig cfg;
        for (int c = 0; c < 20; ++c) {
            const ParticleSet set{{standard_normal(rng, 3)}};
            const StepDraw draw{0.2 + 0.3 * std::uniform_real_distribution<double>(0, 1)(rng), {standard_normal(rng, 3)}};
            const auto csd = csd_grads(set, oracle, {Unconditional{}}, draw, cfg);
            const auto sds = sds_grad(set.particles[0], oracle, Unconditional{}, cfg.guidance, cfg.schedule, draw.t,
                                      draw.eps[0], cfg.weight_at(draw.t));
            if (rel_err(csd[0], sds) >= 1e-12) return std::string("mismatch");
        }
        return std::string();
    }));

    out.push_back(check("canvas: constant field survives scatter + normalize", [] {
        const auto grid = PatchGrid::build(7, 9, 4, 2);
        VectorList scattered;
        for (const auto& o : grid.origins) scattered.push_back(scatter_patch(Vector::Constant(32, 2.5), o, 4, 7, 9, 2));
        const Vector field = accumulate_normalize(scattered, grid, grid.origins);
        return (field.array() == 2.5).all() ? std::string() : std::string("normalized field is not constant");
    }));

    out.push_back(check("canvas: extract and scatter are adjoint", [&] {
        Canvas c = Canvas::zeros(6, 8, 2);
        c.values = standard_normal(rng, c.values.size());
        const Vector p = standard_normal(rng, 4 * 4 * 2);
        const PatchOrigin o{2, 3};
        const double lhs = extract_patch(c, o, 4).dot(p);
        const double rhs = c.values.dot(scatter_patch(p, o, 4, 6, 8, 2));
        return std::abs(lhs - rhs) < 1e-12 ? std::string() : std::string("inner products differ");
    }));

    out.push_back(check("oracle: image_text with omega_y = 0 equals image", [&] {
        const auto g = random_mixture(rng, 2, 2);
        const EditOracle oracle(g, {{"src", random_mixture(rng, 2, 2)}}, {{"src", {{"txt", random_mixture(rng, 2, 1)}}}});
        const NoiseSchedule s;
        const Vector x = standard_normal(rng, 2);
        const GuidanceParams gp{0.0, 1.7};
        const Vector a = oracle.eps(s, x, 0.4, ImageTextCondition{"src", "txt"}, gp);
        const Vector b = oracle.eps(s, x, 0.4, ImageCondition{"src"}, gp);
        return (a - b).norm() < 1e-12 ? std::string() : std::string("mismatch");
    }));

    out.push_back(check("kernel: median bandwidth is permutation invariant", [&] {
        VectorList pts;
        for (int i = 0; i < 9; ++i) pts.push_back(standard_normal(rng, 3));
        const double h = median_bandwidth(pts);
        std::reverse(pts.begin(), pts.end());
        return median_bandwidth(pts) == h ? std::string() : std::string("changed under permutation");
    }));

    return out;
}

}  // namespace csd
