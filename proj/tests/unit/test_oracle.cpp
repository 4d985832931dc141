#include <gtest/gtest.h>

#include <cmath>

#include "csd/errors.hpp"
#include "csd/oracle.hpp"
#include "csd/rng.hpp"
#include "reference.hpp"

using namespace csd;

namespace {

GaussianMixture random_mixture(Rng& rng, Eigen::Index d, std::size_t k) {
    std::uniform_real_distribution<> u(0.3, 1.5);
    GaussianMixture g;
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        g.weights.push_back(u(rng));
        total += g.weights.back();
        g.means.push_back(standard_normal(rng, d));
        Vector v(d);
        for (Eigen::Index i = 0; i < d; ++i) v[i] = u(rng);
        g.variances.push_back(v);
    }
    for (auto& w : g.weights) w /= total;
    // exact normalization to keep the 1e-12 invariant
    double s = 0.0;
    for (std::size_t c = 0; c + 1 < k; ++c) s += g.weights[c];
    g.weights.back() = 1.0 - s;
    return g;
}

const NoiseSchedule kCos{ScheduleKind::VpCosine, 0.2, 0.5};
const NoiseSchedule kLin{ScheduleKind::VpLinear, 0.2, 0.5};

}  // namespace

TEST(GmmMarginal, UnitGaussianIsInvariant) {
    const auto g = GaussianMixture::isotropic(Vector::Zero(3), 1.0);
    for (double t : {0.0, 0.3, 0.7, 1.0}) {
        const auto m = gmm_marginal(g, kCos, t);
        EXPECT_NEAR(m.means[0].norm(), 0.0, 1e-15);
        EXPECT_NEAR((m.variances[0] - Vector::Ones(3)).norm(), 0.0, 1e-15);
    }
}

TEST(GmmMarginal, PointMassAtOneIsStandardNormal) {
    Vector mu(2);
    mu << 3.0, -4.0;
    const auto m = gmm_marginal(GaussianMixture::isotropic(mu, 1e-12), kCos, 1.0);
    EXPECT_NEAR(m.means[0].norm(), 0.0, 1e-12);
    EXPECT_NEAR((m.variances[0] - Vector::Ones(2)).norm(), 0.0, 1e-12);
}

TEST(GmmMarginal, LinearScheduleTwoComponents) {
    GaussianMixture g{{0.5, 0.5}, {Vector::Constant(1, 2.0), Vector::Constant(1, -2.0)}, {Vector::Ones(1), Vector::Ones(1)}};
    const auto m = gmm_marginal(g, kLin, 0.36);
    EXPECT_NEAR(m.means[0][0], 1.6, 1e-15);
    EXPECT_NEAR(m.means[1][0], -1.6, 1e-15);
    EXPECT_NEAR(m.variances[0][0], 1.0, 1e-15);
    EXPECT_NEAR(m.variances[1][0], 1.0, 1e-15);
    EXPECT_EQ(m.weights, g.weights);
}

TEST(GmmEps, UnitGaussianIsSigmaTimesX) {
    Rng rng = derive_stream(1, "test");
    const auto g = GaussianMixture::isotropic(Vector::Zero(4), 1.0);
    for (double t : {0.1, 0.5, 0.9, 1.0}) {
        const Vector x = standard_normal(rng, 4);
        const double s = alpha_sigma(kCos, t).sigma;
        EXPECT_LT((gmm_eps(g, kCos, x, t) - s * x).norm(), 1e-14);
    }
}

TEST(GmmEps, SymmetricMixtureAtOriginIsZero) {
    GaussianMixture g{{0.5, 0.5}, {Vector::Constant(3, 1.5), Vector::Constant(3, -1.5)}, {Vector::Ones(3), Vector::Ones(3)}};
    EXPECT_LT(gmm_eps(g, kCos, Vector::Zero(3), 0.4).norm(), 1e-15);
}

TEST(GmmEps, MatchesFiniteDifferences) {
    Rng rng = derive_stream(2, "test");
    std::uniform_real_distribution<> ut(0.05, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto g = random_mixture(rng, 3, 3);
        const double t = ut(rng);
        const Vector x = standard_normal(rng, 3);
        const auto& sched = trial % 2 ? kCos : kLin;
        const Vector expected = ref::eps_fd(g, sched.kind, t, x);
        EXPECT_LT(ref::rel_err(gmm_eps(g, sched, x, t), expected), 1e-6) << "trial " << trial;
    }
}

TEST(GmmEps, ZeroSigmaIsDomainError) {
    const auto g = GaussianMixture::isotropic(Vector::Zero(2), 1.0);
    EXPECT_THROW(gmm_eps(g, kCos, Vector::Zero(2), 0.0), DomainError);
}

TEST(GmmEps, PermutationInvariant) {
    Rng rng = derive_stream(3, "test");
    const auto g = random_mixture(rng, 4, 3);
    GaussianMixture p{{g.weights[2], g.weights[0], g.weights[1]},
                      {g.means[2], g.means[0], g.means[1]},
                      {g.variances[2], g.variances[0], g.variances[1]}};
    const Vector x = standard_normal(rng, 4);
    EXPECT_LT((gmm_eps(g, kCos, x, 0.4) - gmm_eps(p, kCos, x, 0.4)).norm(), 1e-14);
}

TEST(GmmLogDensity, FiniteFarAway) {
    GaussianMixture g{{0.5, 0.5}, {Vector::Constant(2, 1.0), Vector::Constant(2, -1.0)}, {Vector::Ones(2), Vector::Ones(2)}};
    const Vector far = Vector::Constant(2, 1e3 / std::sqrt(2.0));
    EXPECT_TRUE(std::isfinite(gmm_log_density(g, far)));
    EXPECT_TRUE(gmm_score(g, far).allFinite());
    EXPECT_TRUE(gmm_eps(g, kCos, far, 0.3).allFinite());
}

TEST(GmmValidate, Rejects) {
    EXPECT_THROW((GaussianMixture{{}, {}, {}}.validate()), ContractError);
    EXPECT_THROW((GaussianMixture{{0.5, 0.4}, {Vector::Zero(1), Vector::Zero(1)}, {Vector::Ones(1), Vector::Ones(1)}}.validate()),
                 ContractError);
    EXPECT_THROW((GaussianMixture{{1.0}, {Vector::Zero(1)}, {Vector::Zero(1)}}.validate()), ContractError);
    EXPECT_THROW((GaussianMixture{{0.5, 0.5}, {Vector::Zero(1), Vector::Zero(2)}, {Vector::Ones(1), Vector::Ones(2)}}.validate()),
                 ContractError);
    EXPECT_THROW((GaussianMixture{{1.5, -0.5}, {Vector::Zero(1), Vector::Zero(1)}, {Vector::Ones(1), Vector::Ones(1)}}.validate()),
                 ContractError);
}

TEST(Guidance, CfgExamples) {
    Vector eu(2), ec(2);
    eu << 0, 0;
    ec << 1, 2;
    const Vector out = cfg_combine(eu, ec, 7.5);
    EXPECT_EQ(out[0], 7.5);
    EXPECT_EQ(out[1], 15.0);
    EXPECT_EQ(cfg_combine(eu, ec, 1.0), ec);
    EXPECT_EQ(cfg_combine(eu, ec, 0.0), eu);
}

TEST(Guidance, Ip2pExamples) {
    const Vector e = Vector::Constant(3, 0.7);
    EXPECT_LT((ip2p_combine(e, e, e, GuidanceParams{9.0, 2.0}) - e).norm(), 1e-15);
    Vector eu(2), ei(2), eit(2);
    eu << 0.1, 0.2;
    ei << -1.0, 0.4;
    eit << 3.0, 5.0;
    EXPECT_LT((ip2p_combine(eu, ei, eit, GuidanceParams{1.0, 1.0}) - eit).norm(), 1e-15);
    const Vector single = ip2p_combine(Vector::Constant(1, 0.0), Vector::Constant(1, 1.0), Vector::Constant(1, 3.0),
                                       GuidanceParams{3.0, 1.5});
    EXPECT_EQ(single[0], 7.5);
}

TEST(Guidance, AffineInEachScale) {
    Rng rng = derive_stream(4, "test");
    const Vector eu = standard_normal(rng, 3), ei = standard_normal(rng, 3), eit = standard_normal(rng, 3);
    // three-point collinearity: f(b) - f(a) and f(c) - f(a) are proportional with ratio (c-a)/(b-a)
    const auto cfg = [&](double w) { return cfg_combine(eu, ei, w); };
    EXPECT_LT(((cfg(5.0) - cfg(1.0)) - 2.0 * (cfg(3.0) - cfg(1.0))).norm(), 1e-12);
    const auto by_s = [&](double w) { return ip2p_combine(eu, ei, eit, GuidanceParams{7.5, w}); };
    EXPECT_LT(((by_s(5.0) - by_s(1.0)) - 2.0 * (by_s(3.0) - by_s(1.0))).norm(), 1e-12);
    const auto by_y = [&](double w) { return ip2p_combine(eu, ei, eit, GuidanceParams{w, 1.5}); };
    EXPECT_LT(((by_y(5.0) - by_y(1.0)) - 2.0 * (by_y(3.0) - by_y(1.0))).norm(), 1e-12);
}

TEST(Guidance, Validate) {
    EXPECT_NO_THROW(GuidanceParams{}.validate());
    EXPECT_THROW((GuidanceParams{-1.0, 1.0}.validate()), ContractError);
    EXPECT_THROW((GuidanceParams{1.0, std::nan("")}.validate()), ContractError);
    EXPECT_THROW((GuidanceParams{INFINITY, 1.0}.validate()), ContractError);
}

namespace {

// Unit-variance single-Gaussian branches with known offsets.
EditOracle shifted_oracle() {
    Vector mu_u(2), mu_i(2), mu_it(2);
    mu_u << 0.0, 0.0;
    mu_i << 1.0, -1.0;
    mu_it << 2.0, 0.5;
    return EditOracle(GaussianMixture::isotropic(mu_u, 1.0), {{"src", GaussianMixture::isotropic(mu_i, 1.0)}},
                      {{"src", {{"txt", GaussianMixture::isotropic(mu_it, 1.0)}}}});
}

}  // namespace

TEST(EditOracle, Dispatch) {
    const auto o = shifted_oracle();
    Vector x(2);
    x << 0.3, -0.2;
    const double t = 0.4;
    const GuidanceParams g{7.5, 1.5};
    EXPECT_LT((o.eps(kCos, x, t, Unconditional{}, g) - gmm_eps(o.unconditional(), kCos, x, t)).norm(), 1e-15);

    // hand composition of the closed forms
    const Vector eu = ref::gauss_eps(Vector::Zero(2), 1.0, kCos.kind, t, x);
    const Vector ei = ref::gauss_eps((Vector(2) << 1.0, -1.0).finished(), 1.0, kCos.kind, t, x);
    const Vector eit = ref::gauss_eps((Vector(2) << 2.0, 0.5).finished(), 1.0, kCos.kind, t, x);
    const Vector img = eu + 1.5 * (ei - eu);
    const Vector full = eu + 1.5 * (ei - eu) + 7.5 * (eit - ei);
    EXPECT_LT((o.eps(kCos, x, t, ImageCondition{"src"}, g) - img).norm(), 1e-13);
    EXPECT_LT((o.eps(kCos, x, t, ImageTextCondition{"src", "txt"}, g) - full).norm(), 1e-13);
}

TEST(EditOracle, ZeroTextScaleEqualsImage) {
    const auto o = shifted_oracle();
    Rng rng = derive_stream(5, "test");
    const Vector x = standard_normal(rng, 2);
    const GuidanceParams g{0.0, 2.5};
    EXPECT_LT((o.eps(kCos, x, 0.3, ImageTextCondition{"src", "txt"}, g) - o.eps(kCos, x, 0.3, ImageCondition{"src"}, g)).norm(),
              1e-15);
}

TEST(EditOracle, UnknownRefs) {
    const auto o = shifted_oracle();
    const GuidanceParams g;
    EXPECT_THROW(o.eps(kCos, Vector::Zero(2), 0.3, ImageCondition{"nope"}, g), LookupError);
    EXPECT_THROW(o.eps(kCos, Vector::Zero(2), 0.3, ImageTextCondition{"src", "nope"}, g), LookupError);
    EXPECT_THROW(o.branch(ImageTextCondition{"nope", "txt"}), LookupError);
}

TEST(EditOracle, ConstructionChecks) {
    const auto u = GaussianMixture::isotropic(Vector::Zero(2), 1.0);
    const auto wrong = GaussianMixture::isotropic(Vector::Zero(3), 1.0);
    EXPECT_THROW(EditOracle(u, {{"src", wrong}}), ContractError);
    // an image-text branch without the image branch it extends
    EXPECT_THROW(EditOracle(u, {}, {{"src", {{"txt", u}}}}), ContractError);
}

TEST(EditOracle, ConditionKinds) {
    EXPECT_EQ(condition_kind(Unconditional{}), "unconditional");
    EXPECT_EQ(condition_kind(ImageCondition{"a"}), "image");
    EXPECT_EQ(condition_kind(ImageTextCondition{"a", "b"}), "image_text");
}
