#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "modalvgae/model/ures_vgae.hpp"
#include "modalvgae/uq/nig.hpp"
#include "modalvgae/uq/sampling.hpp"
#include "modalvgae/uq/swag.hpp"
#include "support.hpp"

using namespace mvgae;
using MatD = ad::Mat<double>;

namespace {

struct SmallGraph {
    ModelConfig cfg = fixtures::tiny_model(9, 3);
    nn::ParamStore<double> params = model::init_params<double>(cfg, 41);
    MatD x;
    ad::Neighbourhood nb{4, {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 3}, {3, 2}}};

    SmallGraph() {
        Rng rng(42);
        x.resize(4, cfg.in_features);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    }
};

}  // namespace

TEST(PredictiveMoments, WorkedExampleAndLimits) {
    const auto s = uq::predictive_moments(uq::Nig{0.4, 1.0, 2.0, 1.0});
    EXPECT_DOUBLE_EQ(s.mean, 0.4);
    EXPECT_DOUBLE_EQ(s.sigma2_alea, 1.0);
    EXPECT_DOUBLE_EQ(s.sigma2_epis, 1.0);
    EXPECT_DOUBLE_EQ(s.sigma2_total, 2.0);
    const auto big = uq::predictive_moments(uq::Nig{0.0, 1e9, 3.0, 2.0});
    EXPECT_LT(big.sigma2_epis, 1e-8);
    EXPECT_NEAR(big.sigma2_total, big.sigma2_alea, 1e-8);
    EXPECT_THROW(uq::predictive_moments(uq::Nig{0.0, 1.0, 1.0, 1.0}), InvalidArgument);
}

TEST(PredictiveMoments, TotalIsSumOfComponents) {
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        const uq::Nig p{rng.normal(), rng.uniform(0.1, 10), rng.uniform(1.1, 8), rng.uniform(0.01, 5)};
        const auto s = uq::predictive_moments(p);
        EXPECT_NEAR(s.sigma2_total, s.sigma2_alea + s.sigma2_epis, 1e-14 * s.sigma2_total);
        EXPECT_GT(s.sigma2_alea, 0.0);
        EXPECT_GT(s.sigma2_epis, 0.0);
    }
}

TEST(StudentT, SymmetricWithModeAtGamma) {
    const uq::Nig p{1.3, 0.7, 2.5, 0.9};
    const double at = uq::student_t_logpdf(1.3, p);
    for (double d : {0.01, 0.5, 3.0}) {
        EXPECT_NEAR(uq::student_t_logpdf(1.3 + d, p), uq::student_t_logpdf(1.3 - d, p), 1e-13);
        EXPECT_LT(uq::student_t_logpdf(1.3 + d, p), at);
    }
}

TEST(StudentT, MatchesQuadratureOracle) {
    for (const auto& r : fixtures::load_nig_oracle()) {
        EXPECT_NEAR(uq::student_t_logpdf(r[0], uq::Nig{r[1], r[2], r[3], r[4]}), r[5], 1e-6);
    }
}

TEST(Intervals, CollapseAtZeroLevelAndNest) {
    const uq::Nig p{-0.2, 2.0, 3.0, 0.5};
    const auto [lo0, hi0] = uq::confidence_interval(p, 1e-9);
    EXPECT_LT(hi0 - lo0, 1e-8);
    EXPECT_NEAR(0.5 * (lo0 + hi0), -0.2, 1e-12);
    double prev_lo = -0.2, prev_hi = -0.2;
    for (double level : {0.1, 0.5, 0.9, 0.99}) {
        const auto [lo, hi] = uq::confidence_interval(p, level);
        EXPECT_LT(lo, prev_lo);
        EXPECT_GT(hi, prev_hi);
        prev_lo = lo;
        prev_hi = hi;
    }
    EXPECT_THROW(uq::confidence_interval(p, 1.0), InvalidArgument);
    EXPECT_THROW(uq::confidence_interval(p, 0.0), InvalidArgument);
}

TEST(Intervals, CoverageUnderGenerativeNigSampling) {
    // Draw sigma^2 ~ IG(alpha, beta), mu ~ N(gamma, sigma^2 / nu), y ~ N(mu, sigma^2).
    const uq::Nig p{0.5, 1.5, 2.5, 0.8};
    std::mt19937_64 eng(123);
    std::gamma_distribution<double> gam(p.alpha, 1.0 / p.beta);
    std::normal_distribution<double> n01;
    const std::vector<double> levels{0.5, 0.9, 0.95};
    std::vector<std::pair<double, double>> iv;
    for (double l : levels) iv.push_back(uq::confidence_interval(p, l));
    std::vector<int> hits(levels.size(), 0);
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const double s2 = 1.0 / gam(eng);
        const double mu = p.gamma + std::sqrt(s2 / p.nu) * n01(eng);
        const double y = mu + std::sqrt(s2) * n01(eng);
        for (std::size_t k = 0; k < levels.size(); ++k) hits[k] += (y >= iv[k].first && y <= iv[k].second);
    }
    for (std::size_t k = 0; k < levels.size(); ++k) {
        EXPECT_NEAR(static_cast<double>(hits[k]) / n, levels[k], 0.005) << "level " << levels[k];
    }
}

TEST(Intervals, SummaryIntervalMatchesNigWhenNothingIsAdded) {
    const uq::Nig p{0.1, 0.8, 3.5, 1.2};
    const auto s = uq::combine_uncertainty(uq::predictive_moments(p), 0.0, 0.0);
    const auto a = uq::confidence_interval(p, 0.9);
    const auto b = uq::confidence_interval(s, 0.9);
    EXPECT_NEAR(a.first, b.first, 1e-12);
    EXPECT_NEAR(a.second, b.second, 1e-12);
}

TEST(CombineUncertainty, AddsToEpistemicOnly) {
    const auto base = uq::predictive_moments(uq::Nig{0.0, 1.0, 2.0, 1.0});
    const auto s = uq::combine_uncertainty(base, 0.25, 0.5);
    EXPECT_DOUBLE_EQ(s.mean, base.mean);
    EXPECT_DOUBLE_EQ(s.sigma2_alea, base.sigma2_alea);
    EXPECT_DOUBLE_EQ(s.sigma2_epis, base.sigma2_epis + 0.75);
    EXPECT_DOUBLE_EQ(s.sigma2_total, 2.75);
    const auto wide = uq::confidence_interval(s, 0.9);
    const auto narrow = uq::confidence_interval(base, 0.9);
    EXPECT_GT(wide.second - wide.first, narrow.second - narrow.first);
    EXPECT_THROW(uq::combine_uncertainty(base, -1e-3, 0.0), InvalidArgument);
}

TEST(McDropout, SinglePassOrZeroRateHasNoVariance) {
    SmallGraph g;
    const auto one = uq::mc_dropout_predict(g.params, g.x, g.nb, g.cfg, 1, 3);
    EXPECT_EQ(one.var.cwiseAbs().maxCoeff(), 0.0);
    auto cfg0 = g.cfg;
    cfg0.dropout = 0.0;
    const auto zero = uq::mc_dropout_predict(g.params, g.x, g.nb, cfg0, 8, 3);
    EXPECT_LT(zero.var.cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_THROW(uq::mc_dropout_predict(g.params, g.x, g.nb, g.cfg, 0, 3), InvalidArgument);
}

TEST(McDropout, ReproducibleAndNonDegenerate) {
    SmallGraph g;
    const auto a = uq::mc_dropout_predict(g.params, g.x, g.nb, g.cfg, 10, 7);
    const auto b = uq::mc_dropout_predict(g.params, g.x, g.nb, g.cfg, 10, 7);
    EXPECT_TRUE((a.mean.array() == b.mean.array()).all());
    EXPECT_TRUE((a.var.array() == b.var.array()).all());
    EXPECT_GT(a.var.maxCoeff(), 0.0);
    EXPECT_EQ(a.passes, 10);
}

TEST(Swag, MomentsOfSimpleSnapshotSets) {
    Eigen::VectorXd theta(3);
    theta << 1.0, -2.0, 0.5;
    const auto same = uq::swag_collect({theta, theta, theta});
    EXPECT_LT((same.mean - theta).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(same.var.cwiseAbs().maxCoeff(), 0.0);
    const auto pm = uq::swag_collect({theta, Eigen::VectorXd(-theta)});
    EXPECT_LT(pm.mean.cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((pm.var - 2.0 * theta.cwiseProduct(theta)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(uq::swag_collect({theta}), InvalidArgument);
    uq::SwagAccumulator acc;
    acc.add(theta);
    EXPECT_THROW(acc.add(Eigen::VectorXd::Zero(2)), InvalidArgument);
}

TEST(Swag, WelfordMatchesTwoPassVariance) {
    Rng rng(9);
    std::vector<Eigen::VectorXd> snaps;
    for (int k = 0; k < 25; ++k) {
        Eigen::VectorXd v(4);
        for (auto& e : v) e = 1e3 + rng.normal();
        snaps.push_back(v);
    }
    const auto post = uq::swag_collect(snaps);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
    for (const auto& s : snaps) mean += s;
    mean /= 25.0;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(4);
    for (const auto& s : snaps) var += (s - mean).cwiseProduct(s - mean);
    var /= 24.0;
    EXPECT_LT((post.mean - mean).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((post.var - var).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Swag, ZeroCovarianceGivesZeroPredictiveVariance) {
    SmallGraph g;
    const Eigen::VectorXd theta = g.params.flatten();
    const auto post = uq::swag_collect({theta, theta});
    const auto m = uq::swag_predict(post, g.params, g.x, g.nb, g.cfg, 5, 1);
    EXPECT_EQ(m.var.cwiseAbs().maxCoeff(), 0.0);
    const auto direct = uq::predict(g.params, g.x, g.nb, g.cfg);
    EXPECT_LT((m.mean - direct.gamma).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Swag, VarianceScaleWidensPredictiveSpread) {
    SmallGraph g;
    const Eigen::VectorXd theta = g.params.flatten();
    Rng rng(11);
    std::vector<Eigen::VectorXd> snaps;
    for (int k = 0; k < 5; ++k) {
        Eigen::VectorXd v = theta;
        for (auto& e : v) e += 0.003 * rng.normal();
        snaps.push_back(v);
    }
    const auto post = uq::swag_collect(snaps);
    const auto v1 = uq::swag_predict(post, g.params, g.x, g.nb, g.cfg, 200, 5, 1.0);
    const auto v4 = uq::swag_predict(post, g.params, g.x, g.nb, g.cfg, 200, 5, 4.0);
    const double ratio = v4.var.sum() / v1.var.sum();
    EXPECT_GE(ratio, 2.0);
    EXPECT_LE(ratio, 8.0);
    const auto again = uq::swag_predict(post, g.params, g.x, g.nb, g.cfg, 200, 5, 1.0);
    EXPECT_TRUE((again.mean.array() == v1.mean.array()).all());
}
