#include <cmath>
#include <numbers>
#include <queue>
#include <vector>

#include <gtest/gtest.h>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/truss/delaunay.hpp"
#include "modalvgae/truss/truss.hpp"

using namespace mvgae;

namespace {

/// Independent breadth-first connectivity check.
bool bfs_connected(const TrussModel& t) {
    const int n = t.n_nodes();
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const auto& [a, b] : t.elements) {
        adj[a].push_back(static_cast<int>(b));
        adj[b].push_back(static_cast<int>(a));
    }
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    int count = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = true;
                ++count;
                q.push(v);
            }
        }
    }
    return count == n;
}

/// One bar along x: node 0 pinned, node 1 free only in x.
TrussModel single_bar(double e, double a, double rho, double len) {
    TrussModel t;
    t.coords.resize(2, 2);
    t.coords << 0.0, 0.0, len, 0.0;
    t.elements = {{0, 1}};
    t.youngs_modulus = Eigen::VectorXd::Constant(1, e);
    t.area = Eigen::VectorXd::Constant(1, a);
    t.density = Eigen::VectorXd::Constant(1, rho);
    t.support_mask = {true, true, false, true};
    return t;
}

}  // namespace

TEST(TrussGeneration, SeedFortyTwoIsConnectedAndInRange) {
    TrussGenConfig cfg;
    const auto t = generate_truss(42, cfg);
    EXPECT_GE(t.n_nodes(), cfg.min_nodes);
    EXPECT_LE(t.n_nodes(), cfg.max_nodes);
    EXPECT_TRUE(bfs_connected(t));
    EXPECT_NO_THROW(t.validate());
}

TEST(TrussGeneration, DeterministicForSameSeed) {
    TrussGenConfig cfg;
    const auto a = generate_truss(42, cfg);
    const auto b = generate_truss(42, cfg);
    ASSERT_EQ(a.n_nodes(), b.n_nodes());
    EXPECT_TRUE((a.coords.array() == b.coords.array()).all());
    EXPECT_EQ(a.elements, b.elements);
    EXPECT_TRUE((a.youngs_modulus.array() == b.youngs_modulus.array()).all());
    EXPECT_TRUE((a.area.array() == b.area.array()).all());
    EXPECT_TRUE((a.density.array() == b.density.array()).all());
    EXPECT_EQ(a.support_mask, b.support_mask);
    EXPECT_EQ(a.rayleigh_a0, b.rayleigh_a0);
    EXPECT_EQ(a.rayleigh_a1, b.rayleigh_a1);
    const auto c = generate_truss(43, cfg);
    EXPECT_FALSE(c.n_nodes() == a.n_nodes() && (c.coords.array() == a.coords.array()).all());
}

TEST(TrussGeneration, DegenerateTrapezoidIsRejected) {
    TrussGenConfig cfg;
    cfg.trapezoid = {geometry::Point{0, 0}, geometry::Point{1, 0}, geometry::Point{2, 0}, geometry::Point{3, 0}};
    EXPECT_THROW(generate_truss(1, cfg), GenerationError);
}

TEST(TrussGeneration, InvalidConfigIsRejected) {
    TrussGenConfig cfg;
    cfg.max_nodes = cfg.min_nodes - 1;
    EXPECT_THROW(generate_truss(1, cfg), InvalidArgument);
    cfg = {};
    cfg.rayleigh_a0 = {0.0, 1.0};
    EXPECT_THROW(generate_truss(1, cfg), InvalidArgument);
}

TEST(TrussGeneration, InvariantsOverManySeeds) {
    TrussGenConfig cfg;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto t = generate_truss(seed, cfg);
        ASSERT_TRUE(bfs_connected(t)) << "seed " << seed;
        const auto sol = modal_analysis(t, cfg.n_modes);
        for (int m = 0; m < cfg.n_modes; ++m) {
            EXPECT_GT(sol.damping[m], cfg.damping_band.lo);
            EXPECT_LT(sol.damping[m], cfg.damping_band.hi);
            if (m > 0) EXPECT_GE(sol.frequencies[m], sol.frequencies[m - 1]);
            EXPECT_NEAR(sol.shapes.col(m).norm(), 1.0, 1e-12);
            Eigen::Index imax;
            sol.shapes.col(m).cwiseAbs().maxCoeff(&imax);
            EXPECT_GT(sol.shapes(imax, m), 0.0);
        }
        for (auto s : cfg.supports) EXPECT_EQ(sol.shapes.row(s).norm(), 0.0);
    }
}

TEST(Assembly, SingleBarMatchesAnalyticValues) {
    const double e = 200e9, a = 1e-3, rho = 7800.0, len = 2.5;
    const auto sys = assemble_system(single_bar(e, a, rho, len));
    ASSERT_EQ(sys.n_dof(), 1);
    EXPECT_NEAR(sys.stiffness(0, 0), e * a / len, 1e-6 * e * a / len);
    EXPECT_NEAR(sys.mass(0, 0), rho * a * len / 2.0, 1e-12);
}

TEST(Assembly, StiffnessIsSymmetricAndMassDiagonal) {
    TrussGenConfig cfg;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto sys = assemble_system(generate_truss(seed, cfg));
        const double asym = (sys.stiffness - sys.stiffness.transpose()).cwiseAbs().maxCoeff();
        EXPECT_LT(asym / sys.stiffness.cwiseAbs().maxCoeff(), 1e-12);
        Eigen::MatrixXd off = sys.mass;
        off.diagonal().setZero();
        EXPECT_EQ(off.cwiseAbs().maxCoeff(), 0.0);
        EXPECT_GT(sys.mass.diagonal().minCoeff(), 0.0);
    }
}

TEST(Assembly, UnsupportedTrussHasRigidBodyModes) {
    auto t = generate_truss(5, TrussGenConfig{});
    std::fill(t.support_mask.begin(), t.support_mask.end(), false);
    const auto sys = assemble_system(t, false);
    EXPECT_EQ(rigid_body_mode_count(sys), 3);
    EXPECT_THROW(assemble_system(t), NumericalError);
}

TEST(Assembly, ZeroLengthElementIsRejected) {
    auto t = single_bar(1.0, 1.0, 1.0, 1.0);
    t.coords.row(1) = t.coords.row(0);
    EXPECT_THROW(assemble_system(t), InvalidArgument);
}

TEST(Eigen, TwoDofChainMatchesCharacteristicRoots) {
    // m = 2, k = 3: omega^2 = k (3 -/+ sqrt 5) / (2 m).
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2) * 2.0;
    Eigen::MatrixXd k(2, 2);
    k << 6.0, -3.0, -3.0, 3.0;
    const auto modes = solve_modes(SystemMatrices::from_matrices(m, k), 2);
    EXPECT_NEAR(modes.omegas[0] * modes.omegas[0], 0.5729490168751576, 1e-12);
    EXPECT_NEAR(modes.omegas[1] * modes.omegas[1], 3.9270509831248424, 1e-12);
}

TEST(Eigen, DecoupledDofsSortedFrequencies) {
    const double tp = 2.0 * std::numbers::pi;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(3, 3);
    k.diagonal() << 9.0 * tp * tp, 1.0 * tp * tp, 4.0 * tp * tp;
    const auto modes = solve_modes(SystemMatrices::from_matrices(Eigen::MatrixXd::Identity(3, 3), k), 3);
    EXPECT_NEAR(modes.frequencies[0], 1.0, 1e-12);
    EXPECT_NEAR(modes.frequencies[1], 2.0, 1e-12);
    EXPECT_NEAR(modes.frequencies[2], 3.0, 1e-12);
}

TEST(Eigen, TooManyModesIsAnError) {
    const auto sys = SystemMatrices::from_matrices(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2));
    EXPECT_THROW(solve_modes(sys, 3), InvalidArgument);
}

TEST(Eigen, ResidualAndMassOrthonormality) {
    const auto sys = assemble_system(generate_truss(11, TrussGenConfig{}));
    const auto modes = solve_modes(sys, 6);
    const auto& v = modes.eigenvectors;
    const Eigen::MatrixXd g = v.transpose() * sys.mass * v;
    EXPECT_LT((g - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-9);
    for (int i = 0; i < 6; ++i) {
        const double w2 = modes.omegas[i] * modes.omegas[i];
        const Eigen::VectorXd r = sys.stiffness * v.col(i) - w2 * sys.mass * v.col(i);
        EXPECT_LT(r.norm() / (sys.stiffness * v.col(i)).norm(), 1e-8);
    }
}

TEST(Rayleigh, Examples) {
    Eigen::VectorXd w(3);
    w << 10.0, 20.0, 40.0;
    EXPECT_TRUE((rayleigh_damping(0.0, 0.0, w).array() == 0.0).all());
    EXPECT_DOUBLE_EQ(rayleigh_damping(2.0 * w[0], 0.0, w)[0], 1.0);
    Eigen::VectorXd w10(1);
    w10 << 10.0;
    EXPECT_NEAR(rayleigh_damping(0.5, 1e-4, w10)[0], 0.0255, 1e-15);
    Eigen::VectorXd bad(1);
    bad << 0.0;
    EXPECT_THROW(rayleigh_damping(1.0, 1.0, bad), InvalidArgument);
}

TEST(Delaunay, EmptyCircumcircleOnRandomPoints) {
    Rng rng(8);
    std::vector<geometry::Point> pts;
    for (int i = 0; i < 40; ++i) pts.emplace_back(rng.uniform(0, 10), rng.uniform(0, 3));
    const auto tris = geometry::delaunay(pts);
    ASSERT_FALSE(tris.empty());
    for (const auto& t : tris) {
        const auto& a = pts[t[0]];
        const auto& b = pts[t[1]];
        const auto& c = pts[t[2]];
        ASSERT_GT(geometry::orient(a, b, c), 0.0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i == t[0] || i == t[1] || i == t[2]) continue;
            EXPECT_LE(geometry::in_circle(a, b, c, pts[i]), 1e-9);
        }
    }
}
