/**
 * @file acceptance.cpp
 * @brief End-to-end acceptance harness. Runs the analytic, gradient and
 *        architecture checks in-process, then drives the real CLI through a
 *        desk-scale generate / train / evaluate / study pipeline and prints
 *        one PASS or FAIL line per criterion.
 *
 * Exit status: 0 when every criterion was evaluated (whatever its verdict),
 * 1 when the harness itself broke (a CLI step crashed, an output was missing).
 * With --strict any FAIL also gives exit status 1.
 */

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

#include "modalvgae/dataset/io.hpp"
#include "modalvgae/eval/metrics.hpp"
#include "modalvgae/eval/pipeline.hpp"
#include "modalvgae/losses/losses.hpp"
#include "modalvgae/model/ures_vgae.hpp"
#include "modalvgae/psd/welch.hpp"
#include "modalvgae/train/checkpoint.hpp"
#include "modalvgae/truss/truss.hpp"
#include "modalvgae/uq/nig.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace mvgae;
using ad::Mat;
using ad::Tape;
using ad::Var;
using MatD = Mat<double>;
using MatF = Mat<float>;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    int id;
    std::string name;
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Collects individual checks for one criterion and remembers the first failure.
class Checks {
public:
    void expect(bool ok, const std::string& what) {
        ++total_;
        if (!ok && first_failure_.empty()) first_failure_ = what;
        failed_ += ok ? 0 : 1;
    }
    bool ok() const { return failed_ == 0; }
    std::string summary() const {
        return ok() ? fmt("%d checks", total_) : fmt("%d of %d checks failed, first: ", failed_, total_) + first_failure_;
    }

private:
    int total_ = 0, failed_ = 0;
    std::string first_failure_;
};

MatD random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& eng, double scale = 1.0) {
    std::normal_distribution<double> n01;
    MatD m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * n01(eng);
    return m;
}

double uniform(std::mt19937_64& eng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }

// ---------------------------------------------------------------------------
// 1: analytic and oracle correctness
// ---------------------------------------------------------------------------

Verdict check_oracles() {
    const auto t0 = Clock::now();
    Checks c;

    // Two-DOF chain, m = 2, k = 3: omega^2 = k (3 -/+ sqrt 5) / (2 m).
    {
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2) * 2.0;
        Eigen::MatrixXd k(2, 2);
        k << 6.0, -3.0, -3.0, 3.0;
        const auto modes = solve_modes(SystemMatrices::from_matrices(m, k), 2);
        const double r1 = 3.0 * (3.0 - std::sqrt(5.0)) / 4.0, r2 = 3.0 * (3.0 + std::sqrt(5.0)) / 4.0;
        c.expect(std::abs(modes.omegas[0] * modes.omegas[0] - r1) / r1 < 1e-9, "2-DOF root 1");
        c.expect(std::abs(modes.omegas[1] * modes.omegas[1] - r2) / r2 < 1e-9, "2-DOF root 2");
    }
    // Eigen residuals on random trusses.
    {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            const auto sys = assemble_system(generate_truss(seed, TrussGenConfig{}));
            const int k = std::min<int>(6, static_cast<int>(sys.mass.rows()));
            const auto modes = solve_modes(sys, k);
            for (int i = 0; i < k; ++i) {
                const Eigen::VectorXd v = modes.eigenvectors.col(i);
                const double w2 = modes.omegas[i] * modes.omegas[i];
                const Eigen::VectorXd kv = sys.stiffness * v;
                worst = std::max(worst, (kv - w2 * sys.mass * v).norm() / kv.norm());
            }
        }
        c.expect(worst < 1e-8, fmt("eigen residual %.3g", worst));
    }
    // Welch: integral of a white-noise PSD matches the variance; a sine peak lands within one bin.
    {
        const double fs = 512.0, sigma2 = 4.0;
        const WelchConfig w;
        const auto f = welch_frequencies(w, fs);
        double worst = 0.0;
        for (int r = 0; r < 20; ++r) {
            std::mt19937_64 eng(5000 + r);
            std::normal_distribution<double> n01;
            Eigen::VectorXd x(16384);
            for (auto& v : x) v = std::sqrt(sigma2) * n01(eng);
            const auto p = welch_psd(x, w, fs);
            double integral = 0.0;
            for (Eigen::Index i = 1; i < p.size(); ++i) integral += 0.5 * (p[i] + p[i - 1]) * (f[i] - f[i - 1]);
            worst = std::max(worst, std::abs(integral / sigma2 - 1.0));
        }
        c.expect(worst < 0.05, fmt("Parseval deviation %.3g", worst));
        for (double f0 : {13.37, 61.9, 140.25}) {
            Eigen::VectorXd x(16384);
            for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * f0 * i / fs);
            const auto p = welch_psd(x, w, fs);
            Eigen::Index peak;
            p.maxCoeff(&peak);
            c.expect(std::abs(f[peak] - f0) <= f[1] - f[0], fmt("sine peak at %.2f Hz", f0));
        }
    }
    // NIG identities and the frozen marginal-likelihood oracle.
    {
        std::mt19937_64 eng(77);
        double worst_sum = 0.0, worst_nll = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const uq::Nig p{uniform(eng, -3, 3), std::exp(uniform(eng, -4, 4)), 1.0 + std::exp(uniform(eng, -4, 3)),
                            std::exp(uniform(eng, -4, 3))};
            const auto s = uq::predictive_moments(p);
            worst_sum = std::max(worst_sum, std::abs(s.sigma2_total - s.sigma2_alea - s.sigma2_epis) / s.sigma2_total);
            const double y = p.gamma + uniform(eng, -4, 4);
            worst_nll = std::max(worst_nll, std::abs(loss::nig_nll(y, p.gamma, p.nu, p.alpha, p.beta) +
                                                     uq::student_t_logpdf(y, p)));
        }
        c.expect(worst_sum < 1e-12, fmt("variance decomposition %.3g", worst_sum));
        c.expect(worst_nll < 1e-8, fmt("nll vs log-density %.3g", worst_nll));
        double worst_oracle = 0.0;
        const auto rows = fixtures::load_nig_oracle();
        for (const auto& r : rows) {
            worst_oracle = std::max(worst_oracle, std::abs(uq::student_t_logpdf(r[0], uq::Nig{r[1], r[2], r[3], r[4]}) - r[5]));
        }
        c.expect(rows.size() == 100 && worst_oracle < 1e-6, fmt("quadrature oracle %.3g", worst_oracle));
    }
    // CRPS of a Gaussian at its mean, against the quadrature value 0.23369497725510907 sigma.
    for (double sigma : {0.01, 0.5, 1.0, 7.0}) {
        const double v = loss::crps_gaussian(1.25, 1.25, sigma);
        c.expect(std::abs(v - 0.23369497725510907 * sigma) < 1e-6, fmt("CRPS at sigma %.2f", sigma));
    }
    // MAC and orthogonality invariances.
    {
        std::mt19937_64 eng(88);
        double worst = 0.0;
        for (int t = 0; t < 200; ++t) {
            const MatD a = random_matrix(12, 4, eng), b = random_matrix(12, 4, eng);
            const double m = loss::mac(a.col(0), b.col(0));
            const double s = uniform(eng, 0.01, 100.0);
            worst = std::max(worst, std::abs(loss::mac(-a.col(0), b.col(0)) - m));
            worst = std::max(worst, std::abs(loss::mac(s * a.col(0), b.col(0)) - m));
            worst = std::max(worst, std::abs(loss::mac(a.col(0), -s * b.col(0)) - m));
            // The same node permutation applied to both shapes.
            std::vector<int> perm(12);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), eng);
            MatD pa(12, 4), pb(12, 4);
            for (int i = 0; i < 12; ++i) {
                pa.row(i) = a.row(perm[i]);
                pb.row(i) = b.row(perm[i]);
            }
            worst = std::max(worst, std::abs(loss::mac(pa.col(0), pb.col(0)) - m));
            const std::vector<double> wts{1, 1, 1, 1};
            worst = std::max(worst, std::abs(loss::mac_loss(pa, pb, wts) - loss::mac_loss(a, b, wts)));
            // Orthogonality: node permutation and column permutation / sign flip.
            const double o = loss::ortho_loss(a);
            MatD cols = a;
            cols.col(0) = a.col(2);
            cols.col(2) = -a.col(0);
            worst = std::max(worst, std::abs(loss::ortho_loss(pa) - o) / std::max(1.0, o));
            worst = std::max(worst, std::abs(loss::ortho_loss(cols) - o) / std::max(1.0, o));
        }
        c.expect(worst < 1e-12, fmt("MAC/orthogonality invariance %.3g", worst));
    }
    const double secs = seconds_since(t0);
    c.expect(secs < 300.0, fmt("runtime %.1f s", secs));
    return {1, "analytic and oracle correctness", c.ok(), c.summary() + fmt(" (%.1f s)", secs)};
}

// ---------------------------------------------------------------------------
// 2: gradient suite
// ---------------------------------------------------------------------------

constexpr double kFdStep = 1e-5;

double rel_error(double analytic, double fd) { return std::abs(analytic - fd) / std::max(std::abs(fd), 1e-3); }

using NigBuilder = std::function<Var<double>(const model::NigVars<double>&)>;

double nig_op_error(const NigBuilder& f, const std::vector<MatD>& p) {
    auto eval = [&](const std::vector<MatD>& q, Tape<double>& t, model::NigVars<double>& v) {
        v = {t.variable(q[0]), t.variable(q[1]), t.variable(q[2]), t.variable(q[3])};
        return f(v);
    };
    Tape<double> tape;
    model::NigVars<double> vars;
    tape.backward(eval(p, tape, vars));
    const std::vector<MatD> g{tape.grad(vars.gamma), tape.grad(vars.nu), tape.grad(vars.alpha), tape.grad(vars.beta)};
    double worst = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        for (Eigen::Index i = 0; i < p[k].size(); ++i) {
            auto plus = p, minus = p;
            plus[k].data()[i] += kFdStep;
            minus[k].data()[i] -= kFdStep;
            Tape<double> t1, t2;
            model::NigVars<double> v1, v2;
            const double fd = (eval(plus, t1, v1).scalar() - eval(minus, t2, v2).scalar()) / (2.0 * kFdStep);
            worst = std::max(worst, rel_error(g[k].data()[i], fd));
        }
    }
    return worst;
}

/// Gradient of a scalar op of one matrix against central differences.
double matrix_op_error(const std::function<Var<double>(Tape<double>&, Var<double>)>& op, const MatD& x) {
    Tape<double> tape;
    auto v = tape.variable(x);
    tape.backward(op(tape, v));
    const MatD g = tape.grad(v);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        MatD a = x, b = x;
        a.data()[i] += kFdStep;
        b.data()[i] -= kFdStep;
        Tape<double> ta, tb;
        const double fa = op(ta, ta.variable(a)).scalar(), fb = op(tb, tb.variable(b)).scalar();
        worst = std::max(worst, rel_error(g.data()[i], (fa - fb) / (2.0 * kFdStep)));
    }
    return worst;
}

Verdict check_gradients() {
    const auto t0 = Clock::now();
    Checks c;
    std::mt19937_64 eng(202);
    constexpr int kNodes = 6, kModes = 2;
    for (int rep = 0; rep < 5; ++rep) {
        MatD nu(1, kModes), al(1, kModes), be(1, kModes);
        for (int k = 0; k < kModes; ++k) {
            nu(0, k) = uniform(eng, 0.3, 3.0);
            al(0, k) = uniform(eng, 1.5, 4.0);
            be(0, k) = uniform(eng, 0.2, 2.0);
        }
        const std::vector<MatD> p{random_matrix(1, kModes, eng), nu, al, be};
        const MatD y = random_matrix(1, kModes, eng);
        const double e1 = nig_op_error([&](const auto& v) { return loss::nig_nll_op(y, v); }, p);
        const double e2 = nig_op_error([&](const auto& v) { return loss::evidential_reg_op(y, v); }, p);
        const double e3 = nig_op_error([&](const auto& v) { return loss::crps_op(y, v); }, p);
        c.expect(e1 < 1e-4, fmt("NIG nll gradient %.3g", e1));
        c.expect(e2 < 1e-4, fmt("evidential regularizer gradient %.3g", e2));
        c.expect(e3 < 1e-4, fmt("CRPS gradient %.3g", e3));

        const MatD phi = random_matrix(kNodes, kModes, eng), truth = random_matrix(kNodes, kModes, eng);
        const std::vector<double> w{1.0, 2.0};
        const double e4 = matrix_op_error([&](Tape<double>&, Var<double> v) { return loss::mac_loss_op(v, truth, w); }, phi);
        const double e5 = matrix_op_error([](Tape<double>&, Var<double> v) { return loss::ortho_loss_op(v); }, phi);
        const MatD lv = random_matrix(1, 4, eng, 0.5);
        const double e6 = matrix_op_error(
            [&](Tape<double>& t, Var<double> mu) { return loss::kl_op(mu, t.variable(lv)); }, random_matrix(1, 4, eng));
        const MatD mu = random_matrix(1, 4, eng);
        const double e7 = matrix_op_error([&](Tape<double>& t, Var<double> l) { return loss::kl_op(t.variable(mu), l); }, lv);
        c.expect(e4 < 1e-4, fmt("MAC loss gradient %.3g", e4));
        c.expect(e5 < 1e-4, fmt("orthogonality gradient %.3g", e5));
        c.expect(e6 < 1e-4 && e7 < 1e-4, fmt("KL gradient %.3g / %.3g", e6, e7));
    }

    // Composite objective with every term active, w.r.t. every model parameter.
    {
        const ModelConfig cfg = fixtures::tiny_model(7, kModes);
        const auto params = model::init_params<double>(cfg, 31);
        const MatD x = random_matrix(kNodes, cfg.in_features, eng);
        std::vector<DirectedEdge> edges;
        for (std::uint32_t i = 0; i < kNodes; ++i) {
            edges.push_back({i, (i + 1) % kNodes});
            edges.push_back({(i + 1) % kNodes, i});
        }
        edges.push_back({0, 3});
        edges.push_back({3, 0});
        const ad::Neighbourhood nb(kNodes, edges);
        loss::Targets<double> tgt;
        tgt.log_freq = random_matrix(1, kModes, eng);
        tgt.log_zeta = random_matrix(1, kModes, eng);
        tgt.phi = random_matrix(kNodes, kModes, eng);
        loss::TermWeights w;
        w.f = 1.0;
        w.zeta = 0.8;
        w.evi = 0.01;
        w.crps = 0.1;
        w.phi = 1.5;
        w.ortho = 0.01;
        w.kl = 1e-3;
        w.mode_weights = {1.0, 2.0};
        auto run = [&](Tape<double>& t, const nn::ParamStore<double>& ps) {
            nn::Binding<double> b(t, ps);
            return loss::total_loss(model::forward(b, x, nb, cfg, {}), tgt, w).total;
        };
        Tape<double> t;
        t.backward(run(t, params));
        nn::Gradients<double> g(params);
        g.accumulate_from(t);
        Eigen::VectorXd analytic(params.size());
        Eigen::Index off = 0;
        for (const auto& v : g.values) {
            analytic.segment(off, v.size()) = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
            off += v.size();
        }
        const Eigen::VectorXd theta = params.flatten();
        double worst = 0.0;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            auto pa = params, pb = params;
            Eigen::VectorXd a = theta, b = theta;
            a[i] += kFdStep;
            b[i] -= kFdStep;
            pa.unflatten(a);
            pb.unflatten(b);
            Tape<double> ta, tb;
            worst = std::max(worst, rel_error(analytic[i], (run(ta, pa).scalar() - run(tb, pb).scalar()) / (2.0 * kFdStep)));
        }
        c.expect(worst < 1e-4, fmt("composite objective gradient %.3g over %ld parameters", worst,
                                   static_cast<long>(theta.size())));
    }
    const double secs = seconds_since(t0);
    c.expect(secs < 120.0, fmt("runtime %.1f s", secs));
    return {2, "gradient suite", c.ok(), c.summary() + fmt(" (%.1f s)", secs)};
}

// ---------------------------------------------------------------------------
// 3: architecture invariants (32-bit)
// ---------------------------------------------------------------------------

std::vector<DirectedEdge> random_connected_edges(int n, std::mt19937_64& eng) {
    std::vector<DirectedEdge> e;
    auto add = [&](std::uint32_t a, std::uint32_t b) {
        e.push_back({a, b});
        e.push_back({b, a});
    };
    for (int i = 1; i < n; ++i) {
        const auto parent = std::uniform_int_distribution<int>(0, i - 1)(eng);
        add(static_cast<std::uint32_t>(parent), static_cast<std::uint32_t>(i));
    }
    for (int k = 0; k < n; ++k) {
        const auto a = std::uniform_int_distribution<int>(0, n - 1)(eng);
        const auto b = std::uniform_int_distribution<int>(0, n - 1)(eng);
        if (a == b) continue;
        bool dup = false;
        for (const auto& x : e) dup = dup || (x[0] == static_cast<std::uint32_t>(a) && x[1] == static_cast<std::uint32_t>(b));
        if (!dup) add(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
    }
    return e;
}

MatF random_features(int n, int width, std::mt19937_64& eng, double scale) {
    std::normal_distribution<float> n01;
    MatF m(n, width);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(scale) * n01(eng);
    return m;
}

Verdict check_architecture() {
    const auto t0 = Clock::now();
    Checks c;
    const ModelConfig cfg;  // the full-size default architecture
    std::mt19937_64 eng(303);

    // Permutation equivariance of the mode shapes, invariance of graph-level outputs.
    double worst_phi = 0.0, worst_graph = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        const auto ps = model::init_params<float>(cfg, 400 + rep);
        const int n = std::uniform_int_distribution<int>(8, 20)(eng);
        const auto edges = random_connected_edges(n, eng);
        const MatF x = random_features(n, cfg.in_features, eng, 1.0);
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), eng);
        std::vector<std::uint32_t> inv(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<std::uint32_t>(i);
        MatF px(n, cfg.in_features);
        for (int i = 0; i < n; ++i) px.row(i) = x.row(perm[i]);
        std::vector<DirectedEdge> pe;
        for (const auto& e : edges) pe.push_back({inv[e[0]], inv[e[1]]});

        Tape<float> t;
        nn::Binding<float> b(t, ps);
        const auto o1 = model::forward(b, x, ad::Neighbourhood(n, edges), cfg, {});
        const auto o2 = model::forward(b, px, ad::Neighbourhood(n, pe), cfg, {});
        for (int i = 0; i < n; ++i) {
            worst_phi = std::max<double>(worst_phi, (o2.phi.value().row(i) - o1.phi.value().row(perm[i])).cwiseAbs().maxCoeff());
        }
        for (const auto& [h1, h2] : {std::pair{&o1.freq, &o2.freq}, std::pair{&o1.zeta, &o2.zeta}}) {
            for (const auto& [a, bb] : {std::pair{h1->gamma, h2->gamma}, std::pair{h1->nu, h2->nu},
                                        std::pair{h1->alpha, h2->alpha}, std::pair{h1->beta, h2->beta}}) {
                worst_graph = std::max<double>(worst_graph, (a.value() - bb.value()).cwiseAbs().maxCoeff());
            }
        }
    }
    c.expect(worst_phi < 1e-5, fmt("mode-shape equivariance %.3g", worst_phi));
    c.expect(worst_graph < 1e-5, fmt("graph-level invariance %.3g", worst_graph));

    // Attention normalization and evidential constraints on random forwards, deterministic and stochastic.
    double worst_attn = 0.0;
    int violations = 0;
    nn::ParamStore<float> ps;
    for (int rep = 0; rep < 1000; ++rep) {
        // Fresh parameters every 50 forwards; input scales span four decades.
        if (rep % 50 == 0) ps = model::init_params<float>(cfg, 900 + rep);
        const int n = std::uniform_int_distribution<int>(8, 20)(eng);
        const auto edges = random_connected_edges(n, eng);
        const double scale = std::exp(uniform(eng, std::log(0.01), std::log(100.0)));
        const MatF x = random_features(n, cfg.in_features, eng, scale);
        Tape<float> t;
        nn::Binding<float> b(t, ps);
        Rng rng(static_cast<std::uint64_t>(rep));
        const model::ForwardOptions opt =
            rep % 2 ? model::ForwardOptions{model::LatentMode::Stochastic, true, &rng} : model::ForwardOptions{};
        const auto out = model::forward(b, x, ad::Neighbourhood(n, edges), cfg, opt);
        worst_attn = std::max(worst_attn, std::abs(out.attention.value().cast<double>().sum() - 1.0));
        for (const auto* h : {&out.freq, &out.zeta}) {
            const bool ok = h->nu.value().allFinite() && h->alpha.value().allFinite() && h->beta.value().allFinite() &&
                            h->gamma.value().allFinite() && h->nu.value().minCoeff() > 0.0f &&
                            h->alpha.value().minCoeff() > 1.0f && h->beta.value().minCoeff() > 0.0f;
            violations += ok ? 0 : 1;
        }
        violations += out.phi.value().allFinite() ? 0 : 1;
    }
    c.expect(worst_attn <= 1e-6, fmt("attention sum deviation %.3g", worst_attn));
    c.expect(violations == 0, fmt("%d evidential-constraint violations in 1000 forwards", violations));
    const double secs = seconds_since(t0);
    return {3, "architecture invariants", c.ok(),
            c.summary() + fmt(" (phi %.2g, graph %.2g, attention %.2g; %.1f s)", worst_phi, worst_graph, worst_attn, secs)};
}

// ---------------------------------------------------------------------------
// Desk-scale pipeline through the CLI
// ---------------------------------------------------------------------------

class HarnessError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Pipeline {
    fs::path work;
    bool reuse = false;
    nlohmann::json timings = nlohmann::json::object();

    /// Runs one CLI step unless --reuse finds its marker; records wall time.
    void step(const std::string& name, const std::string& args, const fs::path& marker) {
        const auto tfile = work / "timings.json";
        if (fs::exists(tfile) && timings.empty()) timings = nlohmann::json::parse(mvgae::detail::read_file(tfile));
        if (reuse && fs::exists(marker) && timings.contains(name)) {
            std::cout << "  [reuse] " << name << " (" << timings[name].get<double>() << " s)" << std::endl;
            return;
        }
        const auto log = work / (name + ".log");
        const std::string cmd = std::string(MODALVGAE_CLI) + " " + args + " --force > " + log.string() + " 2>&1";
        std::cout << "  [run] " << name << std::flush;
        const auto t0 = Clock::now();
        const int rc = std::system(cmd.c_str());
        const double secs = seconds_since(t0);
        std::cout << " " << fmt("%.1f s", secs) << std::endl;
        if (rc != 0) throw HarnessError("step '" + name + "' failed, see " + log.string());
        timings[name] = secs;
        mvgae::detail::write_file(tfile, timings.dump(2));
    }

    double seconds(const std::string& name) const { return timings.at(name).get<double>(); }

    nlohmann::json json(const fs::path& rel) const { return nlohmann::json::parse(mvgae::detail::read_file(work / rel)); }
};

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a)) files.push_back(e.path().filename());
    std::size_t nb = 0;
    for (const auto& e : fs::directory_iterator(b)) nb += e.is_regular_file();
    if (files.size() != nb) {
        why = "file counts differ";
        return false;
    }
    for (const auto& f : files) {
        if (mvgae::detail::read_file(a / f) != mvgae::detail::read_file(b / f)) {
            why = f.string() + " differs";
            return false;
        }
    }
    return true;
}

std::vector<double> condition_series(const nlohmann::json& study, const std::string& model, const char* key) {
    std::vector<double> v;
    for (const auto& cond : study.at("models").at(model)) v.push_back(cond.at("summary").at(key).get<double>());
    return v;
}

std::string join(const std::vector<double>& v, const char* f) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(f, v[i]);
    return s;
}

Verdict check_desk_accuracy(const Pipeline& p) {
    const auto r = p.json("eval/report.json");
    const double mac1 = r.at("modes").at(0).at("mac").at("mean").get<double>();
    const double mac = r.at("summary").at("mean_mac").get<double>();
    const double freq = r.at("summary").at("freq_mae_pct").get<double>();
    const double damp = r.at("summary").at("damp_mae_pct").get<double>();
    const double minutes = (p.seconds("generate") + p.seconds("train") + p.seconds("eval")) / 60.0;
    Checks c;
    c.expect(mac1 >= 0.95, fmt("mode-1 MAC %.4f < 0.95", mac1));
    c.expect(mac >= 0.85, fmt("mean MAC %.4f < 0.85", mac));
    c.expect(freq <= 5.0, fmt("frequency MAE %.3f%% > 5%%", freq));
    c.expect(damp <= 10.0, fmt("damping MAE %.3f%% > 10%%", damp));
    c.expect(minutes <= 45.0, fmt("pipeline took %.1f min > 45", minutes));
    std::vector<double> per_mode;
    for (const auto& m : r.at("modes")) per_mode.push_back(m.at("mac").at("mean").get<double>());
    return {4, "desk-scale accuracy", c.ok(),
            c.summary() + fmt(" | mode-1 MAC %.4f, mean MAC %.4f (per mode %s), freq MAE %.3f%%, damp MAE %.3f%%, %.1f min",
                              mac1, mac, join(per_mode, "%.3f").c_str(), freq, damp, minutes)};
}

/// ECE of intervals from a predictive family when the truths are drawn from that same family.
double synthetic_ece(int n, std::uint64_t seed, bool student) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> n01;
    const auto& levels = eval::default_levels();
    std::vector<std::vector<double>> lo(levels.size()), hi(levels.size());
    std::vector<double> truth;
    for (int i = 0; i < n; ++i) {
        if (student) {
            const uq::Nig p{uniform(eng, -2, 2), uniform(eng, 0.2, 5), uniform(eng, 1.5, 6), uniform(eng, 0.1, 2)};
            std::gamma_distribution<double> gam(p.alpha, 1.0 / p.beta);
            const double s2 = 1.0 / gam(eng);
            truth.push_back(p.gamma + std::sqrt(s2 / p.nu) * n01(eng) + std::sqrt(s2) * n01(eng));
            for (std::size_t l = 0; l < levels.size(); ++l) {
                const auto [a, b] = uq::confidence_interval(p, levels[l]);
                lo[l].push_back(a);
                hi[l].push_back(b);
            }
        } else {
            const double mu = uniform(eng, -2, 2), sigma = uniform(eng, 0.1, 3);
            truth.push_back(mu + sigma * n01(eng));
            const boost::math::normal dist(mu, sigma);
            for (std::size_t l = 0; l < levels.size(); ++l) {
                lo[l].push_back(boost::math::quantile(dist, 0.5 - 0.5 * levels[l]));
                hi[l].push_back(boost::math::quantile(dist, 0.5 + 0.5 * levels[l]));
            }
        }
    }
    return eval::ece(levels, eval::coverage_curve(lo, hi, truth));
}

Verdict check_calibration(const Pipeline& p) {
    Checks c;
    // Average over independent draws: one 500-sample set is itself a random quantity.
    double g = 0.0, t = 0.0, g_worst = 0.0, t_worst = 0.0;
    constexpr int kReps = 20;
    for (int r = 0; r < kReps; ++r) {
        const double eg = synthetic_ece(500, 1000 + r, false), et = synthetic_ece(500, 2000 + r, true);
        g += eg / kReps;
        t += et / kReps;
        g_worst = std::max(g_worst, eg);
        t_worst = std::max(t_worst, et);
    }
    c.expect(g < 0.03, fmt("Gaussian harness ECE %.4f", g));
    c.expect(t < 0.03, fmt("Student-t harness ECE %.4f", t));
    const auto r = p.json("eval/report.json");
    std::vector<double> ef, ez;
    for (const auto& m : r.at("modes")) {
        ef.push_back(m.at("calibration").at("ece_freq").get<double>());
        ez.push_back(m.at("calibration").at("ece_damp").get<double>());
    }
    return {5, "calibration harness", c.ok(),
            c.summary() + fmt(" | synthetic ECE at 500 samples: Gaussian %.4f (worst %.4f), Student-t %.4f (worst %.4f)",
                              g, g_worst, t, t_worst) +
                " | desk model ECE per mode: freq " + join(ef, "%.3f") + ", damping " + join(ez, "%.3f")};
}

Verdict check_noise(const Pipeline& p) {
    const auto s = p.json("noise/study.json");
    const std::string model = s.at("models").begin().key();
    const auto mac = condition_series(s, model, "mean_mac");
    const auto freq = condition_series(s, model, "freq_mae_pct");
    Checks c;
    for (std::size_t i = 1; i < mac.size(); ++i) {
        c.expect(mac[i] <= mac[i - 1] + 0.01, fmt("MAC rises %.4f -> %.4f", mac[i - 1], mac[i]));
        c.expect(freq[i] >= freq[i - 1] - 0.5, fmt("freq MAE falls %.3f -> %.3f", freq[i - 1], freq[i]));
    }
    return {6, "noise-robustness trend", c.ok(),
            c.summary() + " | clean/30/20/10 dB: MAC " + join(mac, "%.4f") + ", freq MAE " + join(freq, "%.3f")};
}

Verdict check_sparsity(const Pipeline& p) {
    const auto s = p.json("sparsity/study.json");
    const std::string model = s.at("models").begin().key();
    const auto mac = condition_series(s, model, "mean_mac");
    // The last condition is 100% (all sensors observed): the full evaluation of the same model.
    const double full = mac.back();
    const std::vector<double> trend(mac.begin(), mac.end() - 1);
    Checks c;
    for (std::size_t i = 1; i < trend.size(); ++i) {
        c.expect(trend[i] >= trend[i - 1] - 0.02, fmt("MAC drops %.4f -> %.4f", trend[i - 1], trend[i]));
    }
    c.expect(std::abs(trend.back() - full) <= 0.02, fmt("95%% MAC %.4f vs full %.4f", trend.back(), full));
    return {7, "sparsity trend", c.ok(),
            c.summary() + " | 5/10/20/30/50/80/95%: MAC " + join(trend, "%.4f") + fmt(", full %.4f", full)};
}

Verdict check_determinism(const Pipeline& p) {
    Checks c;
    std::string why;
    c.expect(same_tree(p.work / "data", p.work / "data_repeat", why), "dataset regeneration: " + why);
    c.expect(mvgae::detail::read_file(p.work / "det_a" / "metrics.csv") ==
                 mvgae::detail::read_file(p.work / "det_b" / "metrics.csv"),
             "deterministic training logs differ");

    // Checkpoint save/load round trip: predictions must match bit for bit.
    const auto ck = train::load_checkpoint(p.work / "ures" / "swa");
    const auto rt_dir = p.work / "roundtrip";
    fs::remove_all(rt_dir);
    train::save_checkpoint(rt_dir, ck);
    const auto ck2 = train::load_checkpoint(rt_dir, ck.model);
    const auto ds = read_dataset(p.work / "data");
    eval::UQConfig uq;
    uq.mc_passes = 3;
    uq.swag_samples = 3;
    bool identical = true;
    for (const auto* s : ds.split("test")) {
        const auto g = prepare<float>(apply_normalization(*s, ds.manifest.norm), TargetTransform{});
        const auto a = eval::predict_graph(ck, g, uq), b = eval::predict_graph(ck2, g, uq);
        identical = identical && (a.mean.array() == b.mean.array()).all() && (a.phi.array() == b.phi.array()).all();
        for (std::size_t q = 0; q < a.summary.size(); ++q) {
            for (std::size_t k = 0; k < a.summary[q].size(); ++k) {
                identical = identical && a.summary[q][k].sigma2_total == b.summary[q][k].sigma2_total;
            }
        }
    }
    c.expect(identical, "checkpoint round trip changed predictions");
    return {8, "engineering determinism", c.ok(), c.summary() + " (dataset bytes, training log, checkpoint round trip)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance harness"};
    std::string work = "acceptance_work";
    bool reuse = false, strict = false;
    app.add_option("--work", work, "Scratch directory for the desk-scale pipeline");
    app.add_flag("--reuse", reuse, "Skip pipeline steps whose outputs already exist");
    app.add_flag("--strict", strict, "Exit non-zero when any criterion fails");
    CLI11_PARSE(app, argc, argv);

    std::vector<Verdict> verdicts;
    std::string lines;
    auto record = [&](Verdict v) {
        const std::string line = "criterion " + std::to_string(v.id) + ": " + (v.pass ? "PASS" : "FAIL") + "  " + v.name +
                                 "  " + v.detail + "\n";
        std::cout << line << std::flush;
        lines += line;
        verdicts.push_back(std::move(v));
    };
    try {
        std::cout << "in-process checks" << std::endl;
        record(check_oracles());
        record(check_gradients());
        record(check_architecture());

        Pipeline p;
        p.work = work;
        p.reuse = reuse;
        if (!reuse) fs::remove_all(p.work);
        fs::create_directories(p.work);
        const std::string w = p.work.string() + "/";
        std::cout << "desk-scale pipeline in " << p.work << std::endl;
        p.step("generate", "generate --out " + w + "data", p.work / "data" / "manifest.json");
        p.step("generate_repeat", "generate --out " + w + "data_repeat", p.work / "data_repeat" / "manifest.json");
        const std::string data = " --data " + w + "data";
        p.step("train", "train" + data + " --out " + w + "ures", p.work / "ures" / "swa" / "ckpt.json");
        p.step("eval", "eval --no-plots --ckpt " + w + "ures/swa" + data + " --out " + w + "eval",
               p.work / "eval" / "report.json");
        p.step("study_noise",
               "study-noise --no-plots --ckpt " + w + "ures/swa" + data + " --snr clean,30,20,10 --out " + w + "noise",
               p.work / "noise" / "study.json");
        p.step("train_masked", "train --model masked" + data + " --out " + w + "masked",
               p.work / "masked" / "swa" / "ckpt.json");
        p.step("study_sparsity",
               "study-sparsity --no-plots --ckpt " + w + "masked/swa" + data +
                   " --fractions 5,10,20,30,50,80,95,100 --out " + w + "sparsity",
               p.work / "sparsity" / "study.json");
        const std::string short_run = " --deterministic --set train.phase_epochs=[2,2,3] --set train.swag_epochs=2";
        p.step("train_det_a", "train" + data + short_run + " --out " + w + "det_a", p.work / "det_a" / "metrics.csv");
        p.step("train_det_b", "train" + data + short_run + " --out " + w + "det_b", p.work / "det_b" / "metrics.csv");

        record(check_desk_accuracy(p));
        record(check_calibration(p));
        record(check_noise(p));
        record(check_sparsity(p));
        record(check_determinism(p));
    } catch (const std::exception& ex) {
        std::cout << "acceptance harness error: " << ex.what() << std::endl;
        return 1;
    }
    const auto passed = std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
    lines += std::to_string(passed) + " of " + std::to_string(verdicts.size()) + " criteria passed\n";
    std::cout << lines.substr(lines.rfind('\n', lines.size() - 2) + 1) << std::flush;
    // ctest hides the output of passing tests, so keep the verdicts next to the pipeline outputs.
    mvgae::detail::write_file(fs::path(work) / "verdicts.txt", lines);
    return strict && passed != static_cast<long>(verdicts.size()) ? 1 : 0;
}
