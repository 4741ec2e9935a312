#pragma once

/**
 * @file graph.hpp
 * @brief Graph samples built from a truss, its node PSDs and modal targets;
 *        feature normalization, log target transform and sensor masking.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/rng.hpp"
#include "modalvgae/losses/losses.hpp"
#include "modalvgae/nn/autodiff.hpp"
#include "modalvgae/psd/response.hpp"
#include "modalvgae/truss/truss.hpp"

namespace mvgae {

using DirectedEdge = std::array<std::uint32_t, 2>;

/// Floor added to PSD values before taking log10.
inline constexpr double kPsdEpsilon = 1e-12;
/// Number of coordinate columns appended after the PSD bins.
inline constexpr int kCoordFeatures = 2;

/**
 * One training unit. Arrays are stored in single precision, which is also
 * the on-disk representation, so persistence round trips are exact.
 */
struct GraphSample {
    std::uint32_t id = 0;
    Eigen::MatrixXf coords;          // N x 2
    std::vector<DirectedEdge> edges; // both directions of every member
    Eigen::MatrixXf features;        // N x F: log10 PSD bins, x, y [, observed flag]
    Eigen::VectorXf freq;            // M, Hz
    Eigen::VectorXf zeta;            // M
    Eigen::MatrixXf phi;             // N x M

    int n_nodes() const { return static_cast<int>(coords.rows()); }
    int n_modes() const { return static_cast<int>(freq.size()); }

    void validate() const {
        const auto n = coords.rows();
        if (n < 4) throw InvalidArgument("GraphSample: at least 4 nodes required");
        if (coords.cols() != 2) throw InvalidArgument("GraphSample: coordinates must be N x 2");
        if (features.rows() != n) throw InvalidArgument("GraphSample: feature rows must equal node count");
        if (!features.allFinite()) throw InvalidArgument("GraphSample: non-finite features");
        if (zeta.size() != freq.size() || phi.rows() != n || phi.cols() != freq.size()) {
            throw InvalidArgument("GraphSample: target shapes inconsistent");
        }
        std::vector<std::vector<std::uint32_t>> adj(static_cast<std::size_t>(n));
        for (const auto& e : edges) {
            if (e[0] >= n || e[1] >= n) throw InvalidArgument("GraphSample: edge index out of range");
            if (e[0] == e[1]) throw InvalidArgument("GraphSample: self-loop");
            adj[e[0]].push_back(e[1]);
        }
        for (const auto& e : edges) {
            const auto& back = adj[e[1]];
            if (std::find(back.begin(), back.end(), e[0]) == back.end()) {
                throw InvalidArgument("GraphSample: edge list is not closed under reversal");
            }
        }
    }
};

/// Bidirectional edge list of a truss in element order: (a, b), (b, a), ...
inline std::vector<DirectedEdge> directed_edges(const TrussModel& truss) {
    std::vector<DirectedEdge> out;
    out.reserve(2 * truss.elements.size());
    for (const auto& [a, b] : truss.elements) {
        out.push_back({a, b});
        out.push_back({b, a});
    }
    return out;
}

inline GraphSample build_graph(const TrussModel& truss, const NodePSDMatrix& psd, const ModalSolution& modal,
                               std::uint32_t id = 0) {
    const int n = truss.n_nodes();
    if (psd.values.rows() != n) {
        throw InvalidArgument("build_graph: PSD has " + std::to_string(psd.values.rows()) + " rows for " +
                              std::to_string(n) + " nodes");
    }
    if (modal.shapes.rows() != n || modal.frequencies.size() != modal.shapes.cols() ||
        modal.damping.size() != modal.frequencies.size()) {
        throw InvalidArgument("build_graph: modal solution does not match the truss");
    }
    if (!is_connected(n, truss.elements)) throw InvalidArgument("build_graph: truss graph is disconnected");
    if ((psd.values.array() < 0.0).any()) throw InvalidArgument("build_graph: negative PSD value");

    GraphSample s;
    s.id = id;
    s.coords = truss.coords.cast<float>();
    s.edges = directed_edges(truss);
    const auto f = psd.values.cols();
    s.features.resize(n, f + kCoordFeatures);
    s.features.leftCols(f) = (psd.values.array() + kPsdEpsilon).log10().matrix().cast<float>();
    s.features.rightCols(kCoordFeatures) = s.coords;
    s.freq = modal.frequencies.cast<float>();
    s.zeta = modal.damping.cast<float>();
    s.phi = modal.shapes.cast<float>();
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

struct NormStats {
    static constexpr double kStdFloor = 1e-8;
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    int width() const { return static_cast<int>(mean.size()); }

    void validate() const {
        require(mean.size() == std.size() && mean.size() > 0, "NormStats: mean/std size mismatch");
        require(mean.allFinite() && std.allFinite(), "NormStats: non-finite statistics");
        require((std.array() >= kStdFloor).all(), "NormStats: std below floor");
    }
};

/// Per-feature population mean/std pooled over every node of every sample.
inline NormStats fit_normalization(const std::vector<const GraphSample*>& train) {
    if (train.empty()) throw InvalidArgument("fit_normalization: empty training split");
    const auto width = train.front()->features.cols();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(width);
    double count = 0.0;
    for (const auto* s : train) {
        if (s->features.cols() != width) throw InvalidArgument("fit_normalization: inconsistent feature widths");
        sum += s->features.cast<double>().colwise().sum().transpose();
        count += static_cast<double>(s->features.rows());
    }
    NormStats st;
    st.mean = sum / count;
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(width);
    for (const auto* s : train) {
        const Eigen::MatrixXd c = s->features.cast<double>().rowwise() - st.mean.transpose();
        sq += c.array().square().colwise().sum().matrix().transpose();
    }
    st.std = (sq / count).cwiseSqrt().cwiseMax(NormStats::kStdFloor);
    return st;
}

inline Eigen::MatrixXf apply_normalization(const Eigen::MatrixXf& features, const NormStats& st) {
    if (features.cols() != st.width()) {
        throw InvalidArgument("apply_normalization: feature width " + std::to_string(features.cols()) +
                              " does not match statistics width " + std::to_string(st.width()));
    }
    const Eigen::MatrixXd x = features.cast<double>();
    return ((x.rowwise() - st.mean.transpose()).array().rowwise() / st.std.transpose().array()).matrix().cast<float>();
}

inline GraphSample apply_normalization(const GraphSample& s, const NormStats& st) {
    GraphSample out = s;
    out.features = apply_normalization(s.features, st);
    return out;
}

inline void to_json(nlohmann::json& j, const NormStats& s) {
    j = nlohmann::json{{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
                       {"std", std::vector<double>(s.std.data(), s.std.data() + s.std.size())}};
}

inline void from_json(const nlohmann::json& j, NormStats& s) {
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto d = j.at("std").get<std::vector<double>>();
    s.mean = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    s.std = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
    s.validate();
}

// ---------------------------------------------------------------------------
// Target transform
// ---------------------------------------------------------------------------

/// Natural-log transform of strictly positive targets.
struct TargetTransform {
    std::string kind = "log";

    Eigen::VectorXd forward(const Eigen::VectorXd& y) const {
        check();
        if (!(y.array() > 0.0).all() || !y.allFinite()) {
            throw InvalidArgument("TargetTransform: targets must be finite and strictly positive");
        }
        return y.array().log().matrix();
    }

    Eigen::VectorXd inverse(const Eigen::VectorXd& t) const {
        check();
        return t.array().exp().matrix();
    }

    void check() const {
        if (kind != "log") throw InvalidArgument("TargetTransform: unsupported kind '" + kind + "'");
    }
};

// ---------------------------------------------------------------------------
// Sensor masking
// ---------------------------------------------------------------------------

/// Number of observed nodes for a fraction: ceil(fraction N), at least one.
inline int observed_count(double fraction, int n_nodes) {
    if (!(fraction > 0.0) || !(fraction <= 1.0)) throw InvalidArgument("mask_sensors: fraction must be in (0, 1]");
    const int k = static_cast<int>(std::ceil(fraction * n_nodes - 1e-9));
    return std::clamp(k, 1, n_nodes);
}

/**
 * Zeroes the PSD features (assumed already normalized) of a random subset of
 * nodes and appends an observed flag column. Coordinates, edges and targets
 * are untouched. Input width must be PSD bins + 2 coordinates.
 */
inline GraphSample mask_sensors(const GraphSample& s, double fraction, std::uint64_t seed) {
    const int n = s.n_nodes();
    const int k = observed_count(fraction, n);
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    rng.shuffle(order);

    const auto psd_cols = s.features.cols() - kCoordFeatures;
    if (psd_cols < 1) throw InvalidArgument("mask_sensors: sample has no PSD features");
    GraphSample out = s;
    out.features.resize(n, s.features.cols() + 1);
    out.features.leftCols(s.features.cols()) = s.features;
    out.features.col(s.features.cols()).setZero();
    for (int r = 0; r < n; ++r) {
        const int node = order[static_cast<std::size_t>(r)];
        if (r < k) {
            out.features(node, s.features.cols()) = 1.0f;
        } else {
            out.features.row(node).head(psd_cols).setZero();
        }
    }
    return out;
}

/// Appends an all-ones observed flag (a fully instrumented sample in masked-model format).
inline GraphSample with_observed_flag(const GraphSample& s) {
    GraphSample out = s;
    out.features.resize(s.n_nodes(), s.features.cols() + 1);
    out.features.leftCols(s.features.cols()) = s.features;
    out.features.col(s.features.cols()).setOnes();
    return out;
}

// ---------------------------------------------------------------------------
// Model-ready view
// ---------------------------------------------------------------------------

/// Normalized features, neighbourhood lists and log-space targets of one sample.
template <class T>
struct PreparedGraph {
    std::uint32_t id = 0;
    ad::Mat<T> features;
    ad::Neighbourhood nb{0, {}};
    loss::Targets<T> targets;
};

/// Builds the model input from an already normalized (and optionally masked) sample.
template <class T>
PreparedGraph<T> prepare(const GraphSample& s, const TargetTransform& tf) {
    PreparedGraph<T> g;
    g.id = s.id;
    g.features = s.features.cast<T>();
    g.nb = ad::Neighbourhood(s.n_nodes(), s.edges);
    g.targets.log_freq = tf.forward(s.freq.cast<double>()).transpose().cast<T>();
    g.targets.log_zeta = tf.forward(s.zeta.cast<double>()).transpose().cast<T>();
    g.targets.phi = s.phi.cast<T>();
    return g;
}

}  // namespace mvgae
