#pragma once

/**
 * @file truss.hpp
 * @brief Random planar truss generation and finite-element modal analysis.
 *
 * Bars carry axial load only; each node has two translational DOFs
 * (x, y). The mass matrix is lumped. Supports are pins, i.e. both DOFs of
 * a supported node are eliminated from the system.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/rng.hpp"
#include "modalvgae/truss/delaunay.hpp"

namespace mvgae {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    bool positive() const { return lo > 0.0 && hi >= lo; }
};

struct TrussGenConfig {
    /// Corners in counter-clockwise order, meters.
    std::array<geometry::Point, 4> trapezoid{geometry::Point{0.0, 0.0}, geometry::Point{10.0, 0.0},
                                             geometry::Point{8.0, 3.0}, geometry::Point{2.0, 3.0}};
    int min_nodes = 8;
    int max_nodes = 30;
    Range youngs_modulus{180e9, 220e9};  // Pa
    Range area{5e-4, 2e-3};              // m^2
    Range density{7600.0, 8100.0};       // kg/m^3
    Range rayleigh_a0{0.2, 4.0};         // 1/s, sampled log-uniformly
    Range rayleigh_a1{2e-6, 6e-5};       // s, sampled log-uniformly
    /// Damping ratios of the first n_modes must fall in this band.
    Range damping_band{0.005, 0.05};
    /// Node indices pinned in both directions. Nodes 0 and 1 are the bottom corners.
    std::vector<std::uint32_t> supports{0, 1};
    int n_modes = 4;
    /// Trusses whose n_modes-th frequency exceeds this are resampled (0 disables).
    double max_frequency_hz = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        require(min_nodes >= 4, "TrussGenConfig: min_nodes must be >= 4");
        require(max_nodes >= min_nodes, "TrussGenConfig: max_nodes < min_nodes");
        require(n_modes >= 1, "TrussGenConfig: n_modes must be >= 1");
        require(youngs_modulus.positive() && area.positive() && density.positive(),
                "TrussGenConfig: material ranges must be strictly positive");
        require(rayleigh_a0.positive() && rayleigh_a1.positive(),
                "TrussGenConfig: Rayleigh coefficient ranges must be strictly positive");
        require(damping_band.positive() && damping_band.hi < 1.0,
                "TrussGenConfig: damping band must lie in (0, 1)");
        require(supports.size() >= 2, "TrussGenConfig: at least two supported nodes are required");
        for (auto s : supports) {
            require(static_cast<int>(s) < min_nodes, "TrussGenConfig: support index beyond node count");
        }
        require(max_frequency_hz >= 0.0, "TrussGenConfig: max_frequency_hz must be >= 0");
    }
};

struct TrussModel {
    Eigen::MatrixX2d coords;  // N x 2, meters
    std::vector<std::pair<std::uint32_t, std::uint32_t>> elements;
    Eigen::VectorXd youngs_modulus;  // per element, Pa
    Eigen::VectorXd area;            // per element, m^2
    Eigen::VectorXd density;         // per element, kg/m^3
    std::vector<bool> support_mask;  // 2N, true = DOF fixed
    double rayleigh_a0 = 0.0;
    double rayleigh_a1 = 0.0;

    int n_nodes() const { return static_cast<int>(coords.rows()); }
    int n_elements() const { return static_cast<int>(elements.size()); }

    double element_length(std::size_t e) const {
        const auto [i, j] = elements[e];
        return (coords.row(j) - coords.row(i)).norm();
    }

    /// Throws InvalidArgument on index, duplicate, or zero-length violations.
    void validate() const;
};

/// True when every node is reachable from node 0 through the element graph.
inline bool is_connected(int n_nodes, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
    if (n_nodes == 0) return true;
    std::vector<std::vector<std::uint32_t>> adj(static_cast<std::size_t>(n_nodes));
    for (auto [i, j] : edges) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    std::vector<bool> seen(static_cast<std::size_t>(n_nodes), false);
    std::queue<std::uint32_t> q;
    q.push(0);
    seen[0] = true;
    int count = 1;
    while (!q.empty()) {
        const auto u = q.front();
        q.pop();
        for (auto v : adj[u]) {
            if (!seen[v]) {
                seen[v] = true;
                ++count;
                q.push(v);
            }
        }
    }
    return count == n_nodes;
}

inline void TrussModel::validate() const {
    const int n = n_nodes();
    const auto ne = elements.size();
    require(n >= 2, "TrussModel: needs at least two nodes");
    require(youngs_modulus.size() == static_cast<Eigen::Index>(ne) &&
                area.size() == static_cast<Eigen::Index>(ne) && density.size() == static_cast<Eigen::Index>(ne),
            "TrussModel: per-element property arrays must match element count");
    require(support_mask.size() == static_cast<std::size_t>(2 * n), "TrussModel: support mask must have 2N entries");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (std::size_t e = 0; e < ne; ++e) {
        auto [i, j] = elements[e];
        require(static_cast<int>(i) < n && static_cast<int>(j) < n, "TrussModel: element index out of range");
        require(i != j, "TrussModel: element connects a node to itself");
        require(element_length(e) > 0.0, "TrussModel: zero-length element");
        seen.emplace_back(std::min(i, j), std::max(i, j));
    }
    std::sort(seen.begin(), seen.end());
    require(std::adjacent_find(seen.begin(), seen.end()) == seen.end(), "TrussModel: duplicate element");
    require(is_connected(n, elements), "TrussModel: element graph is disconnected");
}

struct SystemMatrices {
    Eigen::MatrixXd mass;       // reduced, kg
    Eigen::MatrixXd stiffness;  // reduced, N/m
    /// For each retained DOF: (node, direction) with direction 0 = x, 1 = y.
    std::vector<std::pair<int, int>> dof_owner;
    int n_nodes = 0;

    int n_dof() const { return static_cast<int>(mass.rows()); }

    /// Wraps raw matrices with a trivial DOF map (one y-DOF per node).
    static SystemMatrices from_matrices(Eigen::MatrixXd m, Eigen::MatrixXd k) {
        require(m.rows() == m.cols() && k.rows() == k.cols() && m.rows() == k.rows(),
                "SystemMatrices: mass and stiffness must be square and equal size");
        SystemMatrices s;
        s.mass = std::move(m);
        s.stiffness = std::move(k);
        s.n_nodes = static_cast<int>(s.mass.rows());
        for (int i = 0; i < s.n_nodes; ++i) s.dof_owner.emplace_back(i, 1);
        return s;
    }
};

/// Number of near-zero eigenvalues of the reduced stiffness (rigid-body modes / mechanisms).
inline int rigid_body_mode_count(const SystemMatrices& sys, double rel_tol = 1e-9) {
    if (sys.n_dof() == 0) return 0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sys.stiffness, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    int count = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] <= rel_tol * scale) ++count;
    }
    return count;
}

/**
 * Assembles the lumped-mass bar system with supported DOFs eliminated.
 *
 * With `require_stable` set, a reduced stiffness that still admits
 * rigid-body motion is rejected with a NumericalError.
 */
inline SystemMatrices assemble_system(const TrussModel& truss, bool require_stable = true) {
    const int n = truss.n_nodes();
    require(truss.support_mask.size() == static_cast<std::size_t>(2 * n), "assemble_system: bad support mask");
    std::vector<int> reduced(static_cast<std::size_t>(2 * n), -1);
    SystemMatrices sys;
    sys.n_nodes = n;
    for (int d = 0; d < 2 * n; ++d) {
        if (!truss.support_mask[static_cast<std::size_t>(d)]) {
            reduced[static_cast<std::size_t>(d)] = static_cast<int>(sys.dof_owner.size());
            sys.dof_owner.emplace_back(d / 2, d % 2);
        }
    }
    const int nd = static_cast<int>(sys.dof_owner.size());
    sys.mass = Eigen::MatrixXd::Zero(nd, nd);
    sys.stiffness = Eigen::MatrixXd::Zero(nd, nd);

    for (std::size_t e = 0; e < truss.elements.size(); ++e) {
        const auto [i, j] = truss.elements[e];
        require(static_cast<int>(i) < n && static_cast<int>(j) < n, "assemble_system: element index out of range");
        const Eigen::Vector2d dx = truss.coords.row(j) - truss.coords.row(i);
        const double len = dx.norm();
        if (!(len > 0.0)) throw InvalidArgument("assemble_system: zero-length element " + std::to_string(e));
        const double c = dx.x() / len;
        const double s = dx.y() / len;
        const double k = truss.youngs_modulus[static_cast<Eigen::Index>(e)] * truss.area[static_cast<Eigen::Index>(e)] / len;
        const double m_half = 0.5 * truss.density[static_cast<Eigen::Index>(e)] * truss.area[static_cast<Eigen::Index>(e)] * len;

        const std::array<int, 4> gdof{static_cast<int>(2 * i), static_cast<int>(2 * i + 1), static_cast<int>(2 * j),
                                      static_cast<int>(2 * j + 1)};
        const std::array<double, 4> dir{-c, -s, c, s};
        for (int a = 0; a < 4; ++a) {
            const int ra = reduced[static_cast<std::size_t>(gdof[a])];
            if (ra < 0) continue;
            sys.mass(ra, ra) += m_half;
            for (int b = 0; b < 4; ++b) {
                const int rb = reduced[static_cast<std::size_t>(gdof[b])];
                if (rb < 0) continue;
                sys.stiffness(ra, rb) += k * dir[a] * dir[b];
            }
        }
    }
    if (!sys.mass.allFinite() || !sys.stiffness.allFinite()) {
        throw NumericalError("assemble_system: non-finite matrix entries");
    }
    if (require_stable) {
        if (nd == 0) throw NumericalError("assemble_system: no free DOFs");
        if (sys.mass.diagonal().minCoeff() <= 0.0) {
            throw NumericalError("assemble_system: free DOF without mass (node not attached to any element)");
        }
        if (const int r = rigid_body_mode_count(sys); r > 0) {
            throw NumericalError("assemble_system: insufficient supports, " + std::to_string(r) +
                                 " rigid-body mode(s) remain");
        }
    }
    return sys;
}

/// Eigenpairs of K phi = omega^2 M phi, ascending, M-orthonormal eigenvectors.
struct ModeSet {
    Eigen::VectorXd omegas;        // rad/s
    Eigen::VectorXd frequencies;   // Hz
    Eigen::MatrixXd eigenvectors;  // n_dof x n_modes
};

inline ModeSet solve_modes(const SystemMatrices& sys, int n_modes) {
    const int nd = sys.n_dof();
    require(n_modes >= 1, "solve_modes: n_modes must be >= 1");
    if (n_modes > nd) {
        throw InvalidArgument("solve_modes: requested " + std::to_string(n_modes) + " modes but system has " +
                              std::to_string(nd) + " DOFs");
    }
    if (!sys.mass.allFinite() || !sys.stiffness.allFinite()) {
        throw NumericalError("solve_modes: non-finite matrix entries");
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(sys.stiffness, sys.mass);
    if (es.info() != Eigen::Success) throw NumericalError("solve_modes: eigen decomposition failed");
    ModeSet out;
    out.omegas.resize(n_modes);
    out.frequencies.resize(n_modes);
    out.eigenvectors = es.eigenvectors().leftCols(n_modes);
    for (int m = 0; m < n_modes; ++m) {
        const double lambda = es.eigenvalues()[m];
        if (!(lambda > 0.0)) throw NumericalError("solve_modes: non-positive eigenvalue (rigid-body mode)");
        out.omegas[m] = std::sqrt(lambda);
        out.frequencies[m] = out.omegas[m] / (2.0 * std::numbers::pi);
    }
    return out;
}

/**
 * Per-node scalar mode shapes: the vertical component of each node, zero
 * for eliminated DOFs. Columns are unit-normalized and the largest-magnitude
 * entry of each column is made positive.
 */
inline Eigen::MatrixXd node_shapes(const SystemMatrices& sys, const Eigen::MatrixXd& eigenvectors) {
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(sys.n_nodes, eigenvectors.cols());
    for (int r = 0; r < sys.n_dof(); ++r) {
        const auto [node, dir] = sys.dof_owner[static_cast<std::size_t>(r)];
        if (dir == 1) phi.row(node) = eigenvectors.row(r);
    }
    for (Eigen::Index m = 0; m < phi.cols(); ++m) {
        const double nrm = phi.col(m).norm();
        if (!(nrm > 0.0)) throw NumericalError("node_shapes: mode has no vertical component");
        phi.col(m) /= nrm;
        Eigen::Index imax = 0;
        phi.col(m).cwiseAbs().maxCoeff(&imax);
        if (phi(imax, m) < 0.0) phi.col(m) = -phi.col(m);
    }
    return phi;
}

/// Rayleigh modal damping: a0/(2 w) + a1 w / 2.
inline Eigen::VectorXd rayleigh_damping(double a0, double a1, const Eigen::VectorXd& omegas) {
    Eigen::VectorXd zeta(omegas.size());
    for (Eigen::Index m = 0; m < omegas.size(); ++m) {
        require(omegas[m] > 0.0, "rayleigh_damping: angular frequencies must be positive");
        zeta[m] = a0 / (2.0 * omegas[m]) + 0.5 * a1 * omegas[m];
    }
    return zeta;
}

/// True when every ratio lies strictly inside (lo, hi).
inline bool damping_admissible(const Eigen::VectorXd& zeta, double lo = 0.0, double hi = 1.0) {
    return (zeta.array() > lo).all() && (zeta.array() < hi).all();
}

struct ModalSolution {
    Eigen::VectorXd frequencies;  // Hz, ascending
    Eigen::VectorXd omegas;       // rad/s
    Eigen::VectorXd damping;      // dimensionless
    Eigen::MatrixXd shapes;       // N x M, unit columns

    int n_modes() const { return static_cast<int>(frequencies.size()); }
};

inline ModalSolution modal_analysis(const TrussModel& truss, int n_modes) {
    const auto sys = assemble_system(truss);
    const auto modes = solve_modes(sys, n_modes);
    ModalSolution sol;
    sol.frequencies = modes.frequencies;
    sol.omegas = modes.omegas;
    sol.damping = rayleigh_damping(truss.rayleigh_a0, truss.rayleigh_a1, modes.omegas);
    sol.shapes = node_shapes(sys, modes.eigenvectors);
    return sol;
}

namespace detail {

inline double log_uniform(Rng& rng, Range r) {
    return std::exp(rng.uniform(std::log(r.lo), std::log(r.hi)));
}

/// Rejection-samples a point set; returns false if spacing could not be met.
inline bool sample_nodes(Rng& rng, const TrussGenConfig& cfg, int n_total, std::vector<geometry::Point>& pts) {
    const std::vector<geometry::Point> poly(cfg.trapezoid.begin(), cfg.trapezoid.end());
    const double area = geometry::polygon_area(poly);
    double spacing = 0.55 * std::sqrt(area / n_total);
    pts.assign(poly.begin(), poly.end());

    const int n_free = n_total - 4;
    const int n_bottom = static_cast<int>(rng.uniform_int(0, n_free / 3));
    const int n_top = static_cast<int>(rng.uniform_int(0, n_free / 3));
    const int n_interior = n_free - n_bottom - n_top;

    auto far_enough = [&](const geometry::Point& p) {
        return std::all_of(pts.begin(), pts.end(), [&](const geometry::Point& q) { return (p - q).norm() >= spacing; });
    };
    auto place_on_edge = [&](const geometry::Point& a, const geometry::Point& b, int count) {
        for (int k = 0; k < count; ++k) {
            bool placed = false;
            for (int tries = 0; tries < 200 && !placed; ++tries) {
                const geometry::Point p = a + rng.uniform(0.05, 0.95) * (b - a);
                if (far_enough(p)) {
                    pts.push_back(p);
                    placed = true;
                }
            }
            if (!placed) return false;
        }
        return true;
    };
    if (!place_on_edge(poly[0], poly[1], n_bottom)) return false;
    if (!place_on_edge(poly[3], poly[2], n_top)) return false;

    Eigen::Vector2d lo = poly[0], hi = poly[0];
    for (const auto& p : poly) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    for (int k = 0; k < n_interior; ++k) {
        bool placed = false;
        for (int tries = 0; tries < 500 && !placed; ++tries) {
            const geometry::Point p{rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y())};
            if (!geometry::inside_convex(poly, p)) continue;
            bool clear = true;
            for (std::size_t e = 0; e < poly.size() && clear; ++e) {
                clear = geometry::segment_distance(poly[e], poly[(e + 1) % poly.size()], p) >= 0.5 * spacing;
            }
            if (clear && far_enough(p)) {
                pts.push_back(p);
                placed = true;
            }
        }
        if (!placed) return false;
    }
    return true;
}

/// Delaunay edges with degenerate triangles, out-of-domain edges, and
/// edges passing through a third node removed.
inline std::vector<geometry::Edge> truss_edges(const std::vector<geometry::Point>& pts,
                                               const std::vector<geometry::Point>& poly) {
    const double area = std::abs(geometry::polygon_area(poly));
    auto tris = geometry::delaunay(pts);
    std::erase_if(tris, [&](const geometry::Triangle& t) {
        return std::abs(0.5 * geometry::orient(pts[t[0]], pts[t[1]], pts[t[2]])) < 1e-6 * area;
    });
    auto edges = geometry::triangle_edges(tris);
    const double tol = 1e-6 * std::sqrt(area);
    std::erase_if(edges, [&](const geometry::Edge& e) {
        const geometry::Point mid = 0.5 * (pts[e.first] + pts[e.second]);
        if (!geometry::inside_convex(poly, mid, 1e-6)) return true;
        for (std::uint32_t k = 0; k < pts.size(); ++k) {
            if (k == e.first || k == e.second) continue;
            if (geometry::segment_distance(pts[e.first], pts[e.second], pts[k]) < tol) return true;
        }
        return false;
    });
    return edges;
}

}  // namespace detail

/**
 * Generates a random connected, statically stable truss whose first
 * cfg.n_modes damping ratios lie in cfg.damping_band.
 *
 * Deterministic in (seed, cfg). Throws GenerationError for a degenerate
 * trapezoid or when 100 geometry attempts fail.
 */
inline TrussModel generate_truss(std::uint64_t seed, const TrussGenConfig& cfg) {
    cfg.validate();
    const std::vector<geometry::Point> poly(cfg.trapezoid.begin(), cfg.trapezoid.end());
    const double area = geometry::polygon_area(poly);
    if (!(area > 1e-12)) throw GenerationError("generate_truss: trapezoid is degenerate (non-positive area)");
    for (std::size_t i = 0; i < poly.size(); ++i) {
        if (geometry::orient(poly[i], poly[(i + 1) % 4], poly[(i + 2) % 4]) <= 0.0) {
            throw GenerationError("generate_truss: trapezoid corners must be convex and counter-clockwise");
        }
    }

    constexpr int kMaxAttempts = 100;
    constexpr int kMaxDampingDraws = 50;
    Rng rng(seed);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const int n_total = static_cast<int>(rng.uniform_int(cfg.min_nodes, cfg.max_nodes));
        std::vector<geometry::Point> pts;
        if (!detail::sample_nodes(rng, cfg, n_total, pts)) continue;
        const auto edges = detail::truss_edges(pts, poly);

        TrussModel t;
        t.coords.resize(n_total, 2);
        for (int i = 0; i < n_total; ++i) t.coords.row(i) = pts[static_cast<std::size_t>(i)].transpose();
        t.elements.assign(edges.begin(), edges.end());
        if (!is_connected(n_total, t.elements)) continue;

        const auto ne = static_cast<Eigen::Index>(t.elements.size());
        t.youngs_modulus = Eigen::VectorXd::Constant(ne, rng.uniform(cfg.youngs_modulus.lo, cfg.youngs_modulus.hi));
        t.area = Eigen::VectorXd::Constant(ne, rng.uniform(cfg.area.lo, cfg.area.hi));
        t.density = Eigen::VectorXd::Constant(ne, rng.uniform(cfg.density.lo, cfg.density.hi));
        t.support_mask.assign(static_cast<std::size_t>(2 * n_total), false);
        for (auto s : cfg.supports) {
            t.support_mask[2 * s] = true;
            t.support_mask[2 * s + 1] = true;
        }

        ModeSet modes;
        try {
            const auto sys = assemble_system(t);
            modes = solve_modes(sys, cfg.n_modes);
            (void)node_shapes(sys, modes.eigenvectors);
        } catch (const Error&) {
            continue;
        }
        if (cfg.max_frequency_hz > 0.0 && modes.frequencies[cfg.n_modes - 1] > cfg.max_frequency_hz) continue;

        for (int draw = 0; draw < kMaxDampingDraws; ++draw) {
            const double a0 = detail::log_uniform(rng, cfg.rayleigh_a0);
            const double a1 = detail::log_uniform(rng, cfg.rayleigh_a1);
            const auto zeta = rayleigh_damping(a0, a1, modes.omegas);
            if (damping_admissible(zeta, cfg.damping_band.lo, cfg.damping_band.hi)) {
                t.rayleigh_a0 = a0;
                t.rayleigh_a1 = a1;
                t.validate();
                return t;
            }
        }
    }
    throw GenerationError("generate_truss: no valid truss found after 100 attempts (seed " + std::to_string(seed) +
                          ")");
}

}  // namespace mvgae
