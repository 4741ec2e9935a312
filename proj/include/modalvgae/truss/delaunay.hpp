#pragma once

/**
 * @file delaunay.hpp
 * @brief Bowyer-Watson Delaunay triangulation of a planar point set.
 *
 * Intended for the small point sets of a single truss (tens of points), so
 * the O(n^2) cavity search is fine.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace mvgae::geometry {

using Point = Eigen::Vector2d;
using Triangle = std::array<std::uint32_t, 3>;
using Edge = std::pair<std::uint32_t, std::uint32_t>;

inline double orient(const Point& a, const Point& b, const Point& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

/// Positive when d lies strictly inside the circumcircle of the CCW triangle abc.
inline double in_circle(const Point& a, const Point& b, const Point& c, const Point& d) {
    const double adx = a.x() - d.x(), ady = a.y() - d.y();
    const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
    const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
    const double ad = adx * adx + ady * ady;
    const double bd = bdx * bdx + bdy * bdy;
    const double cd = cdx * cdx + cdy * cdy;
    return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

/// Triangles (CCW, indices into `pts`) of the Delaunay triangulation.
inline std::vector<Triangle> delaunay(const std::vector<Point>& pts) {
    const auto n = static_cast<std::uint32_t>(pts.size());
    if (n < 3) return {};

    Point lo = pts[0], hi = pts[0];
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double span = std::max((hi - lo).maxCoeff(), 1e-9);
    const Point mid = 0.5 * (lo + hi);

    std::vector<Point> all = pts;
    all.emplace_back(mid.x() - 40.0 * span, mid.y() - 30.0 * span);
    all.emplace_back(mid.x() + 40.0 * span, mid.y() - 30.0 * span);
    all.emplace_back(mid.x(), mid.y() + 40.0 * span);

    std::vector<Triangle> tris{{n, n + 1, n + 2}};
    for (std::uint32_t p = 0; p < n; ++p) {
        std::vector<Triangle> keep;
        std::vector<Edge> boundary;
        keep.reserve(tris.size());
        for (const auto& t : tris) {
            if (in_circle(all[t[0]], all[t[1]], all[t[2]], all[p]) > 0.0) {
                for (int k = 0; k < 3; ++k) boundary.emplace_back(t[k], t[(k + 1) % 3]);
            } else {
                keep.push_back(t);
            }
        }
        // Cavity boundary = edges seen once (shared edges appear in both directions).
        std::vector<Edge> cavity;
        for (const auto& e : boundary) {
            const bool shared = std::any_of(boundary.begin(), boundary.end(), [&](const Edge& o) {
                return o.first == e.second && o.second == e.first;
            });
            if (!shared) cavity.push_back(e);
        }
        for (const auto& e : cavity) {
            Triangle t{e.first, e.second, p};
            if (orient(all[t[0]], all[t[1]], all[t[2]]) < 0.0) std::swap(t[0], t[1]);
            keep.push_back(t);
        }
        tris = std::move(keep);
    }

    std::vector<Triangle> out;
    for (const auto& t : tris) {
        if (t[0] < n && t[1] < n && t[2] < n) out.push_back(t);
    }
    return out;
}

/// Unique undirected edges (i < j) of a triangle list, sorted.
inline std::vector<Edge> triangle_edges(const std::vector<Triangle>& tris) {
    std::set<Edge> edges;
    for (const auto& t : tris) {
        for (int k = 0; k < 3; ++k) {
            auto a = t[k], b = t[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            edges.emplace(a, b);
        }
    }
    return {edges.begin(), edges.end()};
}

/// Point-in-convex-polygon test (CCW polygon), inclusive within `tol`.
inline bool inside_convex(const std::vector<Point>& poly, const Point& p, double tol = 1e-9) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % poly.size()];
        if (orient(a, b, p) < -tol * (b - a).norm()) return false;
    }
    return true;
}

/// Signed area of a polygon (positive for CCW).
inline double polygon_area(const std::vector<Point>& poly) {
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % poly.size()];
        s += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * s;
}

/// Distance from p to segment ab.
inline double segment_distance(const Point& a, const Point& b, const Point& p) {
    const Point ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (a + t * ab - p).norm();
}

}  // namespace mvgae::geometry
