#pragma once

/**
 * @file svg.hpp
 * @brief Minimal SVG chart primitives and the report figure set.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "modalvgae/dataset/graph.hpp"
#include "modalvgae/dataset/io.hpp"
#include "modalvgae/eval/metrics.hpp"

namespace mvgae::plot {

inline std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
            case '&': o += "&amp;"; break;
            case '<': o += "&lt;"; break;
            case '>': o += "&gt;"; break;
            case '"': o += "&quot;"; break;
            default: o += c;
        }
    }
    return o;
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    return colors[i % 6];
}

/// A canvas holding a grid of panels, each with its own data-to-pixel mapping.
class Canvas {
public:
    Canvas(int width, int height) : w_(width), h_(height) {}

    struct Panel {
        double x0, y0, pw, ph;               // pixel frame
        double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
        double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * pw; }
        double py(double y) const { return y0 + ph - (y - ymin) / (ymax - ymin) * ph; }
    };

    Panel panel(int row, int col, int rows, int cols, double xmin, double xmax, double ymin, double ymax) const {
        const double cw = static_cast<double>(w_) / cols, chh = static_cast<double>(h_ - 30) / rows;
        Panel p{col * cw + 55, 30 + row * chh + 25, cw - 75, chh - 65};
        if (!(xmax > xmin)) xmax = xmin + 1;
        if (!(ymax > ymin)) ymax = ymin + 1;
        p.xmin = xmin;
        p.xmax = xmax;
        p.ymin = ymin;
        p.ymax = ymax;
        return p;
    }

    void title(const std::string& t) { text(w_ / 2.0, 20, t, 15, "middle", "bold"); }

    void axes(const Panel& p, const std::string& xlabel, const std::string& ylabel, const std::string& caption) {
        os_ << "<rect x='" << num(p.x0) << "' y='" << num(p.y0) << "' width='" << num(p.pw) << "' height='" << num(p.ph)
            << "' fill='none' stroke='#333'/>\n";
        for (int i = 0; i <= 4; ++i) {
            const double xv = p.xmin + (p.xmax - p.xmin) * i / 4.0;
            const double yv = p.ymin + (p.ymax - p.ymin) * i / 4.0;
            text(p.px(xv), p.y0 + p.ph + 14, num(xv), 10, "middle");
            text(p.x0 - 4, p.py(yv) + 3, num(yv), 10, "end");
        }
        text(p.x0 + p.pw / 2, p.y0 + p.ph + 30, xlabel, 11, "middle");
        os_ << "<text x='" << num(p.x0 - 42) << "' y='" << num(p.y0 + p.ph / 2) << "' font-size='11' text-anchor='middle'"
            << " transform='rotate(-90 " << num(p.x0 - 42) << ' ' << num(p.y0 + p.ph / 2) << ")'>" << esc(ylabel)
            << "</text>\n";
        text(p.x0 + p.pw / 2, p.y0 - 6, caption, 12, "middle", "bold");
    }

    void line(const Panel& p, double x1, double y1, double x2, double y2, const std::string& color,
              double width = 1.0, const std::string& dash = "") {
        os_ << "<line x1='" << num(p.px(x1)) << "' y1='" << num(p.py(y1)) << "' x2='" << num(p.px(x2)) << "' y2='"
            << num(p.py(y2)) << "' stroke='" << color << "' stroke-width='" << num(width) << "'";
        if (!dash.empty()) os_ << " stroke-dasharray='" << dash << "'";
        os_ << "/>\n";
    }

    void rect(const Panel& p, double xa, double ya, double xb, double yb, const std::string& fill,
              double opacity = 1.0) {
        const double l = std::min(p.px(xa), p.px(xb)), r = std::max(p.px(xa), p.px(xb));
        const double t = std::min(p.py(ya), p.py(yb)), b = std::max(p.py(ya), p.py(yb));
        os_ << "<rect x='" << num(l) << "' y='" << num(t) << "' width='" << num(r - l) << "' height='" << num(b - t)
            << "' fill='" << fill << "' fill-opacity='" << num(opacity) << "' stroke='#222' stroke-width='0.4'/>\n";
    }

    void dot(const Panel& p, double x, double y, const std::string& color, double r = 2.5) {
        os_ << "<circle cx='" << num(p.px(x)) << "' cy='" << num(p.py(y)) << "' r='" << num(r) << "' fill='" << color
            << "' fill-opacity='0.7'/>\n";
    }

    void text(double x, double y, const std::string& t, int size = 11, const std::string& anchor = "start",
              const std::string& weight = "normal", const std::string& color = "#000") {
        os_ << "<text x='" << num(x) << "' y='" << num(y) << "' font-size='" << size << "' text-anchor='" << anchor
            << "' font-weight='" << weight << "' fill='" << color << "'>" << esc(t) << "</text>\n";
    }

    std::string str() const {
        std::ostringstream o;
        o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w_ << "' height='" << h_
          << "' font-family='sans-serif'>\n<rect width='100%' height='100%' fill='white'/>\n"
          << os_.str() << "</svg>\n";
        return o.str();
    }

    void save(const std::filesystem::path& path) const { mvgae::detail::write_file(path, str()); }

private:
    int w_, h_;
    std::ostringstream os_;
};

namespace detail {

inline std::pair<double, double> range_of(const std::vector<double>& v, double pad = 0.05) {
    if (v.empty()) return {0.0, 1.0};
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    double a = *lo, b = *hi;
    if (a == b) {
        a -= 0.5;
        b += 0.5;
    }
    const double d = (b - a) * pad;
    return {a - d, b + d};
}

inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - i;
    return i + 1 < v.size() ? v[i] * (1 - f) + v[i + 1] * f : v[i];
}

inline std::vector<double> per_mode(const eval::EvalReport& r, int k, int which) {
    std::vector<double> out;
    for (const auto& s : r.samples) {
        switch (which) {
            case 0: out.push_back(100.0 * (s.pred_freq[k] - s.true_freq[k]) / s.true_freq[k]); break;
            case 1: out.push_back(100.0 * (s.pred_damp[k] - s.true_damp[k]) / s.true_damp[k]); break;
            default: out.push_back(s.mac[k]);
        }
    }
    return out;
}

}  // namespace detail

/// Signed relative error histograms: one row for frequency, one for damping.
inline Canvas error_histograms(const eval::EvalReport& r, int bins = 20) {
    const int m = r.n_modes;
    Canvas c(280 * m, 560);
    c.title("Signed relative error distributions");
    for (int q = 0; q < 2; ++q) {
        for (int k = 0; k < m; ++k) {
            const auto v = detail::per_mode(r, k, q);
            auto [lo, hi] = detail::range_of(v, 0.02);
            std::vector<int> counts(static_cast<std::size_t>(bins), 0);
            for (double x : v) {
                auto b = static_cast<int>((x - lo) / (hi - lo) * bins);
                counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
            }
            const double top = *std::max_element(counts.begin(), counts.end()) * 1.1 + 1e-9;
            auto p = c.panel(q, k, 2, m, lo, hi, 0, top);
            c.axes(p, "error (%)", "count", std::string(q == 0 ? "Frequency" : "Damping") + ", mode " + std::to_string(k + 1));
            for (int b = 0; b < bins; ++b) {
                const double xa = lo + (hi - lo) * b / bins, xb = lo + (hi - lo) * (b + 1) / bins;
                c.rect(p, xa, 0, xb, counts[static_cast<std::size_t>(b)], palette(q), 0.6);
            }
            if (lo < 0 && hi > 0) c.line(p, 0, 0, 0, top, "#000", 1, "4 3");
        }
    }
    return c;
}

/// MAC box plots (median, quartiles, whiskers to min/max) per mode.
inline Canvas mac_boxplot(const eval::EvalReport& r) {
    const int m = r.n_modes;
    Canvas c(140 * m + 120, 420);
    c.title("Distribution of MAC values");
    double lo = 1.0;
    for (int k = 0; k < m; ++k) lo = std::min(lo, r.modes[static_cast<std::size_t>(k)].mac.min);
    auto p = c.panel(0, 0, 1, 1, 0.5, m + 0.5, std::max(0.0, lo - 0.05), 1.0);
    c.axes(p, "mode", "MAC", "");
    for (int k = 0; k < m; ++k) {
        const auto v = detail::per_mode(r, k, 2);
        const double x = k + 1;
        const double q1 = detail::quantile(v, 0.25), q2 = detail::quantile(v, 0.5), q3 = detail::quantile(v, 0.75);
        const double mn = *std::min_element(v.begin(), v.end()), mx = *std::max_element(v.begin(), v.end());
        c.line(p, x, mn, x, q1, "#333");
        c.line(p, x, q3, x, mx, "#333");
        c.rect(p, x - 0.25, q1, x + 0.25, q3, palette(static_cast<std::size_t>(k)), 0.5);
        c.line(p, x - 0.25, q2, x + 0.25, q2, "#000", 2);
        c.line(p, x - 0.12, mn, x + 0.12, mn, "#333");
        c.line(p, x - 0.12, mx, x + 0.12, mx, "#333");
    }
    return c;
}

/// Predicted versus true with the 1:1 line and +-10% bounds.
inline Canvas scatter(const eval::EvalReport& r, bool damping) {
    Canvas c(560, 520);
    c.title(damping ? "Damping ratio: true vs predicted" : "Natural frequency: true vs predicted");
    std::vector<double> all;
    for (const auto& s : r.samples) {
        for (Eigen::Index k = 0; k < s.mac.size(); ++k) {
            all.push_back(damping ? s.true_damp[k] : s.true_freq[k]);
            all.push_back(damping ? s.pred_damp[k] : s.pred_freq[k]);
        }
    }
    auto [lo, hi] = detail::range_of(all);
    lo = std::max(lo, 0.0);
    auto p = c.panel(0, 0, 1, 1, lo, hi, lo, hi);
    c.axes(p, damping ? "true zeta" : "true f (Hz)", damping ? "predicted zeta" : "predicted f (Hz)", "");
    c.line(p, lo, lo, hi, hi, "#000", 1.2);
    c.line(p, lo, lo * 1.1, hi / 1.1, hi, "#777", 1, "5 4");
    c.line(p, lo, lo * 0.9, hi, hi * 0.9, "#777", 1, "5 4");
    for (const auto& s : r.samples) {
        for (Eigen::Index k = 0; k < s.mac.size(); ++k) {
            c.dot(p, damping ? s.true_damp[k] : s.true_freq[k], damping ? s.pred_damp[k] : s.pred_freq[k],
                  palette(static_cast<std::size_t>(k)));
        }
    }
    for (int k = 0; k < r.n_modes; ++k) {
        c.text(p.x0 + 10, p.y0 + 16 + 14 * k, "mode " + std::to_string(k + 1), 11, "start", "bold",
               palette(static_cast<std::size_t>(k)));
    }
    return c;
}

/// Empirical coverage against nominal level, with the ECE per panel.
inline Canvas reliability(const eval::EvalReport& r) {
    const int m = r.n_modes;
    Canvas c(260 * m, 540);
    c.title("Calibration across confidence levels");
    if (!r.has_uncertainty) return c;
    for (int q = 0; q < 2; ++q) {
        for (int k = 0; k < m; ++k) {
            const auto& md = r.modes[static_cast<std::size_t>(k)];
            const auto& cov = q == 0 ? md.coverage_freq : md.coverage_damp;
            auto p = c.panel(q, k, 2, m, 0, 1, 0, 1);
            c.axes(p, "nominal level", "empirical coverage",
                   std::string(q == 0 ? "Freq" : "Damp") + " mode " + std::to_string(k + 1) +
                       " (ECE " + num(q == 0 ? md.ece_freq : md.ece_damp) + ")");
            for (std::size_t l = 0; l < r.levels.size(); ++l) {
                const double x = r.levels[l];
                c.rect(p, x - 0.035, 0, x + 0.035, cov[l], palette(static_cast<std::size_t>(q)), 0.6);
            }
            c.line(p, 0, 0, 1, 1, "#000", 1, "4 3");
        }
    }
    return c;
}

/// Mean aleatoric and epistemic variance (log space) per mode, stacked.
inline Canvas uncertainty_bars(const eval::EvalReport& r) {
    const int m = r.n_modes;
    Canvas c(900, 420);
    c.title("Epistemic and aleatoric uncertainty per mode");
    if (!r.has_uncertainty || r.samples.empty()) return c;
    for (int q = 0; q < 2; ++q) {
        std::vector<double> alea(static_cast<std::size_t>(m), 0.0), epis = alea;
        for (const auto& s : r.samples) {
            for (int k = 0; k < m; ++k) {
                alea[static_cast<std::size_t>(k)] += (q == 0 ? s.sigma2_alea_freq : s.sigma2_alea_damp)[k] / r.samples.size();
                epis[static_cast<std::size_t>(k)] += (q == 0 ? s.sigma2_epis_freq : s.sigma2_epis_damp)[k] / r.samples.size();
            }
        }
        double top = 0.0;
        for (int k = 0; k < m; ++k) top = std::max(top, alea[static_cast<std::size_t>(k)] + epis[static_cast<std::size_t>(k)]);
        auto p = c.panel(0, q, 1, 2, 0.5, m + 0.5, 0, top * 1.15 + 1e-12);
        c.axes(p, "mode", "mean variance (log units)", q == 0 ? "Frequency" : "Damping ratio");
        for (int k = 0; k < m; ++k) {
            const double a = alea[static_cast<std::size_t>(k)], e = epis[static_cast<std::size_t>(k)];
            c.rect(p, k + 0.7, 0, k + 1.3, a, "#1f77b4", 0.7);
            c.rect(p, k + 0.7, a, k + 1.3, a + e, "#ff7f0e", 0.7);
            c.text(p.px(k + 1), p.py(a + e) - 4, "epis " + num(a + e > 0 ? e / (a + e) : 0.0), 10, "middle");
        }
        c.text(p.x0 + p.pw - 4, p.y0 + 14, "aleatoric (blue), epistemic (orange)", 10, "end");
    }
    return c;
}

/**
 * True and predicted mode shapes drawn as vertical deformations of the truss.
 * The predicted column is sign-aligned and rescaled to the true one.
 */
inline Canvas mode_shape_overlay(const Eigen::MatrixXf& coords, const std::vector<DirectedEdge>& edges,
                                 const Eigen::MatrixXd& phi_true, const Eigen::MatrixXd& phi_pred, std::uint32_t id) {
    const int m = static_cast<int>(phi_true.cols());
    Canvas c(320 * m, 360);
    c.title("Mode shapes, sample " + std::to_string(id) + " (black: undeformed, blue: true, red: predicted)");
    std::vector<double> xs, ys;
    for (Eigen::Index i = 0; i < coords.rows(); ++i) {
        xs.push_back(coords(i, 0));
        ys.push_back(coords(i, 1));
    }
    auto [x0, x1] = detail::range_of(xs, 0.08);
    auto [y0, y1] = detail::range_of(ys, 0.6);
    const double amp = 0.25 * (x1 - x0);
    for (int k = 0; k < m; ++k) {
        Eigen::VectorXd t = phi_true.col(k), pr = phi_pred.col(k);
        const double tp = t.norm(), pp = pr.norm();
        if (tp > 0) t /= tp;
        if (pp > 0) pr /= pp;
        if (t.dot(pr) < 0) pr = -pr;
        auto p = c.panel(0, k, 1, m, x0, x1, y0, y1);
        const double mac = tp > 0 && pp > 0 ? std::pow(t.dot(pr), 2) : 0.0;
        c.axes(p, "x (m)", "y (m)", "mode " + std::to_string(k + 1) + " (MAC " + num(mac) + ")");
        for (const auto& e : edges) {
            if (e[0] > e[1]) continue;
            const auto a = e[0], b = e[1];
            c.line(p, coords(a, 0), coords(a, 1), coords(b, 0), coords(b, 1), "#bbb", 1);
            c.line(p, coords(a, 0), coords(a, 1) + amp * t[a], coords(b, 0), coords(b, 1) + amp * t[b], "#1f77b4", 1.5);
            c.line(p, coords(a, 0), coords(a, 1) + amp * pr[a], coords(b, 0), coords(b, 1) + amp * pr[b], "#d62728",
                   1.2, "4 2");
        }
    }
    return c;
}

/// Mean MAC, frequency MAE and damping MAE per condition for every model in a study.
inline Canvas study_trends(const std::vector<std::string>& labels, const std::vector<std::string>& models,
                           const std::vector<std::vector<eval::EvalReport>>& reports, const std::string& title) {
    Canvas c(1050, 400);
    c.title(title);
    const int nc = static_cast<int>(labels.size());
    const char* names[3] = {"mean MAC", "frequency MAE (%)", "damping MAE (%)"};
    for (int q = 0; q < 3; ++q) {
        std::vector<double> vals;
        for (const auto& per_model : reports) {
            for (const auto& r : per_model) vals.push_back(q == 0 ? r.mean_mac : q == 1 ? r.freq_mae : r.damp_mae);
        }
        auto [lo, hi] = detail::range_of(vals, 0.1);
        if (q > 0) lo = std::max(0.0, lo);
        auto p = c.panel(0, q, 1, 3, -0.5, nc - 0.5, lo, hi);
        c.axes(p, "condition index", names[q], names[q]);
        for (std::size_t mi = 0; mi < reports.size(); ++mi) {
            for (int i = 0; i < nc; ++i) {
                const auto& r = reports[mi][static_cast<std::size_t>(i)];
                const double v = q == 0 ? r.mean_mac : q == 1 ? r.freq_mae : r.damp_mae;
                c.dot(p, i, v, palette(mi), 3.5);
                if (i > 0) {
                    const auto& rp = reports[mi][static_cast<std::size_t>(i - 1)];
                    const double vp = q == 0 ? rp.mean_mac : q == 1 ? rp.freq_mae : rp.damp_mae;
                    c.line(p, i - 1, vp, i, v, palette(mi), 1.5);
                }
            }
            c.text(p.x0 + 6, p.y0 + 14 + 13 * static_cast<double>(mi), models[mi], 10, "start", "bold", palette(mi));
        }
        std::string axis;
        for (int i = 0; i < nc; ++i) axis += (i ? ", " : "") + std::to_string(i) + "=" + labels[static_cast<std::size_t>(i)];
        c.text(p.x0, p.y0 + p.ph + 44, axis, 9);
    }
    return c;
}

}  // namespace mvgae::plot
