#pragma once

/**
 * @file metrics.hpp
 * @brief Report statistics: per-mode MAC and signed relative errors,
 *        epistemic fractions, coverage curves and ECE.
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/dataset/graph.hpp"
#include "modalvgae/losses/losses.hpp"
#include "modalvgae/uq/nig.hpp"

namespace mvgae::eval {

inline const std::vector<double>& default_levels() {
    static const std::vector<double> levels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    return levels;
}

/// Mean |coverage - level| over the level grid.
inline double ece(const std::vector<double>& levels, const std::vector<double>& coverages) {
    if (levels.size() != coverages.size() || levels.empty()) {
        throw InvalidArgument("ece: levels and coverages must be non-empty and of equal length");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) s += std::abs(coverages[i] - levels[i]);
    return s / static_cast<double>(levels.size());
}

/**
 * Empirical coverage per level: fraction of truths inside [lo, hi].
 * lo/hi are indexed [level][sample].
 */
inline std::vector<double> coverage_curve(const std::vector<std::vector<double>>& lo,
                                          const std::vector<std::vector<double>>& hi, const std::vector<double>& truth) {
    if (lo.size() != hi.size()) throw InvalidArgument("coverage_curve: lo/hi level counts differ");
    std::vector<double> cov;
    for (std::size_t l = 0; l < lo.size(); ++l) {
        if (lo[l].size() != truth.size() || hi[l].size() != truth.size()) {
            throw InvalidArgument("coverage_curve: interval count != truth count");
        }
        std::size_t inside = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] >= lo[l][i] && truth[i] <= hi[l][i]) ++inside;
        }
        cov.push_back(truth.empty() ? 0.0 : static_cast<double>(inside) / static_cast<double>(truth.size()));
    }
    return cov;
}

/// Model output for one graph in a model-agnostic form (log-target space).
struct Prediction {
    std::uint32_t id = 0;
    Eigen::MatrixXd mean;  // 2 x M: row 0 log f, row 1 log zeta
    Eigen::MatrixXd phi;   // N x M
    /// Predictive summaries [quantity][mode]; empty for point-estimate models.
    std::vector<std::vector<uq::PredictiveSummary>> summary;
};

struct Stats {
    double mean = 0, std = 0, min = 0, max = 0, max_abs = 0, mae = 0, median = 0;
};

inline Stats describe(std::vector<double> v) {
    Stats s;
    if (v.empty()) return s;
    const double n = static_cast<double>(v.size());
    double sum = 0.0, abs_sum = 0.0;
    s.min = s.max = v[0];
    for (double x : v) {
        sum += x;
        abs_sum += std::abs(x);
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
        s.max_abs = std::max(s.max_abs, std::abs(x));
    }
    s.mean = sum / n;
    s.mae = abs_sum / n;
    double sq = 0.0;
    for (double x : v) sq += (x - s.mean) * (x - s.mean);
    s.std = v.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
    std::sort(v.begin(), v.end());
    s.median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    return s;
}

struct ModeReport {
    Stats mac;
    Stats freq_error;  // signed relative error, percent
    Stats damp_error;  // signed relative error, percent
    double epistemic_fraction_freq = 0;
    double epistemic_fraction_damp = 0;
    double ece_freq = 0;
    double ece_damp = 0;
    std::vector<double> coverage_freq, coverage_damp;
};

/// Per-sample values kept for plots and CSV export.
struct SampleRecord {
    std::uint32_t id = 0;
    Eigen::VectorXd true_freq, pred_freq, true_damp, pred_damp, mac;
    Eigen::VectorXd sigma2_alea_freq, sigma2_epis_freq, sigma2_alea_damp, sigma2_epis_damp;  // log space
};

struct EvalReport {
    int n_samples = 0;
    int n_modes = 0;
    bool has_uncertainty = false;
    std::vector<double> levels;
    std::vector<ModeReport> modes;
    double mean_mac = 0;
    double freq_mae = 0;  // percent, averaged over modes
    double damp_mae = 0;  // percent, averaged over modes
    std::vector<SampleRecord> samples;
};

/**
 * Aggregates predictions against ground truth. Samples are matched by id and
 * processed in ascending id order, so the result is independent of input
 * ordering.
 */
inline EvalReport build_report(const std::vector<const GraphSample*>& truths, std::vector<Prediction> preds,
                               const std::vector<double>& levels = default_levels()) {
    if (truths.empty()) throw InvalidArgument("evaluate: empty split");
    if (truths.size() != preds.size()) throw InvalidArgument("evaluate: prediction count != sample count");
    for (double l : levels) {
        if (!(l > 0.0 && l < 1.0)) throw InvalidArgument("evaluate: confidence levels must be in (0, 1)");
    }
    std::vector<const GraphSample*> ts = truths;
    std::sort(ts.begin(), ts.end(), [](auto* a, auto* b) { return a->id < b->id; });
    std::sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    const int m = ts.front()->n_modes();
    EvalReport rep;
    rep.n_samples = static_cast<int>(ts.size());
    rep.n_modes = m;
    rep.levels = levels;
    rep.has_uncertainty = !preds.front().summary.empty();

    std::vector<std::vector<double>> macs(m), fe(m), de(m), epf(m), epd(m);
    // [quantity][mode][level] interval bounds over samples, plus log truths [quantity][mode]
    const auto nl = levels.size();
    std::vector<std::vector<std::vector<std::vector<double>>>> lo(2, std::vector<std::vector<std::vector<double>>>(m, std::vector<std::vector<double>>(nl)));
    auto hi = lo;
    std::vector<std::vector<std::vector<double>>> tlog(2, std::vector<std::vector<double>>(m));

    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto& t = *ts[i];
        const auto& p = preds[i];
        if (p.id != t.id) throw InvalidArgument("evaluate: prediction ids do not match sample ids");
        if (t.n_modes() != m || p.mean.cols() != m || p.phi.cols() != m) throw InvalidArgument("evaluate: mode-count mismatch");
        if (p.phi.rows() != t.n_nodes()) throw InvalidArgument("evaluate: predicted shape rows != node count");
        if (p.summary.empty() == rep.has_uncertainty) throw InvalidArgument("evaluate: mixed point/probabilistic predictions");

        SampleRecord rec;
        rec.id = t.id;
        rec.true_freq = t.freq.cast<double>();
        rec.true_damp = t.zeta.cast<double>();
        rec.pred_freq = p.mean.row(0).transpose().array().exp();
        rec.pred_damp = p.mean.row(1).transpose().array().exp();
        rec.mac.resize(m);
        if (rep.has_uncertainty) {
            rec.sigma2_alea_freq.resize(m);
            rec.sigma2_epis_freq.resize(m);
            rec.sigma2_alea_damp.resize(m);
            rec.sigma2_epis_damp.resize(m);
        }
        for (int k = 0; k < m; ++k) {
            const Eigen::VectorXd truth_phi = t.phi.col(k).cast<double>();
            const double mv = p.phi.col(k).squaredNorm() > 0.0 ? loss::mac(p.phi.col(k), truth_phi) : 0.0;
            rec.mac[k] = mv;
            macs[k].push_back(mv);
            fe[k].push_back(100.0 * (rec.pred_freq[k] - rec.true_freq[k]) / rec.true_freq[k]);
            de[k].push_back(100.0 * (rec.pred_damp[k] - rec.true_damp[k]) / rec.true_damp[k]);
            if (rep.has_uncertainty) {
                const auto& sf = p.summary[0][static_cast<std::size_t>(k)];
                const auto& sd = p.summary[1][static_cast<std::size_t>(k)];
                epf[k].push_back(sf.sigma2_epis / sf.sigma2_total);
                epd[k].push_back(sd.sigma2_epis / sd.sigma2_total);
                rec.sigma2_alea_freq[k] = sf.sigma2_alea;
                rec.sigma2_epis_freq[k] = sf.sigma2_epis;
                rec.sigma2_alea_damp[k] = sd.sigma2_alea;
                rec.sigma2_epis_damp[k] = sd.sigma2_epis;
                const double truth_log[2] = {std::log(rec.true_freq[k]), std::log(rec.true_damp[k])};
                for (int q = 0; q < 2; ++q) {
                    tlog[q][k].push_back(truth_log[q]);
                    for (std::size_t l = 0; l < nl; ++l) {
                        const auto [a, b] = uq::confidence_interval(p.summary[q][static_cast<std::size_t>(k)], levels[l]);
                        lo[q][k][l].push_back(a);
                        hi[q][k][l].push_back(b);
                    }
                }
            }
        }
        rep.samples.push_back(std::move(rec));
    }

    for (int k = 0; k < m; ++k) {
        ModeReport mr;
        mr.mac = describe(macs[k]);
        mr.freq_error = describe(fe[k]);
        mr.damp_error = describe(de[k]);
        if (rep.has_uncertainty) {
            mr.epistemic_fraction_freq = describe(epf[k]).mean;
            mr.epistemic_fraction_damp = describe(epd[k]).mean;
            mr.coverage_freq = coverage_curve(lo[0][k], hi[0][k], tlog[0][k]);
            mr.coverage_damp = coverage_curve(lo[1][k], hi[1][k], tlog[1][k]);
            mr.ece_freq = ece(levels, mr.coverage_freq);
            mr.ece_damp = ece(levels, mr.coverage_damp);
        }
        rep.mean_mac += mr.mac.mean / m;
        rep.freq_mae += mr.freq_error.mae / m;
        rep.damp_mae += mr.damp_error.mae / m;
        rep.modes.push_back(std::move(mr));
    }
    return rep;
}

}  // namespace mvgae::eval
