#pragma once

/**
 * @file report_io.hpp
 * @brief JSON and CSV serialization of evaluation reports, studies and comparisons.
 */

#include <cstdio>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "modalvgae/eval/metrics.hpp"
#include "modalvgae/eval/pipeline.hpp"

namespace mvgae::eval {

inline void to_json(nlohmann::json& j, const Stats& s) {
    j = nlohmann::json{{"mean", s.mean}, {"std", s.std},         {"min", s.min},      {"max", s.max},
                       {"max_abs", s.max_abs}, {"mae", s.mae}, {"median", s.median}};
}

namespace detail {
inline std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
}  // namespace detail

inline nlohmann::json report_json(const EvalReport& r, bool include_samples = true) {
    nlohmann::json modes = nlohmann::json::array();
    for (std::size_t k = 0; k < r.modes.size(); ++k) {
        const auto& m = r.modes[k];
        nlohmann::json jm{{"mode", k + 1}, {"mac", m.mac}, {"freq_error_pct", m.freq_error}, {"damp_error_pct", m.damp_error}};
        if (r.has_uncertainty) {
            jm["epistemic_fraction"] = {{"freq", m.epistemic_fraction_freq}, {"damp", m.epistemic_fraction_damp}};
            jm["calibration"] = {{"coverage_freq", m.coverage_freq},
                                 {"coverage_damp", m.coverage_damp},
                                 {"ece_freq", m.ece_freq},
                                 {"ece_damp", m.ece_damp}};
        }
        modes.push_back(jm);
    }
    nlohmann::json j{{"n_samples", r.n_samples},
                     {"n_modes", r.n_modes},
                     {"has_uncertainty", r.has_uncertainty},
                     {"levels", r.levels},
                     {"summary", {{"mean_mac", r.mean_mac}, {"freq_mae_pct", r.freq_mae}, {"damp_mae_pct", r.damp_mae}}},
                     {"modes", modes}};
    if (include_samples) {
        nlohmann::json samples = nlohmann::json::array();
        for (const auto& s : r.samples) {
            nlohmann::json js{{"id", s.id},
                              {"true_freq", detail::to_vec(s.true_freq)},
                              {"pred_freq", detail::to_vec(s.pred_freq)},
                              {"true_damp", detail::to_vec(s.true_damp)},
                              {"pred_damp", detail::to_vec(s.pred_damp)},
                              {"mac", detail::to_vec(s.mac)}};
            if (r.has_uncertainty) {
                js["sigma2_alea_freq"] = detail::to_vec(s.sigma2_alea_freq);
                js["sigma2_epis_freq"] = detail::to_vec(s.sigma2_epis_freq);
                js["sigma2_alea_damp"] = detail::to_vec(s.sigma2_alea_damp);
                js["sigma2_epis_damp"] = detail::to_vec(s.sigma2_epis_damp);
            }
            samples.push_back(js);
        }
        j["samples"] = samples;
    }
    return j;
}

inline nlohmann::json study_json(const StudyResult& s) {
    nlohmann::json models = nlohmann::json::object();
    for (std::size_t mi = 0; mi < s.models.size(); ++mi) {
        nlohmann::json conds = nlohmann::json::array();
        for (std::size_t c = 0; c < s.labels.size(); ++c) {
            auto jr = report_json(s.reports[mi][c], false);
            jr["condition"] = s.labels[c];
            conds.push_back(jr);
        }
        models[s.models[mi]] = conds;
    }
    return {{"axis", s.axis}, {"conditions", s.labels}, {"models", models}};
}

inline nlohmann::json comparison_json(const Comparison& c) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : c.rows) {
        rows.push_back({{"condition", r.condition},
                        {"mac", {{c.model_a, r.mac_a}, {c.model_b, r.mac_b}, {"winner", std::string(1, r.win_mac)}}},
                        {"freq_mae_pct", {{c.model_a, r.freq_mae_a}, {c.model_b, r.freq_mae_b}, {"winner", std::string(1, r.win_freq)}}},
                        {"damp_mae_pct", {{c.model_a, r.damp_mae_a}, {c.model_b, r.damp_mae_b}, {"winner", std::string(1, r.win_damp)}}}});
    }
    return {{"model_a", c.model_a}, {"model_b", c.model_b}, {"rows", rows}};
}

namespace detail {
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}
}  // namespace detail

/// Per-mode statistics table: one row per mode.
inline std::string mode_table_csv(const EvalReport& r) {
    std::ostringstream os;
    os << "mode,mac_mean,mac_std,mac_min,freq_err_mean,freq_err_std,freq_err_maxabs,freq_mae,"
          "damp_err_mean,damp_err_std,damp_err_maxabs,damp_mae";
    if (r.has_uncertainty) os << ",epis_frac_freq,epis_frac_damp,ece_freq,ece_damp";
    os << "\n";
    using detail::fmt;
    for (std::size_t k = 0; k < r.modes.size(); ++k) {
        const auto& m = r.modes[k];
        os << k + 1 << ',' << fmt(m.mac.mean) << ',' << fmt(m.mac.std) << ',' << fmt(m.mac.min) << ','
           << fmt(m.freq_error.mean) << ',' << fmt(m.freq_error.std) << ',' << fmt(m.freq_error.max_abs) << ','
           << fmt(m.freq_error.mae) << ',' << fmt(m.damp_error.mean) << ',' << fmt(m.damp_error.std) << ','
           << fmt(m.damp_error.max_abs) << ',' << fmt(m.damp_error.mae);
        if (r.has_uncertainty) {
            os << ',' << fmt(m.epistemic_fraction_freq) << ',' << fmt(m.epistemic_fraction_damp) << ','
               << fmt(m.ece_freq) << ',' << fmt(m.ece_damp);
        }
        os << "\n";
    }
    return os.str();
}

/// Coverage per level: level, then freq/damp coverage for every mode.
inline std::string calibration_csv(const EvalReport& r) {
    if (!r.has_uncertainty) return {};
    std::ostringstream os;
    os << "level";
    for (std::size_t k = 0; k < r.modes.size(); ++k) os << ",freq_mode" << k + 1 << ",damp_mode" << k + 1;
    os << "\n";
    for (std::size_t l = 0; l < r.levels.size(); ++l) {
        os << detail::fmt(r.levels[l]);
        for (const auto& m : r.modes) os << ',' << detail::fmt(m.coverage_freq[l]) << ',' << detail::fmt(m.coverage_damp[l]);
        os << "\n";
    }
    return os.str();
}

inline std::string samples_csv(const EvalReport& r) {
    std::ostringstream os;
    os << "id,mode,true_freq,pred_freq,true_damp,pred_damp,mac";
    if (r.has_uncertainty) os << ",sigma2_alea_freq,sigma2_epis_freq,sigma2_alea_damp,sigma2_epis_damp";
    os << "\n";
    using detail::fmt;
    for (const auto& s : r.samples) {
        for (Eigen::Index k = 0; k < s.mac.size(); ++k) {
            os << s.id << ',' << k + 1 << ',' << fmt(s.true_freq[k]) << ',' << fmt(s.pred_freq[k]) << ','
               << fmt(s.true_damp[k]) << ',' << fmt(s.pred_damp[k]) << ',' << fmt(s.mac[k]);
            if (r.has_uncertainty) {
                os << ',' << fmt(s.sigma2_alea_freq[k]) << ',' << fmt(s.sigma2_epis_freq[k]) << ','
                   << fmt(s.sigma2_alea_damp[k]) << ',' << fmt(s.sigma2_epis_damp[k]);
            }
            os << "\n";
        }
    }
    return os.str();
}

/// Study table: condition, then mean MAC / freq MAE / damp MAE for each model.
inline std::string study_csv(const StudyResult& s) {
    std::ostringstream os;
    os << "condition";
    for (const auto& m : s.models) os << ',' << m << "_mac," << m << "_freq_mae," << m << "_damp_mae";
    os << "\n";
    for (std::size_t c = 0; c < s.labels.size(); ++c) {
        os << s.labels[c];
        for (std::size_t mi = 0; mi < s.models.size(); ++mi) {
            const auto& r = s.reports[mi][c];
            os << ',' << detail::fmt(r.mean_mac) << ',' << detail::fmt(r.freq_mae) << ',' << detail::fmt(r.damp_mae);
        }
        os << "\n";
    }
    return os.str();
}

/// Comparison table: six metric columns plus three winner flags per condition.
inline std::string comparison_csv(const Comparison& c) {
    std::ostringstream os;
    const auto& a = c.model_a;
    const auto& b = c.model_b;
    os << "condition," << a << "_mac," << b << "_mac," << a << "_freq_mae," << b << "_freq_mae," << a << "_damp_mae,"
       << b << "_damp_mae,winner_mac,winner_freq,winner_damp\n";
    using detail::fmt;
    for (const auto& r : c.rows) {
        os << r.condition << ',' << fmt(r.mac_a) << ',' << fmt(r.mac_b) << ',' << fmt(r.freq_mae_a) << ','
           << fmt(r.freq_mae_b) << ',' << fmt(r.damp_mae_a) << ',' << fmt(r.damp_mae_b) << ','
           << (r.win_mac == 'A' ? a : r.win_mac == 'B' ? b : std::string("tie")) << ','
           << (r.win_freq == 'A' ? a : r.win_freq == 'B' ? b : std::string("tie")) << ','
           << (r.win_damp == 'A' ? a : r.win_damp == 'B' ? b : std::string("tie")) << "\n";
    }
    return os.str();
}

}  // namespace mvgae::eval
