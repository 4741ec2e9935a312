#pragma once

/**
 * @file pipeline.hpp
 * @brief Checkpoint evaluation with combined uncertainty, noise and sensor
 *        sparsity studies, side-by-side model comparison.
 */

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/parallel.hpp"
#include "modalvgae/core/rng.hpp"
#include "modalvgae/dataset/generate.hpp"
#include "modalvgae/dataset/graph.hpp"
#include "modalvgae/dataset/io.hpp"
#include "modalvgae/eval/metrics.hpp"
#include "modalvgae/model/baseline.hpp"
#include "modalvgae/train/checkpoint.hpp"
#include "modalvgae/uq/sampling.hpp"

namespace mvgae::eval {

struct UQConfig {
    int mc_passes = 20;       // 0 disables MC dropout
    int swag_samples = 20;    // 0 disables SWAG sampling
    double swag_scale = 1.0;  // multiplies the diagonal SWAG variance
    std::vector<double> levels = default_levels();
    std::uint64_t seed = 11;

    void validate() const {
        require(mc_passes >= 0 && swag_samples >= 0, "uq: mc_passes and swag_samples must be >= 0");
        require(swag_scale >= 0.0, "uq: swag_scale must be >= 0");
        require(!levels.empty(), "uq: need at least one confidence level");
        for (double l : levels) require(l > 0.0 && l < 1.0, "uq: confidence levels must be in (0, 1)");
        for (std::size_t i = 1; i < levels.size(); ++i) require(levels[i] > levels[i - 1], "uq: levels must increase");
    }
};

inline void to_json(nlohmann::json& j, const UQConfig& c) {
    j = nlohmann::json{{"mc_passes", c.mc_passes},
                       {"swag_samples", c.swag_samples},
                       {"swag_scale", c.swag_scale},
                       {"levels", c.levels},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, UQConfig& c) {
    UQConfig d;
    c.mc_passes = j.value("mc_passes", d.mc_passes);
    c.swag_samples = j.value("swag_samples", d.swag_samples);
    c.swag_scale = j.value("swag_scale", d.swag_scale);
    c.levels = j.value("levels", d.levels);
    c.seed = j.value("seed", d.seed);
}

/// Whether the checkpoint expects the observed-sensor flag column.
inline bool expects_flag(const train::Checkpoint& ck, const DatasetManifest& m) {
    if (ck.model.in_features == m.feature_dim + 1) return true;
    if (ck.model.in_features == m.feature_dim) return false;
    throw InvalidArgument("evaluate: checkpoint expects " + std::to_string(ck.model.in_features) +
                          " input features, dataset provides " + std::to_string(m.feature_dim));
}

/// Prediction for one normalized, model-ready graph.
inline Prediction predict_graph(const train::Checkpoint& ck, const PreparedGraph<float>& g, const UQConfig& uq) {
    Prediction out;
    out.id = g.id;
    const auto& cfg = ck.model;
    if (ck.kind == "baseline") {
        ad::Tape<float> tape;
        nn::Binding<float> b(tape, ck.params);
        const auto o = model::baseline_forward(b, g.features, g.nb, cfg);
        out.mean.resize(2, cfg.n_modes);
        out.mean.row(0) = o.log_freq.value().cast<double>();
        out.mean.row(1) = o.log_zeta.value().cast<double>();
        out.phi = o.phi.value().cast<double>();
        return out;
    }
    if (ck.kind != "ures_vgae") throw FormatError("evaluate: unknown checkpoint kind '" + ck.kind + "'");

    const auto p = uq::predict(ck.params, g.features, g.nb, cfg);
    out.mean = p.gamma;
    out.phi = p.phi;
    Eigen::MatrixXd var_mc = Eigen::MatrixXd::Zero(2, cfg.n_modes);
    Eigen::MatrixXd var_swag = var_mc;
    if (uq.mc_passes > 0 && cfg.dropout > 0.0) {
        var_mc = uq::mc_dropout_predict(ck.params, g.features, g.nb, cfg, uq.mc_passes,
                                        derive_seed(uq.seed, g.id, Stream::Dropout))
                     .var;
    }
    if (uq.swag_samples > 0 && ck.swag) {
        var_swag = uq::swag_predict(*ck.swag, ck.params, g.features, g.nb, cfg, uq.swag_samples,
                                    derive_seed(uq.seed, g.id, Stream::Swag), uq.swag_scale)
                       .var;
    }
    out.summary.assign(2, {});
    for (int q = 0; q < 2; ++q) {
        for (int k = 0; k < cfg.n_modes; ++k) {
            out.summary[q].push_back(
                uq::combine_uncertainty(uq::predictive_moments(p.nig(q, k)), var_mc(q, k), var_swag(q, k)));
        }
    }
    return out;
}

/**
 * Runs the model over raw samples. Features are normalized with the stored
 * statistics; `fraction` < 1 masks sensors (requires a flag-aware model).
 */
inline EvalReport evaluate_samples(const train::Checkpoint& ck, const std::vector<const GraphSample*>& samples,
                                   const DatasetManifest& manifest, const UQConfig& uq, double fraction = 1.0,
                                   std::uint64_t mask_seed = 0) {
    uq.validate();
    if (samples.empty()) throw InvalidArgument("evaluate: empty split");
    if (ck.model.n_modes != manifest.n_modes) {
        throw InvalidArgument("evaluate: checkpoint predicts " + std::to_string(ck.model.n_modes) +
                              " modes, dataset has " + std::to_string(manifest.n_modes));
    }
    const bool flag = expects_flag(ck, manifest);
    if (fraction < 1.0 && !flag) throw InvalidArgument("evaluate: sensor masking needs a model trained with masks");
    const TargetTransform tf;
    std::vector<Prediction> preds(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        GraphSample s = apply_normalization(*samples[i], manifest.norm);
        if (flag) {
            s = fraction < 1.0 ? mask_sensors(s, fraction, derive_seed(mask_seed, s.id, Stream::SensorMask))
                               : with_observed_flag(s);
        }
        preds[i] = predict_graph(ck, prepare<float>(s, tf), uq);
    });
    return build_report(samples, std::move(preds), uq.levels);
}

inline EvalReport evaluate(const train::Checkpoint& ck, const Dataset& ds, const std::string& split, const UQConfig& uq) {
    return evaluate_samples(ck, ds.split(split), ds.manifest, uq);
}

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

struct NamedModel {
    std::string name;
    const train::Checkpoint* ckpt = nullptr;
};

struct StudyResult {
    std::string axis;                 // "snr_db" or "sensor_fraction"
    std::vector<std::string> labels;  // e.g. "clean", "30 dB", "5%"
    std::vector<std::string> models;
    std::vector<std::vector<EvalReport>> reports;  // [model][condition]
};

/// Parses "clean" or a dB value; conditions must go from clean towards lower SNR.
inline std::vector<Snr> parse_snr_list(const std::vector<std::string>& items) {
    std::vector<Snr> out;
    for (const auto& s : items) {
        if (s == "clean" || s == "inf") {
            out.emplace_back(std::nullopt);
        } else {
            try {
                std::size_t used = 0;
                const double v = std::stod(s, &used);
                if (used != s.size()) throw std::invalid_argument(s);
                out.emplace_back(v);
            } catch (const std::exception&) {
                throw InvalidArgument("snr list: cannot parse '" + s + "'");
            }
        }
    }
    for (std::size_t i = 1; i < out.size(); ++i) {
        const double prev = out[i - 1] ? *out[i - 1] : std::numeric_limits<double>::infinity();
        const double cur = out[i] ? *out[i] : std::numeric_limits<double>::infinity();
        if (!(cur < prev)) throw InvalidArgument("snr list: conditions must be strictly decreasing from clean");
    }
    if (out.empty()) throw InvalidArgument("snr list: empty");
    return out;
}

/**
 * Re-simulates the test split at each SNR (noise enters the time series
 * before Welch); the clean condition uses the stored samples unchanged.
 */
inline StudyResult noise_study(const std::vector<NamedModel>& models, const Dataset& ds, const std::vector<Snr>& snrs,
                               const UQConfig& uq, const std::string& split = "test") {
    if (snrs.empty()) throw InvalidArgument("noise_study: empty SNR list");
    const auto gen = ds.manifest.generation.get<GenerationConfig>();
    if (generation_digest(gen) != ds.manifest.generation_digest) {
        throw FormatError("noise_study: stored generation config does not match its digest");
    }
    StudyResult r;
    r.axis = "snr_db";
    for (const auto& m : models) r.models.push_back(m.name);
    r.reports.assign(models.size(), {});
    const auto clean = ds.split(split);
    for (const auto& snr : snrs) {
        r.labels.push_back(snr_label(snr));
        std::vector<GraphSample> noisy;
        std::vector<const GraphSample*> view = clean;
        if (snr) {
            noisy.resize(clean.size());
            parallel_for(clean.size(), [&](std::size_t i) { noisy[i] = generate_item(gen, clean[i]->id, snr).sample; });
            for (std::size_t i = 0; i < noisy.size(); ++i) view[i] = &noisy[i];
        }
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            r.reports[mi].push_back(evaluate_samples(*models[mi].ckpt, view, ds.manifest, uq));
        }
    }
    return r;
}

inline std::string fraction_label(double f) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g%%", 100.0 * f);
    return buf;
}

/// Evaluates masked-input models at each observed-sensor fraction (strictly increasing, in (0, 1]).
inline StudyResult sparsity_study(const std::vector<NamedModel>& models, const Dataset& ds,
                                  const std::vector<double>& fractions, const UQConfig& uq, std::uint64_t mask_seed,
                                  const std::string& split = "test") {
    if (fractions.empty()) throw InvalidArgument("sparsity_study: empty fraction list");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        require(fractions[i] > 0.0 && fractions[i] <= 1.0, "sparsity_study: fractions must be in (0, 1]");
        if (i > 0) require(fractions[i] > fractions[i - 1], "sparsity_study: fractions must be strictly increasing");
    }
    StudyResult r;
    r.axis = "sensor_fraction";
    for (const auto& m : models) r.models.push_back(m.name);
    r.reports.assign(models.size(), {});
    const auto samples = ds.split(split);
    for (double f : fractions) {
        r.labels.push_back(fraction_label(f));
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            r.reports[mi].push_back(evaluate_samples(*models[mi].ckpt, samples, ds.manifest, uq, f, mask_seed));
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

struct ComparisonRow {
    std::string condition;
    double mac_a = 0, mac_b = 0;
    double freq_mae_a = 0, freq_mae_b = 0;
    double damp_mae_a = 0, damp_mae_b = 0;
    // winner flags: 'A', 'B' or '=' (tie)
    char win_mac = '=', win_freq = '=', win_damp = '=';
};

struct Comparison {
    std::string model_a, model_b;
    std::vector<ComparisonRow> rows;
};

namespace detail {
inline char winner(double a, double b, bool higher_better) {
    if (a == b) return '=';
    return (a > b) == higher_better ? 'A' : 'B';
}
}  // namespace detail

inline Comparison compare_models(const std::string& name_a, const std::vector<std::string>& labels_a,
                                 const std::vector<EvalReport>& a, const std::string& name_b,
                                 const std::vector<std::string>& labels_b, const std::vector<EvalReport>& b) {
    if (labels_a != labels_b || a.size() != b.size() || a.size() != labels_a.size()) {
        throw InvalidArgument("compare_models: condition axes do not match");
    }
    Comparison c{name_a, name_b, {}};
    for (std::size_t i = 0; i < a.size(); ++i) {
        ComparisonRow row;
        row.condition = labels_a[i];
        row.mac_a = a[i].mean_mac;
        row.mac_b = b[i].mean_mac;
        row.freq_mae_a = a[i].freq_mae;
        row.freq_mae_b = b[i].freq_mae;
        row.damp_mae_a = a[i].damp_mae;
        row.damp_mae_b = b[i].damp_mae;
        row.win_mac = detail::winner(row.mac_a, row.mac_b, true);
        row.win_freq = detail::winner(row.freq_mae_a, row.freq_mae_b, false);
        row.win_damp = detail::winner(row.damp_mae_a, row.damp_mae_b, false);
        c.rows.push_back(row);
    }
    return c;
}

inline Comparison compare_models(const StudyResult& s) {
    if (s.models.size() != 2) throw InvalidArgument("compare_models: study must contain exactly two models");
    return compare_models(s.models[0], s.labels, s.reports[0], s.models[1], s.labels, s.reports[1]);
}

}  // namespace mvgae::eval
