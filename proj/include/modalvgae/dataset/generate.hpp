#pragma once

/**
 * @file generate.hpp
 * @brief End-to-end synthesis of a graph dataset: truss, modal analysis,
 *        random-vibration response, Welch PSD, graph sample.
 */

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modalvgae/core/digest.hpp"
#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/parallel.hpp"
#include "modalvgae/core/rng.hpp"
#include "modalvgae/dataset/graph.hpp"
#include "modalvgae/dataset/io.hpp"
#include "modalvgae/psd/response.hpp"
#include "modalvgae/psd/welch.hpp"
#include "modalvgae/truss/truss.hpp"

namespace mvgae {

struct GenerationConfig {
    TrussGenConfig truss;
    ExcitationSpec excitation;
    WelchConfig welch;
    int n_train = 200;
    int n_val = 50;
    int n_test = 50;
    std::uint64_t seed = 7;
    int psd_bins = 512;

    int total() const { return n_train + n_val + n_test; }

    /// Highest admissible n_modes-th frequency (Hz) given the shared sampling rate.
    double frequency_cap() const {
        const double cap = 0.45 * excitation.fs;
        return truss.max_frequency_hz > 0.0 ? std::min(truss.max_frequency_hz, cap) : cap;
    }

    void validate() const {
        truss.validate();
        welch.validate();
        excitation.validate(welch);
        require(n_train >= 1 && n_val >= 0 && n_test >= 0, "GenerationConfig: need n_train >= 1, n_val/n_test >= 0");
        require(psd_bins >= 1 && 2 * psd_bins + 1 == welch.raw_bins(),
                "GenerationConfig: psd_bins must equal (segment_length / 2) / 2");
    }
};

inline void to_json(nlohmann::json& j, const GenerationConfig& c) {
    nlohmann::json trap = nlohmann::json::array();
    for (const auto& p : c.truss.trapezoid) trap.push_back({p.x(), p.y()});
    j = nlohmann::json{
        {"seed", c.seed},
        {"n_train", c.n_train},
        {"n_val", c.n_val},
        {"n_test", c.n_test},
        {"psd_bins", c.psd_bins},
        {"truss",
         {{"trapezoid", trap},
          {"min_nodes", c.truss.min_nodes},
          {"max_nodes", c.truss.max_nodes},
          {"youngs_modulus", {c.truss.youngs_modulus.lo, c.truss.youngs_modulus.hi}},
          {"area", {c.truss.area.lo, c.truss.area.hi}},
          {"density", {c.truss.density.lo, c.truss.density.hi}},
          {"rayleigh_a0", {c.truss.rayleigh_a0.lo, c.truss.rayleigh_a0.hi}},
          {"rayleigh_a1", {c.truss.rayleigh_a1.lo, c.truss.rayleigh_a1.hi}},
          {"damping_band", {c.truss.damping_band.lo, c.truss.damping_band.hi}},
          {"supports", c.truss.supports},
          {"n_modes", c.truss.n_modes},
          {"max_frequency_hz", c.truss.max_frequency_hz}}},
        {"excitation",
         {{"force_std", c.excitation.force_std},
          {"fs", c.excitation.fs},
          {"duration", c.excitation.duration},
          {"output_scale", c.excitation.output_scale}}},
        {"welch", {{"segment_length", c.welch.segment_length}, {"overlap", c.welch.overlap}}}};
}

namespace detail {
inline Range range_from(const nlohmann::json& j, const char* key, Range def) {
    if (!j.contains(key)) return def;
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 2) throw InvalidArgument(std::string("config: '") + key + "' must be [lo, hi]");
    return Range{v[0], v[1]};
}
}  // namespace detail

inline void from_json(const nlohmann::json& j, GenerationConfig& c) {
    GenerationConfig d;
    c.seed = j.value("seed", d.seed);
    c.n_train = j.value("n_train", d.n_train);
    c.n_val = j.value("n_val", d.n_val);
    c.n_test = j.value("n_test", d.n_test);
    c.psd_bins = j.value("psd_bins", d.psd_bins);
    c.truss = d.truss;
    if (j.contains("truss")) {
        const auto& t = j.at("truss");
        if (t.contains("trapezoid")) {
            const auto pts = t.at("trapezoid").get<std::vector<std::vector<double>>>();
            if (pts.size() != 4) throw InvalidArgument("config: truss.trapezoid needs 4 corners");
            for (std::size_t i = 0; i < 4; ++i) {
                if (pts[i].size() != 2) throw InvalidArgument("config: trapezoid corners are [x, y]");
                c.truss.trapezoid[i] = geometry::Point{pts[i][0], pts[i][1]};
            }
        }
        c.truss.min_nodes = t.value("min_nodes", d.truss.min_nodes);
        c.truss.max_nodes = t.value("max_nodes", d.truss.max_nodes);
        c.truss.youngs_modulus = detail::range_from(t, "youngs_modulus", d.truss.youngs_modulus);
        c.truss.area = detail::range_from(t, "area", d.truss.area);
        c.truss.density = detail::range_from(t, "density", d.truss.density);
        c.truss.rayleigh_a0 = detail::range_from(t, "rayleigh_a0", d.truss.rayleigh_a0);
        c.truss.rayleigh_a1 = detail::range_from(t, "rayleigh_a1", d.truss.rayleigh_a1);
        c.truss.damping_band = detail::range_from(t, "damping_band", d.truss.damping_band);
        c.truss.supports = t.value("supports", d.truss.supports);
        c.truss.n_modes = t.value("n_modes", d.truss.n_modes);
        c.truss.max_frequency_hz = t.value("max_frequency_hz", d.truss.max_frequency_hz);
    }
    c.excitation = d.excitation;
    if (j.contains("excitation")) {
        const auto& e = j.at("excitation");
        c.excitation.force_std = e.value("force_std", d.excitation.force_std);
        c.excitation.fs = e.value("fs", d.excitation.fs);
        c.excitation.duration = e.value("duration", d.excitation.duration);
        c.excitation.output_scale = e.value("output_scale", d.excitation.output_scale);
    }
    c.welch = d.welch;
    if (j.contains("welch")) {
        c.welch.segment_length = j.at("welch").value("segment_length", d.welch.segment_length);
        c.welch.overlap = j.at("welch").value("overlap", d.welch.overlap);
    }
}

inline std::string generation_digest(const GenerationConfig& c) { return json_digest(nlohmann::json(c)); }

/// Everything produced for one truss index.
struct GeneratedItem {
    TrussModel truss;
    ModalSolution modal;
    GraphSample sample;  // raw (un-normalized) features
};

/**
 * Deterministically synthesizes truss `index` of the dataset. With a finite
 * SNR, noise is added to the time series before the Welch estimate; the
 * clean condition reproduces the stored sample exactly.
 */
inline GeneratedItem generate_item(const GenerationConfig& cfg, std::uint32_t index, const Snr& snr_db = std::nullopt) {
    TrussGenConfig tc = cfg.truss;
    tc.max_frequency_hz = cfg.frequency_cap();
    GeneratedItem item;
    item.truss = generate_truss(derive_seed(cfg.seed, index, Stream::Geometry), tc);
    item.modal = modal_analysis(item.truss, tc.n_modes);
    ExcitationSpec exc = cfg.excitation;
    exc.seed = derive_seed(cfg.seed, index, Stream::Excitation);
    Eigen::MatrixXd series = simulate_response(item.modal, item.truss, exc, cfg.welch);
    if (snr_db) series = add_noise_channels(series, snr_db, derive_seed(cfg.seed, index, Stream::Noise));
    const auto psd = node_psd(series, cfg.welch, exc.fs, cfg.psd_bins);
    item.sample = build_graph(item.truss, psd, item.modal, index);
    return item;
}

/// Generates every sample (parallel over indices), splits by index and fits normalization on train.
inline Dataset generate_dataset(const GenerationConfig& cfg) {
    cfg.validate();
    Dataset ds;
    const auto n = static_cast<std::size_t>(cfg.total());
    ds.samples.resize(n);
    parallel_for(n, [&](std::size_t i) { ds.samples[i] = generate_item(cfg, static_cast<std::uint32_t>(i)).sample; });

    auto& m = ds.manifest;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (i < static_cast<std::uint32_t>(cfg.n_train)) {
            m.train_ids.push_back(i);
        } else if (i < static_cast<std::uint32_t>(cfg.n_train + cfg.n_val)) {
            m.val_ids.push_back(i);
        } else {
            m.test_ids.push_back(i);
        }
    }
    m.n_modes = cfg.truss.n_modes;
    m.feature_dim = static_cast<int>(ds.samples.front().features.cols());
    m.norm = fit_normalization(ds.split("train"));
    m.generation = nlohmann::json(cfg);
    m.generation_digest = generation_digest(cfg);
    m.validate();
    return ds;
}

}  // namespace mvgae
