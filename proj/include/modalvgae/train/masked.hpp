#pragma once

/**
 * @file masked.hpp
 * @brief Training data with random sensor masking for the low-sensor variant.
 */

#include <cstdint>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/rng.hpp"
#include "modalvgae/dataset/graph.hpp"
#include "modalvgae/dataset/io.hpp"
#include "modalvgae/train/trainer.hpp"

namespace mvgae::train {

struct MaskTrainConfig {
    double min_fraction = 0.05;
    double max_fraction = 1.0;
    double full_probability = 0.1;  // share of graphs left fully observed each epoch
    std::uint64_t seed = 13;

    void validate() const {
        require(min_fraction > 0.0 && min_fraction <= max_fraction && max_fraction <= 1.0,
                "mask: need 0 < min_fraction <= max_fraction <= 1");
        require(full_probability >= 0.0 && full_probability <= 1.0, "mask: full_probability must be in [0, 1]");
    }

    double draw(Rng& rng) const {
        if (rng.uniform() < full_probability) return 1.0;
        return rng.uniform(min_fraction, max_fraction);
    }
};

inline void to_json(nlohmann::json& j, const MaskTrainConfig& c) {
    j = nlohmann::json{{"min_fraction", c.min_fraction},
                       {"max_fraction", c.max_fraction},
                       {"full_probability", c.full_probability},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, MaskTrainConfig& c) {
    MaskTrainConfig d;
    c.min_fraction = j.value("min_fraction", d.min_fraction);
    c.max_fraction = j.value("max_fraction", d.max_fraction);
    c.full_probability = j.value("full_probability", d.full_probability);
    c.seed = j.value("seed", d.seed);
}

/// Normalized, flag-free training data (the plain model input).
inline TrainData make_train_data(const Dataset& ds) {
    const TargetTransform tf;
    TrainData d;
    for (const auto* s : ds.split("train")) d.train.push_back(prepare<float>(apply_normalization(*s, ds.manifest.norm), tf));
    for (const auto* s : ds.split("val")) d.val.push_back(prepare<float>(apply_normalization(*s, ds.manifest.norm), tf));
    return d;
}

/**
 * Training data for the masked-input model: each epoch every training graph
 * is re-masked with a freshly drawn sensor fraction. Validation graphs get
 * one fixed draw so the selection metric is comparable across epochs.
 */
inline TrainData make_masked_train_data(const Dataset& ds, const MaskTrainConfig& mc) {
    mc.validate();
    const TargetTransform tf;
    auto base = std::make_shared<std::vector<GraphSample>>();
    TrainData d;
    for (const auto* s : ds.split("train")) {
        base->push_back(apply_normalization(*s, ds.manifest.norm));
        d.train.push_back(prepare<float>(with_observed_flag(base->back()), tf));
    }
    for (const auto* s : ds.split("val")) {
        Rng rng(mc.seed, s->id, Stream::SensorMask);
        const double f = mc.draw(rng);
        const auto norm = apply_normalization(*s, ds.manifest.norm);
        d.val.push_back(prepare<float>(mask_sensors(norm, f, derive_seed(mc.seed, s->id, Stream::SensorMask)), tf));
    }
    d.augment = [base, mc](std::size_t i, int epoch, PreparedGraph<float>& g) {
        const auto& s = (*base)[i];
        const std::uint64_t key = static_cast<std::uint64_t>(epoch) * 1000003ull + s.id;
        Rng rng(mc.seed ^ 0x5bd1e995ull, key, Stream::SensorMask);
        const double f = mc.draw(rng);
        g.features = mask_sensors(s, f, derive_seed(mc.seed, key, Stream::SensorMask)).features;
    };
    return d;
}

}  // namespace mvgae::train
