#pragma once

/**
 * @file config.hpp
 * @brief Merged run configuration: JSON file plus dotted-path overrides,
 *        validated section by section and digested for provenance.
 */

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modalvgae/core/digest.hpp"
#include "modalvgae/core/errors.hpp"
#include "modalvgae/dataset/generate.hpp"
#include "modalvgae/dataset/io.hpp"
#include "modalvgae/eval/pipeline.hpp"
#include "modalvgae/model/config.hpp"
#include "modalvgae/train/masked.hpp"
#include "modalvgae/train/trainer.hpp"

namespace mvgae::cli {

/// Study settings that are not part of any single module.
struct StudyConfig {
    std::vector<std::string> snr{"clean", "30", "20", "10"};
    std::vector<double> fractions{5, 10, 20, 30, 50, 80, 95};  // percent of nodes observed
    std::string split = "test";
    train::MaskTrainConfig mask;

    void validate() const {
        eval::parse_snr_list(snr);
        require(!fractions.empty(), "study: fractions must not be empty");
        for (std::size_t i = 0; i < fractions.size(); ++i) {
            require(fractions[i] > 0.0 && fractions[i] <= 100.0, "study: fractions are percentages in (0, 100]");
            if (i > 0) require(fractions[i] > fractions[i - 1], "study: fractions must be strictly increasing");
        }
        require(split == "train" || split == "val" || split == "test", "study: split must be train, val or test");
        mask.validate();
    }

    std::vector<double> fraction_values() const {
        std::vector<double> out;
        for (double f : fractions) out.push_back(f / 100.0);
        return out;
    }
};

inline void to_json(nlohmann::json& j, const StudyConfig& c) {
    j = nlohmann::json{{"snr", c.snr}, {"fractions", c.fractions}, {"split", c.split}, {"mask", c.mask}};
}

inline void from_json(const nlohmann::json& j, StudyConfig& c) {
    StudyConfig d;
    c.snr = j.value("snr", d.snr);
    c.fractions = j.value("fractions", d.fractions);
    c.split = j.value("split", d.split);
    c.mask = j.contains("mask") ? j.at("mask").get<train::MaskTrainConfig>() : d.mask;
}

struct RunConfig {
    GenerationConfig generation;
    ModelConfig model;
    train::TrainConfig train;
    eval::UQConfig uq;
    StudyConfig study;

    std::string source;                  // config file path, empty for defaults
    std::vector<std::string> overrides;  // "a.b=value" as given

    nlohmann::json tree() const {
        return {{"generation", generation}, {"model", model}, {"train", train}, {"uq", uq}, {"study", study}};
    }

    /// Digest of the canonical tree; object keys are sorted, so input key order is irrelevant.
    std::string digest() const { return json_digest(tree()); }

    void validate() const {
        generation.validate();
        model.validate();
        train.validate(model.n_modes);
        uq.validate();
        study.validate();
        require(model.n_modes == generation.truss.n_modes, "config: model.n_modes must equal generation.truss.n_modes");
    }
};

namespace detail {

/// Parses an override value as JSON when possible, otherwise as a plain string.
inline nlohmann::json parse_value(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
        return text;
    }
}

inline void apply_override(nlohmann::json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw InvalidArgument("config override '" + assignment + "' must look like section.key=value");
    }
    const std::string path = assignment.substr(0, eq);
    nlohmann::json* node = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw InvalidArgument("config override '" + assignment + "' has an empty path component");
        if (node->is_null()) *node = nlohmann::json::object();
        if (!node->is_object()) throw InvalidArgument("config override '" + assignment + "' descends into a non-object");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = parse_value(assignment.substr(eq + 1));
}

/// Rejects keys in `given` that the canonical serialization does not know about.
inline void check_known_keys(const nlohmann::json& given, const nlohmann::json& canonical, const std::string& prefix) {
    if (!given.is_object()) return;
    for (auto it = given.begin(); it != given.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!canonical.is_object() || !canonical.contains(it.key())) {
            throw InvalidArgument("config: unknown key '" + path + "'");
        }
        check_known_keys(it.value(), canonical.at(it.key()), path);
    }
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        if (j.contains("generation")) c.generation = j.at("generation").get<GenerationConfig>();
        if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
        if (j.contains("train")) c.train = j.at("train").get<train::TrainConfig>();
        if (j.contains("uq")) c.uq = j.at("uq").get<eval::UQConfig>();
        if (j.contains("study")) c.study = j.at("study").get<StudyConfig>();
    } catch (const nlohmann::json::exception& ex) {
        throw InvalidArgument(std::string("config: wrong value type: ") + ex.what());
    }
    detail::check_known_keys(j, c.tree(), "");
    if (!j.contains("model") || !j.at("model").contains("n_modes")) c.model.n_modes = c.generation.truss.n_modes;
    return c;
}

/// Loads `path` (optional), applies overrides in order, then validates everything.
inline RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    nlohmann::json j = nlohmann::json::object();
    if (!path.empty()) {
        try {
            j = nlohmann::json::parse(mvgae::detail::read_file(path));
        } catch (const nlohmann::json::exception& ex) {
            throw InvalidArgument("config: cannot parse '" + path + "': " + ex.what());
        }
        if (!j.is_object()) throw InvalidArgument("config: top level of '" + path + "' must be an object");
    }
    for (const auto& o : overrides) detail::apply_override(j, o);
    RunConfig c = config_from_json(j);
    c.source = path;
    c.overrides = overrides;
    c.validate();
    return c;
}

}  // namespace mvgae::cli
