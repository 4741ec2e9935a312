#pragma once

/**
 * @file checkpoint.hpp
 * @brief ckpt.json manifest + ckpt.bin little-endian float32 payload.
 *
 * The payload holds every parameter in manifest order (row-major within a
 * matrix), followed by optional named arrays such as SWAG moments.
 */

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modalvgae/core/digest.hpp"
#include "modalvgae/core/errors.hpp"
#include "modalvgae/dataset/io.hpp"
#include "modalvgae/model/baseline.hpp"
#include "modalvgae/model/config.hpp"
#include "modalvgae/nn/params.hpp"
#include "modalvgae/uq/swag.hpp"

namespace mvgae::train {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    std::string kind = "ures_vgae";  // or "baseline"
    ModelConfig model;
    nn::ParamStore<float> params;
    std::optional<uq::SwagPosterior> swag;
    nlohmann::json info = nlohmann::json::object();  // schedule state, metrics, dataset digests
};

inline std::string model_digest(const ModelConfig& c) { return json_digest(nlohmann::json(c)); }

/// Human-readable list of differing keys between two model configurations.
inline std::string config_diff(const ModelConfig& a, const ModelConfig& b) {
    const nlohmann::json ja(a), jb(b);
    std::string out;
    for (auto it = ja.begin(); it != ja.end(); ++it) {
        if (!jb.contains(it.key()) || jb.at(it.key()) != it.value()) {
            out += "  " + it.key() + ": checkpoint=" + it.value().dump() + " expected=" +
                   (jb.contains(it.key()) ? jb.at(it.key()).dump() : std::string("<missing>")) + "\n";
        }
    }
    return out;
}

namespace detail {

/// Refuses a parameter set whose names, order or shapes differ from a fresh model of that kind.
inline void verify_layout(const Checkpoint& ck) {
    nn::ParamStore<float> ref;
    if (ck.kind == "ures_vgae") {
        ref = model::init_params<float>(ck.model, 0);
    } else if (ck.kind == "baseline") {
        ref = model::init_baseline_params<float>(ck.model, 0);
    } else {
        throw FormatError("checkpoint: unknown model kind '" + ck.kind + "'");
    }
    const auto& want = ref.entries();
    const auto& got = ck.params.entries();
    if (want.size() != got.size()) {
        throw FormatError("checkpoint: " + std::to_string(got.size()) + " parameter tensors, model has " +
                          std::to_string(want.size()));
    }
    for (std::size_t i = 0; i < want.size(); ++i) {
        if (want[i].name != got[i].name || want[i].value.rows() != got[i].value.rows() ||
            want[i].value.cols() != got[i].value.cols()) {
            throw FormatError("checkpoint: parameter " + std::to_string(i) + " is '" + got[i].name + "' " +
                              std::to_string(got[i].value.rows()) + "x" + std::to_string(got[i].value.cols()) +
                              ", model expects '" + want[i].name + "' " + std::to_string(want[i].value.rows()) + "x" +
                              std::to_string(want[i].value.cols()));
        }
    }
}

inline void append_f32(std::string& buf, const float* p, std::size_t n) {
    buf.append(reinterpret_cast<const char*>(p), n * sizeof(float));
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
    static_assert(std::endian::native == std::endian::little);
    std::filesystem::create_directories(dir);
    std::string bin;
    nlohmann::json params = nlohmann::json::array();
    for (const auto& e : ck.params.entries()) {
        params.push_back({{"name", e.name},
                          {"shape", {e.value.rows(), e.value.cols()}},
                          {"group", nn::to_string(e.group)},
                          {"offset", bin.size() / sizeof(float)}});
        for (Eigen::Index r = 0; r < e.value.rows(); ++r) {
            for (Eigen::Index c = 0; c < e.value.cols(); ++c) {
                const float v = e.value(r, c);
                detail::append_f32(bin, &v, 1);
            }
        }
    }
    nlohmann::json arrays = nlohmann::json::array();
    if (ck.swag) {
        ck.swag->validate();
        for (const auto& [name, vec] : {std::pair{"swag.mean", &ck.swag->mean}, std::pair{"swag.var", &ck.swag->var}}) {
            arrays.push_back({{"name", name}, {"length", vec->size()}, {"offset", bin.size() / sizeof(float)}});
            const Eigen::VectorXf f = vec->cast<float>();
            detail::append_f32(bin, f.data(), static_cast<std::size_t>(f.size()));
        }
    }
    nlohmann::json manifest = {{"format_version", kCheckpointVersion},
                               {"kind", ck.kind},
                               {"model_config", ck.model},
                               {"model_digest", model_digest(ck.model)},
                               {"parameters", params},
                               {"arrays", arrays},
                               {"swag_snapshots", ck.swag ? ck.swag->k : 0},
                               {"payload_floats", bin.size() / sizeof(float)},
                               {"payload_crc32", mvgae::detail::crc32_of(bin.data(), bin.size())},
                               {"info", ck.info}};
    mvgae::detail::write_file(dir / "ckpt.bin", bin);
    mvgae::detail::write_file(dir / "ckpt.json", manifest.dump(2) + "\n");
}

/**
 * Loads a checkpoint. When `expected` is given, a differing model
 * configuration is refused with a per-key diff.
 */
inline Checkpoint load_checkpoint(const std::filesystem::path& dir, const std::optional<ModelConfig>& expected = {}) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(mvgae::detail::read_file(dir / "ckpt.json"));
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError("checkpoint: malformed ckpt.json: " + std::string(ex.what()));
    }
    const int version = j.value("format_version", -1);
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: format version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint ck;
    ck.kind = j.at("kind").get<std::string>();
    ck.model = j.at("model_config").get<ModelConfig>();
    ck.info = j.value("info", nlohmann::json::object());
    if (expected && model_digest(*expected) != model_digest(ck.model)) {
        throw FormatError("checkpoint: model configuration differs from the requested one:\n" +
                          config_diff(ck.model, *expected));
    }
    const std::string bin = mvgae::detail::read_file(dir / "ckpt.bin");
    const auto floats = j.at("payload_floats").get<std::size_t>();
    if (bin.size() != floats * sizeof(float)) {
        throw FormatError("checkpoint: payload is " + std::to_string(bin.size()) + " bytes, manifest expects " +
                          std::to_string(floats * sizeof(float)) + " (truncated or corrupted)");
    }
    if (mvgae::detail::crc32_of(bin.data(), bin.size()) != j.at("payload_crc32").get<std::uint32_t>()) {
        throw FormatError("checkpoint: payload checksum mismatch");
    }
    auto read_floats = [&](std::size_t offset, std::size_t n, float* dst) {
        if (offset + n > floats) throw FormatError("checkpoint: array extends past the payload");
        std::memcpy(dst, bin.data() + offset * sizeof(float), n * sizeof(float));
    };
    for (const auto& p : j.at("parameters")) {
        const auto shape = p.at("shape").get<std::vector<Eigen::Index>>();
        if (shape.size() != 2) throw FormatError("checkpoint: parameter shape must be 2-D");
        nn::Mat<float> m(shape[0], shape[1]);
        std::vector<float> tmp(static_cast<std::size_t>(m.size()));
        read_floats(p.at("offset").get<std::size_t>(), tmp.size(), tmp.data());
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = tmp[k++];
        }
        const auto group = p.at("group").get<std::string>() == "head" ? nn::ParamGroup::Head : nn::ParamGroup::Backbone;
        ck.params.add(p.at("name").get<std::string>(), std::move(m), group);
    }
    Eigen::VectorXd swag_mean, swag_var;
    for (const auto& a : j.value("arrays", nlohmann::json::array())) {
        const auto len = a.at("length").get<std::size_t>();
        Eigen::VectorXf v(static_cast<Eigen::Index>(len));
        read_floats(a.at("offset").get<std::size_t>(), len, v.data());
        const auto name = a.at("name").get<std::string>();
        if (name == "swag.mean") swag_mean = v.cast<double>();
        if (name == "swag.var") swag_var = v.cast<double>();
    }
    if (j.value("swag_snapshots", 0) >= 2) {
        uq::SwagPosterior post;
        post.mean = swag_mean;
        post.var = swag_var;
        post.k = j.at("swag_snapshots").get<int>();
        post.validate();
        if (post.mean.size() != ck.params.size()) throw FormatError("checkpoint: SWAG buffers do not match parameters");
        ck.swag = post;
    }
    if (!ck.params.all_finite()) throw FormatError("checkpoint: non-finite parameter values");
    detail::verify_layout(ck);
    return ck;
}

}  // namespace mvgae::train
