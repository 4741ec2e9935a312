#pragma once

/**
 * @file io.hpp
 * @brief Dataset directory persistence: manifest.json plus one checksummed
 *        little-endian record file per graph.
 *
 * Record layout: "MVGA", u32 version, u32 [N, E2, F, M], coords (N x 2 f32),
 * edges (E2 x 2 u32), features (N x F f32), f (M f32), zeta (M f32),
 * phi (N x M f32), u32 CRC32 over everything between the version field and
 * the checksum. Matrices are written row-major.
 */

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/dataset/graph.hpp"

namespace mvgae {

static_assert(std::endian::native == std::endian::little, "record I/O assumes a little-endian host");

inline constexpr std::uint32_t kRecordVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;

namespace detail {

class ByteWriter {
public:
    void u32(std::uint32_t v) { raw(&v, 4); }
    void f32(float v) { raw(&v, 4); }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const char*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    template <class Derived>
    void matrix_f32(const Eigen::MatrixBase<Derived>& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) f32(static_cast<float>(m(r, c)));
        }
    }
    std::string& bytes() { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(const std::string& data, std::size_t pos, std::size_t end, std::string ctx)
        : data_(data), pos_(pos), end_(end), ctx_(std::move(ctx)) {}

    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    float f32() {
        float v;
        raw(&v, 4);
        return v;
    }
    void raw(void* p, std::size_t n) {
        if (end_ - pos_ < n) throw FormatError(ctx_ + ": truncated record");
        std::memcpy(p, data_.data() + pos_, n);
        pos_ += n;
    }
    Eigen::MatrixXf matrix_f32(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXf m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f32();
        }
        return m;
    }
    std::size_t remaining() const { return end_ - pos_; }

private:
    const std::string& data_;
    std::size_t pos_;
    std::size_t end_;
    std::string ctx_;
};

inline std::uint32_t crc32_of(const char* p, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(p), chunk);
        p += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace detail

inline std::string encode_record(const GraphSample& s) {
    s.validate();
    detail::ByteWriter w;
    w.raw("MVGA", 4);
    w.u32(kRecordVersion);
    const std::size_t payload_start = w.bytes().size();
    const auto n = static_cast<std::uint32_t>(s.n_nodes());
    const auto m = static_cast<std::uint32_t>(s.n_modes());
    w.u32(n);
    w.u32(static_cast<std::uint32_t>(s.edges.size()));
    w.u32(static_cast<std::uint32_t>(s.features.cols()));
    w.u32(m);
    w.matrix_f32(s.coords);
    for (const auto& e : s.edges) {
        w.u32(e[0]);
        w.u32(e[1]);
    }
    w.matrix_f32(s.features);
    for (Eigen::Index k = 0; k < s.freq.size(); ++k) w.f32(s.freq[k]);
    for (Eigen::Index k = 0; k < s.zeta.size(); ++k) w.f32(s.zeta[k]);
    w.matrix_f32(s.phi);
    auto& b = w.bytes();
    w.u32(detail::crc32_of(b.data() + payload_start, b.size() - payload_start));
    return std::move(b);
}

inline GraphSample decode_record(const std::string& bytes, const std::string& ctx = "record") {
    if (bytes.size() < 8 + 16 + 4) throw FormatError(ctx + ": truncated record");
    if (std::memcmp(bytes.data(), "MVGA", 4) != 0) throw FormatError(ctx + ": bad magic bytes");
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + 4, 4);
    if (version != kRecordVersion) {
        throw FormatError(ctx + ": record version " + std::to_string(version) + " (expected " +
                          std::to_string(kRecordVersion) + ")");
    }
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    detail::ByteReader r(bytes, 8, bytes.size() - 4, ctx);
    const auto n = r.u32(), e2 = r.u32(), f = r.u32(), m = r.u32();
    const std::uint64_t need = 4ull * (2ull * n + 2ull * e2 + std::uint64_t(n) * f + 2ull * m + std::uint64_t(n) * m);
    if (r.remaining() != need) throw FormatError(ctx + ": truncated record (payload size mismatch)");
    if (detail::crc32_of(bytes.data() + 8, bytes.size() - 12) != stored_crc) {
        throw FormatError(ctx + ": checksum mismatch");
    }
    GraphSample s;
    s.coords = r.matrix_f32(n, 2);
    s.edges.resize(e2);
    for (auto& e : s.edges) {
        e[0] = r.u32();
        e[1] = r.u32();
    }
    s.features = r.matrix_f32(n, f);
    s.freq.resize(m);
    for (std::uint32_t k = 0; k < m; ++k) s.freq[k] = r.f32();
    s.zeta.resize(m);
    for (std::uint32_t k = 0; k < m; ++k) s.zeta[k] = r.f32();
    s.phi = r.matrix_f32(n, m);
    try {
        s.validate();
    } catch (const InvalidArgument& ex) {
        throw FormatError(ctx + ": " + ex.what());
    }
    return s;
}

inline std::string record_filename(std::uint32_t id) { return "graph_" + std::to_string(id) + ".bin"; }

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct DatasetManifest {
    int schema_version = kManifestSchemaVersion;
    std::vector<std::uint32_t> train_ids, val_ids, test_ids;
    int n_modes = 4;
    int feature_dim = 514;
    NormStats norm;
    TargetTransform target_transform;
    std::string generation_digest;
    nlohmann::json generation;  // full generation config for re-simulation

    std::size_t total() const { return train_ids.size() + val_ids.size() + test_ids.size(); }

    /// All ids in ascending order.
    std::vector<std::uint32_t> all_ids() const {
        std::vector<std::uint32_t> ids;
        ids.insert(ids.end(), train_ids.begin(), train_ids.end());
        ids.insert(ids.end(), val_ids.begin(), val_ids.end());
        ids.insert(ids.end(), test_ids.begin(), test_ids.end());
        std::sort(ids.begin(), ids.end());
        return ids;
    }

    const std::vector<std::uint32_t>& split(const std::string& name) const {
        if (name == "train") return train_ids;
        if (name == "val") return val_ids;
        if (name == "test") return test_ids;
        throw InvalidArgument("unknown split '" + name + "' (expected train, val or test)");
    }

    void validate() const {
        if (schema_version != kManifestSchemaVersion) {
            throw FormatError("manifest: schema version " + std::to_string(schema_version) + " (expected " +
                              std::to_string(kManifestSchemaVersion) + ")");
        }
        std::set<std::uint32_t> seen;
        for (const auto* ids : {&train_ids, &val_ids, &test_ids}) {
            for (auto id : *ids) {
                if (!seen.insert(id).second) throw FormatError("manifest: id " + std::to_string(id) + " appears in two splits");
            }
        }
        if (n_modes < 1 || feature_dim < 1) throw FormatError("manifest: n_modes and feature_dim must be >= 1");
        try {
            norm.validate();
        } catch (const InvalidArgument& ex) {
            throw FormatError(std::string("manifest: ") + ex.what());
        }
        if (norm.width() != feature_dim) throw FormatError("manifest: normalization width != feature_dim");
        target_transform.check();
    }
};

inline void to_json(nlohmann::json& j, const DatasetManifest& m) {
    j = nlohmann::json{{"schema_version", m.schema_version},
                       {"counts",
                        {{"total", m.total()},
                         {"train", m.train_ids.size()},
                         {"val", m.val_ids.size()},
                         {"test", m.test_ids.size()}}},
                       {"train_ids", m.train_ids},
                       {"val_ids", m.val_ids},
                       {"test_ids", m.test_ids},
                       {"n_modes", m.n_modes},
                       {"feature_dim", m.feature_dim},
                       {"normalization", m.norm},
                       {"target_transform", m.target_transform.kind},
                       {"generation_digest", m.generation_digest},
                       {"generation", m.generation}};
}

inline void from_json(const nlohmann::json& j, DatasetManifest& m) {
    m.schema_version = j.at("schema_version").get<int>();
    m.train_ids = j.at("train_ids").get<std::vector<std::uint32_t>>();
    m.val_ids = j.at("val_ids").get<std::vector<std::uint32_t>>();
    m.test_ids = j.at("test_ids").get<std::vector<std::uint32_t>>();
    m.n_modes = j.at("n_modes").get<int>();
    m.feature_dim = j.at("feature_dim").get<int>();
    m.norm = j.at("normalization").get<NormStats>();
    m.target_transform.kind = j.at("target_transform").get<std::string>();
    m.generation_digest = j.value("generation_digest", std::string{});
    m.generation = j.value("generation", nlohmann::json::object());
}

/// Samples are indexed by id; ids are 0..total-1.
struct Dataset {
    DatasetManifest manifest;
    std::vector<GraphSample> samples;

    const GraphSample& get(std::uint32_t id) const {
        if (id >= samples.size()) throw InvalidArgument("Dataset: unknown id " + std::to_string(id));
        return samples[id];
    }

    std::vector<const GraphSample*> split(const std::string& name) const {
        std::vector<const GraphSample*> out;
        for (auto id : manifest.split(name)) out.push_back(&get(id));
        return out;
    }
};

/**
 * Writes manifest.json and graph_<id>.bin files. An existing non-empty
 * directory is refused unless overwrite is set.
 */
inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds, bool overwrite = false) {
    namespace fs = std::filesystem;
    ds.manifest.validate();
    if (ds.samples.size() != ds.manifest.total()) throw InvalidArgument("write_dataset: sample count != manifest total");
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (ds.samples[i].id != i) throw InvalidArgument("write_dataset: samples must be ordered by id");
    }
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!overwrite) throw Error("write_dataset: '" + dir.string() + "' is not empty (use --force to overwrite)");
        for (const auto& entry : fs::directory_iterator(dir)) {
            const auto name = entry.path().filename().string();
            if (name == "manifest.json" || (name.rfind("graph_", 0) == 0 && entry.path().extension() == ".bin")) {
                fs::remove(entry.path());
            }
        }
    }
    fs::create_directories(dir);
    for (const auto& s : ds.samples) detail::write_file(dir / record_filename(s.id), encode_record(s));
    detail::write_file(dir / "manifest.json", nlohmann::json(ds.manifest).dump(2) + "\n");
}

inline DatasetManifest read_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    if (!std::filesystem::exists(path)) throw FormatError("dataset: missing '" + path.string() + "'");
    DatasetManifest m;
    try {
        m = nlohmann::json::parse(detail::read_file(path)).get<DatasetManifest>();
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError("dataset: malformed manifest: " + std::string(ex.what()));
    }
    m.validate();
    const auto ids = m.all_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] != i) throw FormatError("manifest: ids must be exactly 0..total-1");
    }
    return m;
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    ds.manifest = read_manifest(dir);
    ds.samples.resize(ds.manifest.total());
    for (std::uint32_t id = 0; id < ds.samples.size(); ++id) {
        const auto path = dir / record_filename(id);
        auto s = decode_record(detail::read_file(path), path.string());
        s.id = id;
        if (s.n_modes() != ds.manifest.n_modes) throw FormatError(path.string() + ": mode count differs from manifest");
        ds.samples[id] = std::move(s);
    }
    return ds;
}

}  // namespace mvgae
