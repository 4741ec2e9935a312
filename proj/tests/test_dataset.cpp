#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "modalvgae/dataset/generate.hpp"
#include "modalvgae/dataset/graph.hpp"
#include "modalvgae/dataset/io.hpp"
#include "support.hpp"

using namespace mvgae;
namespace fs = std::filesystem;

namespace {

/// Full-width sample (512 PSD bins) built from a generated truss and a synthetic PSD.
GraphSample full_width_sample(std::uint64_t seed, NodePSDMatrix* psd_out = nullptr, TrussModel* truss_out = nullptr) {
    TrussGenConfig cfg;
    const auto truss = generate_truss(seed, cfg);
    const auto modal = modal_analysis(truss, cfg.n_modes);
    NodePSDMatrix psd;
    Rng rng(seed);
    psd.values.resize(truss.n_nodes(), 512);
    for (Eigen::Index i = 0; i < psd.values.size(); ++i) psd.values.data()[i] = std::exp(rng.normal(-3.0, 2.0));
    psd.frequencies = Eigen::VectorXd::LinSpaced(512, 0.0, 255.5);
    if (psd_out) *psd_out = psd;
    if (truss_out) *truss_out = truss;
    return build_graph(truss, psd, modal, 3);
}

const Dataset& tiny_dataset() {
    static const Dataset ds = generate_dataset(fixtures::tiny_generation());
    return ds;
}

}  // namespace

TEST(Graph, DirectedEdgesAndFeatureWidth) {
    TrussModel truss;
    NodePSDMatrix psd;
    const auto s = full_width_sample(1, &psd, &truss);
    EXPECT_EQ(s.edges.size(), 2 * truss.elements.size());
    EXPECT_EQ(s.features.cols(), 514);
    EXPECT_EQ(s.features.rows(), truss.n_nodes());
    std::set<std::pair<std::uint32_t, std::uint32_t>> es;
    for (const auto& e : s.edges) es.insert({e[0], e[1]});
    for (const auto& e : s.edges) EXPECT_TRUE(es.count({e[1], e[0]}));
    // log10 transform of the PSD plus raw coordinates in the last two columns.
    EXPECT_NEAR(s.features(2, 5), std::log10(psd.values(2, 5) + 1e-12), 1e-5);
    EXPECT_FLOAT_EQ(s.features(1, 512), static_cast<float>(truss.coords(1, 0)));
    EXPECT_FLOAT_EQ(s.features(1, 513), static_cast<float>(truss.coords(1, 1)));
}

TEST(Graph, PsdRowCountMismatchIsAnError) {
    TrussModel truss;
    NodePSDMatrix psd;
    full_width_sample(2, &psd, &truss);
    psd.values.conservativeResize(truss.n_nodes() - 1, Eigen::NoChange);
    EXPECT_THROW(build_graph(truss, psd, modal_analysis(truss, 4)), InvalidArgument);
}

TEST(Normalization, FitApplyStandardizes) {
    const auto& ds = tiny_dataset();
    const auto train = ds.split("train");
    const auto st = fit_normalization(train);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(st.width()), sq = sum;
    double count = 0;
    for (const auto* s : train) {
        const Eigen::MatrixXd x = apply_normalization(s->features, st).cast<double>();
        sum += x.colwise().sum().transpose();
        sq += x.cwiseProduct(x).colwise().sum().transpose();
        count += static_cast<double>(x.rows());
    }
    const Eigen::VectorXd mean = sum / count;
    const Eigen::VectorXd var = sq / count - mean.cwiseProduct(mean);
    EXPECT_LT(mean.cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_LT((var.array() - 1.0).abs().maxCoeff(), 1e-3);
}

TEST(Normalization, ConstantColumnMapsToZero) {
    auto a = full_width_sample(3);
    auto b = full_width_sample(4);
    a.features.col(7).setConstant(2.5f);
    b.features.col(7).setConstant(2.5f);
    const auto st = fit_normalization({&a, &b});
    EXPECT_EQ(st.std[7], NormStats::kStdFloor);
    const auto x = apply_normalization(a.features, st);
    EXPECT_EQ(x.col(7).cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Normalization, WidthMismatchIsAnError) {
    const auto& ds = tiny_dataset();
    EXPECT_THROW(apply_normalization(full_width_sample(5), ds.manifest.norm), InvalidArgument);
}

TEST(TargetTransform, LogRoundTrip) {
    const TargetTransform tf;
    Eigen::VectorXd one(1);
    one << 1.0;
    EXPECT_EQ(tf.forward(one)[0], 0.0);
    Eigen::VectorXd y(4);
    y << 0.013, 1.0, 47.25, 199.9;
    const auto back = tf.inverse(tf.forward(y));
    EXPECT_LT(((back - y).array() / y.array()).abs().maxCoeff(), 1e-12);
    Eigen::VectorXd zero(2);
    zero << 0.01, 0.0;
    EXPECT_THROW(tf.forward(zero), InvalidArgument);
    TargetTransform bad;
    bad.kind = "sqrt";
    EXPECT_THROW(bad.forward(y), InvalidArgument);
}

TEST(Persistence, WriteReadRoundTrip) {
    const auto dir = fixtures::scratch_dir("roundtrip");
    const auto& ds = tiny_dataset();
    write_dataset(dir, ds);
    const auto back = read_dataset(dir);
    ASSERT_EQ(back.samples.size(), ds.samples.size());
    EXPECT_EQ(back.manifest.train_ids, ds.manifest.train_ids);
    EXPECT_EQ(back.manifest.generation_digest, ds.manifest.generation_digest);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& a = ds.samples[i];
        const auto& b = back.samples[i];
        EXPECT_EQ(a.id, b.id);
        EXPECT_TRUE((a.coords.array() == b.coords.array()).all());
        EXPECT_EQ(a.edges, b.edges);
        EXPECT_TRUE((a.features.array() == b.features.array()).all());
        EXPECT_TRUE((a.freq.array() == b.freq.array()).all());
        EXPECT_TRUE((a.zeta.array() == b.zeta.array()).all());
        EXPECT_TRUE((a.phi.array() == b.phi.array()).all());
    }
    EXPECT_TRUE((back.manifest.norm.mean.array() == ds.manifest.norm.mean.array()).all());
    EXPECT_THROW(write_dataset(dir, ds), Error);
    EXPECT_NO_THROW(write_dataset(dir, ds, true));
    fs::remove_all(dir);
}

TEST(Persistence, CorruptedMagicIsAFormatError) {
    auto bytes = encode_record(tiny_dataset().samples[0]);
    bytes[0] = 'X';
    EXPECT_THROW(decode_record(bytes), FormatError);
}

TEST(Persistence, TruncatedOrFlippedPayloadIsAFormatError) {
    const auto bytes = encode_record(tiny_dataset().samples[0]);
    EXPECT_THROW(decode_record(bytes.substr(0, bytes.size() - 10)), FormatError);
    auto flipped = bytes;
    flipped[40] = static_cast<char>(flipped[40] ^ 0x10);
    EXPECT_THROW(decode_record(flipped), FormatError);
}

TEST(Persistence, OverlappingSplitIdsRejectedOnRead) {
    const auto dir = fixtures::scratch_dir("overlap");
    write_dataset(dir, tiny_dataset());
    auto j = nlohmann::json::parse(detail::read_file(dir / "manifest.json"));
    j["val_ids"].push_back(j["train_ids"][0]);
    detail::write_file(dir / "manifest.json", j.dump());
    EXPECT_THROW(read_dataset(dir), FormatError);
    fs::remove_all(dir);
}

TEST(Masking, FullFractionOnlyAddsFlag) {
    const auto& s = tiny_dataset().samples[0];
    const auto m = mask_sensors(s, 1.0, 1);
    ASSERT_EQ(m.features.cols(), s.features.cols() + 1);
    EXPECT_TRUE((m.features.leftCols(s.features.cols()).array() == s.features.array()).all());
    EXPECT_TRUE((m.features.col(s.features.cols()).array() == 1.0f).all());
    EXPECT_TRUE((with_observed_flag(s).features.array() == m.features.array()).all());
}

TEST(Masking, CeilArithmeticAndDeterminism) {
    EXPECT_EQ(observed_count(0.05, 20), 1);
    EXPECT_EQ(observed_count(0.5, 7), 4);
    EXPECT_EQ(observed_count(0.01, 10), 1);
    EXPECT_THROW(observed_count(0.0, 10), InvalidArgument);
    const auto& s = tiny_dataset().samples[1];
    const auto a = mask_sensors(s, 0.3, 77);
    const auto b = mask_sensors(s, 0.3, 77);
    EXPECT_TRUE((a.features.array() == b.features.array()).all());
    const int flag_col = static_cast<int>(s.features.cols());
    EXPECT_EQ(static_cast<int>(a.features.col(flag_col).sum()), observed_count(0.3, s.n_nodes()));
    const int psd_cols = flag_col - 2;
    for (int i = 0; i < s.n_nodes(); ++i) {
        if (a.features(i, flag_col) == 0.0f) {
            EXPECT_EQ(a.features.row(i).head(psd_cols).cwiseAbs().maxCoeff(), 0.0f);
            EXPECT_EQ(a.features(i, psd_cols), s.features(i, psd_cols));
        }
    }
}

TEST(Generation, CleanItemReproducesStoredSampleAndDigestIsStable) {
    const auto cfg = fixtures::tiny_generation();
    const auto& ds = tiny_dataset();
    const auto item = generate_item(cfg, 5);
    EXPECT_TRUE((item.sample.features.array() == ds.samples[5].features.array()).all());
    EXPECT_EQ(generation_digest(cfg), ds.manifest.generation_digest);
    auto other = cfg;
    other.seed += 1;
    EXPECT_NE(generation_digest(other), ds.manifest.generation_digest);
    const auto noisy = generate_item(cfg, 5, 10.0);
    EXPECT_FALSE((noisy.sample.features.array() == item.sample.features.array()).all());
    EXPECT_TRUE((noisy.sample.phi.array() == item.sample.phi.array()).all());
}

TEST(Generation, ConfigJsonRoundTripAndValidation) {
    auto cfg = fixtures::tiny_generation();
    const nlohmann::json j = cfg;
    const auto back = j.get<GenerationConfig>();
    EXPECT_EQ(generation_digest(back), generation_digest(cfg));
    cfg.psd_bins = 63;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(Generation, SplitsAreDisjointAndCoverAllIds) {
    const auto& m = tiny_dataset().manifest;
    EXPECT_EQ(m.train_ids.size(), 12u);
    EXPECT_EQ(m.val_ids.size(), 4u);
    EXPECT_EQ(m.test_ids.size(), 4u);
    const auto ids = m.all_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(ids[i], i);
}
