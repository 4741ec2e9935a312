#pragma once

/**
 * @file support.hpp
 * @brief Small fixtures shared by the unit tests: tiny generation and model
 *        configurations, random graphs, and a scratch directory.
 */

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>
#include <random>
#include <stdexcept>
#include <string>

#include "modalvgae/dataset/generate.hpp"
#include "modalvgae/model/config.hpp"

namespace mvgae::fixtures {

/// 64-bin PSDs from short records: a full dataset of 20 graphs builds in well under a second.
inline GenerationConfig tiny_generation(int n_train = 12, int n_val = 4, int n_test = 4) {
    GenerationConfig g;
    g.truss.min_nodes = 6;
    g.truss.max_nodes = 10;
    g.excitation.duration = 8.0;
    g.welch.segment_length = 256;
    g.psd_bins = 64;
    g.n_train = n_train;
    g.n_val = n_val;
    g.n_test = n_test;
    return g;
}

inline ModelConfig tiny_model(int in_features = 66, int n_modes = 4) {
    ModelConfig c;
    c.in_features = in_features;
    c.spectral_widths = {16, 12};
    c.d = 12;
    c.d2 = 20;
    c.d_z = 6;
    c.latent_projection = 10;
    c.fusion_widths = {16, 12};
    c.decoder_reduced = 8;
    c.skip_width = 8;
    c.head_hidden = {12};
    c.n_modes = n_modes;
    return c;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("modalvgae_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// One row of the frozen NIG marginal oracle: y, gamma, nu, alpha, beta, log-density.
using NigOracleRow = std::array<double, 6>;

/// Reads tests/data/nig_quadrature.csv (log-densities from numerical integration of the NIG joint).
inline std::vector<NigOracleRow> load_nig_oracle() {
    std::ifstream in(std::string(MODALVGAE_TEST_DATA_DIR) + "/nig_quadrature.csv");
    if (!in) throw std::runtime_error("cannot open nig_quadrature.csv");
    std::vector<NigOracleRow> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        NigOracleRow r{};
        for (auto& v : r) {
            std::string cell;
            std::getline(ss, cell, ',');
            v = std::stod(cell);
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace mvgae::fixtures
