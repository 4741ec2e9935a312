#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modalvgae/core/errors.hpp"

namespace mvgae {

/// Widths and regularization of the residual variational graph autoencoder.
struct ModelConfig {
    int in_features = 514;
    std::vector<int> spectral_widths{128, 128};  // last entry is D
    int d = 128;
    int d2 = 256;
    int d_z = 64;
    int latent_projection = 128;                 // width of W_z Z
    std::vector<int> fusion_widths{256, 128};    // [H2 | W_z Z] -> ... -> decoder width
    int decoder_reduced = 64;                    // MLP between decoder blocks 3 and 4
    int skip_width = 64;                         // MLP after [H4 | H1]
    std::vector<int> head_hidden{128, 128};
    int n_modes = 4;
    double dropout = 0.1;
    std::string activation = "gelu";
    double eps = 1e-6;

    int spectral_out() const { return spectral_widths.empty() ? 0 : spectral_widths.back(); }
    int decoder_width() const { return fusion_widths.empty() ? 0 : fusion_widths.back(); }
    int context_width() const { return d2 + 2 * d_z; }

    void validate() const {
        auto positive = [](const std::vector<int>& v) {
            for (int w : v) {
                if (w < 1) return false;
            }
            return !v.empty();
        };
        require(in_features >= 1 && d >= 1 && d2 >= 1 && d_z >= 1 && latent_projection >= 1 && decoder_reduced >= 1 &&
                    skip_width >= 1 && n_modes >= 1,
                "ModelConfig: all widths must be >= 1");
        require(positive(spectral_widths) && positive(fusion_widths) && positive(head_hidden),
                "ModelConfig: layer width lists must be non-empty and >= 1");
        require(d2 > d, "ModelConfig: d2 must exceed d");
        require(spectral_out() == d, "ModelConfig: spectral encoder output width must equal d (residual block 1)");
        require(dropout >= 0.0 && dropout < 1.0, "ModelConfig: dropout must be in [0, 1)");
        require(activation == "gelu", "ModelConfig: only the 'gelu' activation is supported");
        require(eps > 0.0, "ModelConfig: eps must be positive");
    }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"in_features", c.in_features},
                       {"spectral_widths", c.spectral_widths},
                       {"d", c.d},
                       {"d2", c.d2},
                       {"d_z", c.d_z},
                       {"latent_projection", c.latent_projection},
                       {"fusion_widths", c.fusion_widths},
                       {"decoder_reduced", c.decoder_reduced},
                       {"skip_width", c.skip_width},
                       {"head_hidden", c.head_hidden},
                       {"n_modes", c.n_modes},
                       {"dropout", c.dropout},
                       {"activation", c.activation},
                       {"eps", c.eps}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig d;
    c.in_features = j.value("in_features", d.in_features);
    c.spectral_widths = j.value("spectral_widths", d.spectral_widths);
    c.d = j.value("d", d.d);
    c.d2 = j.value("d2", d.d2);
    c.d_z = j.value("d_z", d.d_z);
    c.latent_projection = j.value("latent_projection", d.latent_projection);
    c.fusion_widths = j.value("fusion_widths", d.fusion_widths);
    c.decoder_reduced = j.value("decoder_reduced", d.decoder_reduced);
    c.skip_width = j.value("skip_width", d.skip_width);
    c.head_hidden = j.value("head_hidden", d.head_hidden);
    c.n_modes = j.value("n_modes", d.n_modes);
    c.dropout = j.value("dropout", d.dropout);
    c.activation = j.value("activation", d.activation);
    c.eps = j.value("eps", d.eps);
}

}  // namespace mvgae
