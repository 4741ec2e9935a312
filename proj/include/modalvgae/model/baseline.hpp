#pragma once

/**
 * @file baseline.hpp
 * @brief Deterministic comparison GNN: spectral encoder, two plain
 *        mean-aggregation layers, attention pooling, point-estimate heads.
 */

#include <string>

#include "modalvgae/model/ures_vgae.hpp"

namespace mvgae::model {

template <class T>
struct BaselineOutput {
    Var<T> log_freq;  // 1 x M
    Var<T> log_zeta;  // 1 x M
    Var<T> phi;       // N x M
};

template <class T>
ParamStore<T> init_baseline_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ParamStore<T> s;
    detail::add_mlp(s, "spectral", cfg.in_features, cfg.spectral_widths, rng);
    s.add_weight("base.sage1.W", cfg.spectral_out(), cfg.d, rng);
    s.add_weight("base.sage2.W", cfg.d, cfg.d, rng);
    s.add_weight("base.pool.q", cfg.d, 1, rng, ParamGroup::Backbone, 0.1);
    detail::add_mlp(s, "base.head.hidden", cfg.d, cfg.head_hidden, rng, ParamGroup::Head);
    s.add_weight("base.head.out.W", cfg.head_hidden.back(), 2 * cfg.n_modes, rng, ParamGroup::Head, 0.1);
    s.add_bias("base.head.out.b", 2 * cfg.n_modes, ParamGroup::Head);
    s.add_weight("base.node.W", cfg.d, cfg.n_modes, rng, ParamGroup::Head);
    s.add_bias("base.node.b", cfg.n_modes, ParamGroup::Head);
    return s;
}

/// Deterministic forward pass (no dropout, no latent sampling).
template <class T>
BaselineOutput<T> baseline_forward(Binding<T>& p, const Mat<T>& features, const Neighbourhood& nb,
                                   const ModelConfig& cfg) {
    if (features.rows() != nb.size()) throw InvalidArgument("baseline_forward: feature rows != node count");
    if (!features.allFinite()) throw InvalidArgument("baseline_forward: non-finite input features");
    auto& tape = p.tape();
    auto x = tape.constant(features);
    auto h0 = spectral_encode(p, x, cfg);
    auto h1 = sage_mean_layer(h0, nb, p("base.sage1.W"));
    auto h2 = sage_mean_layer(h1, nb, p("base.sage2.W"));
    auto pooled = attention_pool(h2, p("base.pool.q"));
    auto hidden = mlp(p, "base.head.hidden", pooled.h_g, cfg.head_hidden.size());
    auto raw = ad::linear(hidden, p("base.head.out.W"), p("base.head.out.b"));
    BaselineOutput<T> out;
    out.log_freq = ad::slice_cols(raw, 0, cfg.n_modes);
    out.log_zeta = ad::slice_cols(raw, cfg.n_modes, cfg.n_modes);
    out.phi = ad::linear(h2, p("base.node.W"), p("base.node.b"));
    return out;
}

}  // namespace mvgae::model
