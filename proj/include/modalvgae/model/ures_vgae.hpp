#pragma once

/**
 * @file ures_vgae.hpp
 * @brief Residual variational graph autoencoder for joint modal prediction.
 *
 * Data flow for one graph with N nodes:
 *
 *   X (N x F) -> spectral MLP -> H0 (N x d)
 *   H1 = H0 + sage(H0)                       residual block 1
 *   H2 = H1 P + sage(H1 P)                   projection to d2, residual block 2
 *   (h_g, w) = attention_pool(H2)
 *   (mu, logvar) = latent(h_g);  z = mu + exp(logvar / 2) * eps
 *   node branch:  [H2 | W_z repeat(z)] -> fusion MLP -> block 3 -> reduce MLP
 *                 -> block 4 -> [H4 | H1] -> skip MLP -> W_phi -> Phi (N x M)
 *   graph branch: c = [h_g | z | (h_g W_i) * z] -> f_freq, f_zeta -> NIG params
 *
 * All functions operate on tape variables so gradients come for free.
 */

#include <cmath>
#include <string>
#include <vector>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/rng.hpp"
#include "modalvgae/model/config.hpp"
#include "modalvgae/nn/autodiff.hpp"
#include "modalvgae/nn/params.hpp"

namespace mvgae::model {

using ad::Mat;
using ad::Neighbourhood;
using ad::Var;
using nn::Binding;
using nn::ParamGroup;
using nn::ParamStore;

/// Normal-Inverse-Gamma parameters for M modes, each a 1 x M row.
template <class T>
struct NigVars {
    Var<T> gamma, nu, alpha, beta;
};

template <class T>
struct ModelOutput {
    Var<T> phi;        // N x M
    NigVars<T> freq;   // log-frequency space
    NigVars<T> zeta;   // log-damping space
    Var<T> mu;         // 1 x d_z
    Var<T> logvar;     // 1 x d_z
    Var<T> h_g;        // 1 x d2
    Var<T> z;          // 1 x d_z
    Var<T> attention;  // N x 1
};

enum class LatentMode { Stochastic, Mean };

struct ForwardOptions {
    LatentMode latent = LatentMode::Mean;
    bool dropout = false;
    Rng* rng = nullptr;  // required for stochastic latent or active dropout
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

/// Row-wise MLP with GELU after every layer.
template <class T>
Var<T> mlp(Binding<T>& p, const std::string& prefix, Var<T> x, std::size_t layers) {
    for (std::size_t l = 0; l < layers; ++l) {
        const auto base = prefix + ".l" + std::to_string(l);
        x = ad::gelu(ad::linear(x, p(base + ".W"), p(base + ".b")));
    }
    return x;
}

/// H0 = f_MLP(X), applied independently to each node.
template <class T>
Var<T> spectral_encode(Binding<T>& p, Var<T> x, const ModelConfig& cfg) {
    if (x.cols() != cfg.in_features) {
        throw InvalidArgument("spectral_encode: feature width " + std::to_string(x.cols()) + " != configured " +
                              std::to_string(cfg.in_features));
    }
    return mlp(p, "spectral", x, cfg.spectral_widths.size());
}

/// sigma(mean({h_i} ∪ {h_j : j -> i}) W).
template <class T>
Var<T> sage_mean_layer(Var<T> h, const Neighbourhood& nb, Var<T> w) {
    return ad::gelu(ad::matmul(ad::mean_aggregate(h, nb), w));
}

/// H + sage_mean_layer(H).
template <class T>
Var<T> residual_sage_block(Var<T> h, const Neighbourhood& nb, Var<T> w) {
    auto update = sage_mean_layer(h, nb, w);
    if (update.cols() != h.cols()) {
        throw InvalidArgument("residual_sage_block: layer output width " + std::to_string(update.cols()) +
                              " != input width " + std::to_string(h.cols()));
    }
    return ad::add(h, update);
}

template <class T>
struct Pooled {
    Var<T> h_g;      // 1 x d
    Var<T> weights;  // N x 1
};

/// a = H q, w = softmax(a), h_g = wᵀ H.
template <class T>
Pooled<T> attention_pool(Var<T> h, Var<T> q) {
    if (h.rows() < 1) throw InvalidArgument("attention_pool: empty graph");
    auto scores = ad::matmul(h, q);
    auto w = ad::softmax_col(scores);
    return {ad::tmatmul(w, h), w};
}

template <class T>
std::pair<Var<T>, Var<T>> latent_encode(Binding<T>& p, Var<T> h_g) {
    return {ad::linear(h_g, p("latent.W_mu"), p("latent.b_mu")),
            ad::linear(h_g, p("latent.W_logvar"), p("latent.b_logvar"))};
}

/// z = mu + exp(logvar / 2) * noise, with noise a constant on the tape.
template <class T>
Var<T> reparameterize(Var<T> mu, Var<T> logvar, const Mat<T>& noise) {
    auto& t = *mu.tape;
    auto s = ad::exp(ad::scale(logvar, T(0.5)));
    return ad::add(mu, ad::mul(s, t.constant(noise)));
}

/// Node-level decoder producing Phi (N x M).
template <class T>
Var<T> node_decode(Binding<T>& p, Var<T> h1, Var<T> h2, Var<T> z, const Neighbourhood& nb, const ModelConfig& cfg,
                   Rng* dropout_rng) {
    if (h1.rows() != h2.rows()) throw InvalidArgument("node_decode: H1 and H2 row counts differ");
    auto zb = ad::repeat_rows(z, h2.rows());
    auto zp = ad::matmul(zb, p("dec.W_z"));
    auto hc = ad::concat_cols(h2, zp);
    auto hf = ad::dropout(mlp(p, "dec.fusion", hc, cfg.fusion_widths.size()), cfg.dropout, dropout_rng);
    auto h3 = residual_sage_block(hf, nb, p("dec.sage3.W"));
    auto hr = mlp(p, "dec.reduce", h3, 1);
    auto h4 = residual_sage_block(hr, nb, p("dec.sage4.W"));
    auto skip = ad::concat_cols(h4, h1);
    auto hfinal = ad::dropout(mlp(p, "dec.skip", skip, 1), cfg.dropout, dropout_rng);
    return ad::matmul(hfinal, p("dec.W_phi"));
}

/// c = [h_g | z | (h_g W_i) ⊙ z].
template <class T>
Var<T> context_vector(Var<T> h_g, Var<T> z, Var<T> w_i) {
    auto inter = ad::mul(ad::matmul(h_g, w_i), z);
    return ad::concat_cols(ad::concat_cols(h_g, z), inter);
}

/**
 * Evidential head: MLP to 4M raw outputs split as [gamma | nu~ | alpha~ | beta~],
 * then nu = softplus(nu~) + eps, alpha = softplus(alpha~) + 1 + eps,
 * beta = softplus(beta~) + eps.
 */
template <class T>
NigVars<T> evidential_head(Binding<T>& p, const std::string& prefix, Var<T> c, const ModelConfig& cfg) {
    auto h = mlp(p, prefix + ".hidden", c, cfg.head_hidden.size());
    auto raw = ad::linear(h, p(prefix + ".out.W"), p(prefix + ".out.b"));
    if (!raw.value().allFinite()) throw NumericalError("evidential_head: non-finite head output in " + prefix);
    const Eigen::Index m = cfg.n_modes;
    const T eps = static_cast<T>(cfg.eps);
    NigVars<T> out;
    out.gamma = ad::slice_cols(raw, 0, m);
    out.nu = ad::add_scalar(ad::softplus(ad::slice_cols(raw, m, m)), eps);
    out.alpha = ad::add_scalar(ad::softplus(ad::slice_cols(raw, 2 * m, m)), T(1) + eps);
    out.beta = ad::add_scalar(ad::softplus(ad::slice_cols(raw, 3 * m, m)), eps);
    return out;
}

// ---------------------------------------------------------------------------
// Parameters and full forward pass
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void add_mlp(ParamStore<T>& s, const std::string& prefix, int in, const std::vector<int>& widths, Rng& rng,
             ParamGroup g = ParamGroup::Backbone) {
    for (std::size_t l = 0; l < widths.size(); ++l) {
        const auto base = prefix + ".l" + std::to_string(l);
        s.add_weight(base + ".W", in, widths[l], rng, g);
        s.add_bias(base + ".b", widths[l], g);
        in = widths[l];
    }
}

template <class T>
void add_head(ParamStore<T>& s, const std::string& prefix, int in, const ModelConfig& cfg, Rng& rng) {
    add_mlp(s, prefix + ".hidden", in, cfg.head_hidden, rng, ParamGroup::Head);
    s.add_weight(prefix + ".out.W", cfg.head_hidden.back(), 4 * cfg.n_modes, rng, ParamGroup::Head, 0.1);
    s.add_bias(prefix + ".out.b", 4 * cfg.n_modes, ParamGroup::Head);
}

}  // namespace detail

/// Freshly initialized parameters, deterministic in `seed`.
template <class T>
ParamStore<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ParamStore<T> s;
    detail::add_mlp(s, "spectral", cfg.in_features, cfg.spectral_widths, rng);
    s.add_weight("enc.sage1.W", cfg.d, cfg.d, rng, ParamGroup::Backbone, 0.5);
    s.add_weight("enc.proj.P", cfg.d, cfg.d2, rng);
    s.add_weight("enc.sage2.W", cfg.d2, cfg.d2, rng, ParamGroup::Backbone, 0.5);
    s.add_weight("pool.q", cfg.d2, 1, rng, ParamGroup::Backbone, 0.1);
    s.add_weight("latent.W_mu", cfg.d2, cfg.d_z, rng);
    s.add_bias("latent.b_mu", cfg.d_z);
    s.add_weight("latent.W_logvar", cfg.d2, cfg.d_z, rng, ParamGroup::Backbone, 0.1);
    s.add_bias("latent.b_logvar", cfg.d_z);
    s.add_weight("dec.W_z", cfg.d_z, cfg.latent_projection, rng);
    detail::add_mlp(s, "dec.fusion", cfg.d2 + cfg.latent_projection, cfg.fusion_widths, rng);
    s.add_weight("dec.sage3.W", cfg.decoder_width(), cfg.decoder_width(), rng, ParamGroup::Backbone, 0.5);
    detail::add_mlp(s, "dec.reduce", cfg.decoder_width(), {cfg.decoder_reduced}, rng);
    s.add_weight("dec.sage4.W", cfg.decoder_reduced, cfg.decoder_reduced, rng, ParamGroup::Backbone, 0.5);
    detail::add_mlp(s, "dec.skip", cfg.decoder_reduced + cfg.d, {cfg.skip_width}, rng);
    s.add_weight("dec.W_phi", cfg.skip_width, cfg.n_modes, rng, ParamGroup::Head);
    s.add_weight("ctx.W_i", cfg.d2, cfg.d_z, rng);
    detail::add_head(s, "head_freq", cfg.context_width(), cfg, rng);
    detail::add_head(s, "head_zeta", cfg.context_width(), cfg, rng);
    return s;
}

/// Which branches a forward pass must evaluate.
struct Branches {
    bool node_decoder = true;
};

/**
 * Full forward pass. In Mean latent mode z = mu and no noise is drawn; in
 * Stochastic mode the standard-normal noise comes from opts.rng.
 */
template <class T>
ModelOutput<T> forward(Binding<T>& p, const Mat<T>& features, const Neighbourhood& nb, const ModelConfig& cfg,
                       const ForwardOptions& opts, Branches branches = {}) {
    if (features.rows() != nb.size()) throw InvalidArgument("forward: feature rows != node count");
    if (!features.allFinite()) throw InvalidArgument("forward: non-finite input features");
    if ((opts.latent == LatentMode::Stochastic || opts.dropout) && opts.rng == nullptr) {
        throw InvalidArgument("forward: stochastic options require an rng");
    }
    auto& tape = p.tape();
    Rng* drop_rng = opts.dropout ? opts.rng : nullptr;

    ModelOutput<T> out;
    auto x = tape.constant(features);
    auto h0 = ad::dropout(spectral_encode(p, x, cfg), cfg.dropout, drop_rng);
    auto h1 = residual_sage_block(h0, nb, p("enc.sage1.W"));
    auto h1p = ad::matmul(h1, p("enc.proj.P"));
    auto h2 = residual_sage_block(h1p, nb, p("enc.sage2.W"));
    auto pooled = attention_pool(h2, p("pool.q"));
    out.h_g = pooled.h_g;
    out.attention = pooled.weights;
    std::tie(out.mu, out.logvar) = latent_encode(p, out.h_g);
    if (opts.latent == LatentMode::Stochastic) {
        Mat<T> noise(1, cfg.d_z);
        for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = static_cast<T>(opts.rng->normal());
        out.z = reparameterize(out.mu, out.logvar, noise);
    } else {
        out.z = out.mu;
    }
    if (branches.node_decoder) out.phi = node_decode(p, h1, h2, out.z, nb, cfg, drop_rng);
    auto c = context_vector(out.h_g, out.z, p("ctx.W_i"));
    out.freq = evidential_head(p, "head_freq", c, cfg);
    out.zeta = evidential_head(p, "head_zeta", c, cfg);
    return out;
}

}  // namespace mvgae::model
