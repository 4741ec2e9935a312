#pragma once

/**
 * @file sampling.hpp
 * @brief Point predictions plus MC-dropout and SWAG predictive variances.
 *
 * Quantities are indexed as rows: 0 = log frequency, 1 = log damping ratio.
 */

#include <cstdint>

#include <Eigen/Core>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/rng.hpp"
#include "modalvgae/model/ures_vgae.hpp"
#include "modalvgae/uq/nig.hpp"
#include "modalvgae/uq/swag.hpp"

namespace mvgae::uq {

/// Evidential outputs of one graph in double precision.
struct GraphPrediction {
    Eigen::MatrixXd gamma, nu, alpha, beta;  // 2 x M
    Eigen::MatrixXd phi;                     // N x M
    Eigen::VectorXd attention;               // N

    Nig nig(int quantity, int mode) const {
        return Nig{gamma(quantity, mode), nu(quantity, mode), alpha(quantity, mode), beta(quantity, mode)};
    }
};

template <class T>
GraphPrediction predict(const nn::ParamStore<T>& params, const ad::Mat<T>& features, const ad::Neighbourhood& nb,
                        const ModelConfig& cfg, const model::ForwardOptions& opts = {}) {
    ad::Tape<T> tape;
    nn::Binding<T> b(tape, params);
    const auto out = model::forward(b, features, nb, cfg, opts);
    GraphPrediction p;
    const auto m = cfg.n_modes;
    p.gamma.resize(2, m);
    p.nu.resize(2, m);
    p.alpha.resize(2, m);
    p.beta.resize(2, m);
    const model::NigVars<T>* heads[2] = {&out.freq, &out.zeta};
    for (int q = 0; q < 2; ++q) {
        p.gamma.row(q) = heads[q]->gamma.value().template cast<double>();
        p.nu.row(q) = heads[q]->nu.value().template cast<double>();
        p.alpha.row(q) = heads[q]->alpha.value().template cast<double>();
        p.beta.row(q) = heads[q]->beta.value().template cast<double>();
    }
    p.phi = out.phi.value().template cast<double>();
    p.attention = out.attention.value().col(0).template cast<double>();
    return p;
}

/// Empirical mean and (population) variance of predictive means over passes.
struct SampledMoments {
    Eigen::MatrixXd mean;  // 2 x M
    Eigen::MatrixXd var;   // 2 x M
    int passes = 0;
};

namespace detail {
struct MomentAccumulator {
    Eigen::MatrixXd sum, sq;
    int n = 0;
    void add(const Eigen::MatrixXd& x) {
        if (n == 0) {
            sum = Eigen::MatrixXd::Zero(x.rows(), x.cols());
            sq = sum;
        }
        sum += x;
        sq += x.cwiseProduct(x);
        ++n;
    }
    SampledMoments finish() const {
        SampledMoments m;
        m.passes = n;
        m.mean = sum / n;
        m.var = (sq / n - m.mean.cwiseProduct(m.mean)).cwiseMax(0.0);
        if (n == 1) m.var.setZero();
        return m;
    }
};
}  // namespace detail

/// T forward passes with dropout active (mean latent); pass t uses its own seed.
template <class T>
SampledMoments mc_dropout_predict(const nn::ParamStore<T>& params, const ad::Mat<T>& features,
                                  const ad::Neighbourhood& nb, const ModelConfig& cfg, int passes, std::uint64_t seed) {
    if (passes < 1) throw InvalidArgument("mc_dropout_predict: T must be >= 1");
    detail::MomentAccumulator acc;
    for (int t = 0; t < passes; ++t) {
        Rng rng(seed, static_cast<std::uint64_t>(t), Stream::Dropout);
        model::ForwardOptions opts;
        opts.dropout = true;
        opts.rng = &rng;
        acc.add(predict(params, features, nb, cfg, opts).gamma);
    }
    return acc.finish();
}

/// S forward passes with weights drawn from the diagonal SWAG posterior.
template <class T>
SampledMoments swag_predict(const SwagPosterior& post, const nn::ParamStore<T>& layout, const ad::Mat<T>& features,
                            const ad::Neighbourhood& nb, const ModelConfig& cfg, int samples, std::uint64_t seed,
                            double variance_scale = 1.0) {
    if (samples < 1) throw InvalidArgument("swag_predict: S must be >= 1");
    post.validate();
    if (post.mean.size() != layout.size()) throw InvalidArgument("swag_predict: posterior size != parameter count");
    nn::ParamStore<T> work = layout;
    detail::MomentAccumulator acc;
    for (int s = 0; s < samples; ++s) {
        Rng rng(seed, static_cast<std::uint64_t>(s), Stream::Swag);
        work.unflatten(post.sample(rng, variance_scale));
        acc.add(predict(work, features, nb, cfg).gamma);
    }
    return acc.finish();
}

}  // namespace mvgae::uq
