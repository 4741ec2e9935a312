#pragma once

/**
 * @file optim.hpp
 * @brief AdamW with per-group learning rates, global-norm clipping, cosine
 *        annealing with warm restarts, and linear warm-up multipliers.
 */

#include <cmath>
#include <numbers>
#include <vector>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/nn/params.hpp"

namespace mvgae::train {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

/// First/second moment buffers aligned with a ParamStore.
template <class T>
struct AdamWState {
    std::vector<nn::Mat<T>> m, v;
    long step = 0;

    AdamWState() = default;
    explicit AdamWState(const nn::ParamStore<T>& store) {
        for (const auto& e : store.entries()) {
            m.push_back(nn::Mat<T>::Zero(e.value.rows(), e.value.cols()));
            v.push_back(nn::Mat<T>::Zero(e.value.rows(), e.value.cols()));
        }
    }
};

/**
 * One bias-corrected AdamW update with decoupled weight decay:
 *   p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)
 */
template <class T>
void adamw_step(nn::ParamStore<T>& store, const nn::Gradients<T>& grads, AdamWState<T>& st, double lr_backbone,
                double lr_head, const AdamWConfig& cfg) {
    if (grads.values.size() != store.count() || st.m.size() != store.count()) {
        throw InvalidArgument("adamw_step: gradient/state layout does not match the parameter store");
    }
    if (!grads.all_finite()) throw NumericalError("adamw_step: non-finite gradient");
    ++st.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    for (std::size_t i = 0; i < store.count(); ++i) {
        auto& e = store.entries()[i];
        const auto& g = grads.values[i];
        if (g.rows() != e.value.rows() || g.cols() != e.value.cols()) {
            throw InvalidArgument("adamw_step: gradient shape mismatch for '" + e.name + "'");
        }
        const T lr = static_cast<T>(e.group == nn::ParamGroup::Head ? lr_head : lr_backbone);
        st.m[i] = b1 * st.m[i] + (T(1) - b1) * g;
        st.v[i] = b2 * st.v[i] + (T(1) - b2) * g.cwiseProduct(g);
        const auto m_hat = st.m[i].array() / static_cast<T>(bc1);
        const auto v_hat = st.v[i].array() / static_cast<T>(bc2);
        e.value.array() -= lr * (m_hat / (v_hat.sqrt() + static_cast<T>(cfg.eps)) +
                                 static_cast<T>(cfg.weight_decay) * e.value.array());
    }
}

/// Rescales grads so their global L2 norm is at most max_norm; returns the norm before clipping.
template <class T>
double clip_gradients(nn::Gradients<T>& grads, double max_norm) {
    if (!(max_norm > 0.0)) throw InvalidArgument("clip_gradients: max_norm must be positive");
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > max_norm) {
        const T s = static_cast<T>(max_norm / norm);
        for (auto& v : grads.values) v *= s;
    }
    return norm;
}

struct CosineSchedule {
    double lr_max = 1e-3;
    double lr_min = 1e-5;
    double t0 = 10.0;  // first window length (epochs)
    double t_mult = 2.0;

    void validate() const {
        require(lr_max > 0.0 && lr_min >= 0.0 && lr_min <= lr_max, "CosineSchedule: need 0 <= lr_min <= lr_max, lr_max > 0");
        require(t0 > 0.0 && t_mult >= 1.0, "CosineSchedule: need t0 > 0 and t_mult >= 1");
    }
};

/// Learning rate at (fractional) time t measured from the schedule start.
inline double cosine_warm_restart_lr(double t, const CosineSchedule& s) {
    s.validate();
    if (t < 0.0) throw InvalidArgument("cosine_warm_restart_lr: negative time");
    double window = s.t0;
    double start = 0.0;
    // Small tolerance so t landing exactly on a restart boundary counts as the restart.
    while (t >= start + window - 1e-12 * window) {
        start += window;
        window *= s.t_mult;
    }
    const double frac = std::max(0.0, (t - start) / window);
    return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

/// 0 before start, linear ramp over length epochs, 1 afterwards; length 0 is a step at start.
inline double warmup_multiplier(double epoch, double start, double length) {
    if (length < 0.0) throw InvalidArgument("warmup_multiplier: length must be >= 0");
    if (epoch < start) return 0.0;
    if (length == 0.0) return 1.0;
    return std::min(1.0, (epoch - start) / length);
}

}  // namespace mvgae::train
