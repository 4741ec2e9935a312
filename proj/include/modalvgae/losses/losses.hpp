#pragma once

/**
 * @file losses.hpp
 * @brief Training objectives: evidential NLL and regularizer, Gaussian CRPS,
 *        MAC, Gram orthogonality, latent KL, and their weighted composite.
 *
 * Each term exists twice: a plain function on values (used by evaluation and
 * tests) and a fused tape op with a hand-derived gradient.
 */

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <Eigen/Core>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/model/baseline.hpp"
#include "modalvgae/model/ures_vgae.hpp"
#include "modalvgae/nn/autodiff.hpp"

namespace mvgae::loss {

using ad::Mat;
using ad::Tape;
using ad::Var;

// ---------------------------------------------------------------------------
// Scalar definitions
// ---------------------------------------------------------------------------

inline void check_nig(double nu, double alpha, double beta, const char* where) {
    if (!(nu > 0.0) || !(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(nu) || !std::isfinite(alpha) ||
        !std::isfinite(beta)) {
        throw InvalidArgument(std::string(where) + ": NIG parameters must satisfy nu > 0, alpha > 0, beta > 0");
    }
}

/// Negative log marginal likelihood of y under NIG(gamma, nu, alpha, beta).
inline double nig_nll(double y, double gamma, double nu, double alpha, double beta) {
    check_nig(nu, alpha, beta, "nig_nll");
    const double omega = 2.0 * beta * (1.0 + nu);
    const double r = y - gamma;
    return 0.5 * std::log(std::numbers::pi / nu) - alpha * std::log(omega) +
           (alpha + 0.5) * std::log(r * r * nu + omega) + std::lgamma(alpha) - std::lgamma(alpha + 0.5);
}

/// |y - gamma| (2 nu + alpha).
inline double evidential_regularizer(double y, double gamma, double nu, double alpha) {
    return std::abs(y - gamma) * (2.0 * nu + alpha);
}

inline double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Closed-form CRPS of N(mu, sigma^2) at y.
inline double crps_gaussian(double y, double mu, double sigma) {
    if (!(sigma > 0.0)) throw InvalidArgument("crps_gaussian: sigma must be positive");
    const double z = (y - mu) / sigma;
    return sigma * (z * (2.0 * std_normal_cdf(z) - 1.0) + 2.0 * std_normal_pdf(z) - 1.0 / std::sqrt(std::numbers::pi));
}

/// Modal assurance criterion |aᵀb|² / ((aᵀa)(bᵀb)).
inline double mac(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
    require(a.size() == b.size(), "mac: length mismatch");
    const double aa = a.squaredNorm(), bb = b.squaredNorm();
    if (!(aa > 0.0) || !(bb > 0.0)) throw InvalidArgument("mac: zero-norm mode shape");
    const double ab = a.dot(b);
    return std::clamp(ab * ab / (aa * bb), 0.0, 1.0);
}

/// Weighted mean over modes of 1 - MAC; weights are renormalized.
inline double mac_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, const std::vector<double>& weights) {
    require(pred.rows() == truth.rows() && pred.cols() == truth.cols(), "mac_loss: shape mismatch");
    require(weights.size() == static_cast<std::size_t>(pred.cols()), "mac_loss: one weight per mode required");
    double num = 0.0, den = 0.0;
    for (Eigen::Index m = 0; m < pred.cols(); ++m) {
        num += weights[static_cast<std::size_t>(m)] * (1.0 - mac(pred.col(m), truth.col(m)));
        den += weights[static_cast<std::size_t>(m)];
    }
    require(den > 0.0, "mac_loss: weights sum to zero");
    return num / den;
}

/// Element-wise l1 norm of ΦᵀΦ - I.
inline double ortho_loss(const Eigen::MatrixXd& phi) {
    const Eigen::MatrixXd g = phi.transpose() * phi - Eigen::MatrixXd::Identity(phi.cols(), phi.cols());
    return g.cwiseAbs().sum();
}

/// KL(N(mu, exp(logvar)) || N(0, I)) summed over latent dimensions.
inline double kl_loss(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar) {
    require(mu.size() == logvar.size(), "kl_loss: size mismatch");
    return -0.5 * (1.0 + logvar.array() - mu.array().square() - logvar.array().exp()).sum();
}

// ---------------------------------------------------------------------------
// Tape ops (each returns a 1 x 1 scalar)
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
T sign(T x) {
    return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0));
}

template <class T>
void check_rows(const model::NigVars<T>& p, const Mat<T>& y, const char* op) {
    const auto m = p.gamma.cols();
    if (y.rows() != 1 || y.cols() != m || p.nu.cols() != m || p.alpha.cols() != m || p.beta.cols() != m) {
        throw InvalidArgument(std::string(op) + ": target and NIG rows must all be 1 x M");
    }
}

/// Pushes a scalar node whose gradient w.r.t. each NIG row is precomputed.
template <class T>
Var<T> push_nig_scalar(const model::NigVars<T>& p, T value, Mat<T> dg, Mat<T> dn, Mat<T> da, Mat<T> db) {
    auto& t = *p.gamma.tape;
    const int ig = p.gamma.id, in = p.nu.id, ia = p.alpha.id, ib = p.beta.id;
    const bool ng = t.needs_grad(ig) || t.needs_grad(in) || t.needs_grad(ia) || t.needs_grad(ib);
    return t.push(Mat<T>::Constant(1, 1, value),
                  [=, dg = std::move(dg), dn = std::move(dn), da = std::move(da), db = std::move(db)](Tape<T>& tp, int self) {
                      const T g = tp.grad(self)(0, 0);
                      tp.accumulate(ig, g * dg);
                      tp.accumulate(in, g * dn);
                      tp.accumulate(ia, g * da);
                      tp.accumulate(ib, g * db);
                  },
                  ng);
}

}  // namespace detail

/// Mean over modes of the evidential NLL.
template <class T>
Var<T> nig_nll_op(const Mat<T>& y, const model::NigVars<T>& p) {
    detail::check_rows(p, y, "nig_nll_op");
    const auto m = y.cols();
    Mat<T> dg(1, m), dn(1, m), da(1, m), db(1, m);
    T total = 0;
    const T inv_m = T(1) / static_cast<T>(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const T gam = p.gamma.value()(0, k), nu = p.nu.value()(0, k), al = p.alpha.value()(0, k),
                be = p.beta.value()(0, k);
        const T r = y(0, k) - gam;
        const T omega = T(2) * be * (T(1) + nu);
        const T d = r * r * nu + omega;
        total += T(0.5) * std::log(std::numbers::pi_v<T> / nu) - al * std::log(omega) + (al + T(0.5)) * std::log(d) +
                 std::lgamma(al) - std::lgamma(al + T(0.5));
        dg(0, k) = inv_m * (al + T(0.5)) * (T(-2) * r * nu) / d;
        dn(0, k) = inv_m * (T(-0.5) / nu - al * T(2) * be / omega + (al + T(0.5)) * (r * r + T(2) * be) / d);
        da(0, k) = inv_m * (std::log(d) - std::log(omega) + boost::math::digamma(al) - boost::math::digamma(al + T(0.5)));
        db(0, k) = inv_m * (-al / be + (al + T(0.5)) * T(2) * (T(1) + nu) / d);
    }
    return detail::push_nig_scalar(p, total * inv_m, std::move(dg), std::move(dn), std::move(da), std::move(db));
}

/// Mean over modes of |y - gamma| (2 nu + alpha).
template <class T>
Var<T> evidential_reg_op(const Mat<T>& y, const model::NigVars<T>& p) {
    detail::check_rows(p, y, "evidential_reg_op");
    const auto m = y.cols();
    Mat<T> dg(1, m), dn(1, m), da(1, m), db = Mat<T>::Zero(1, m);
    T total = 0;
    const T inv_m = T(1) / static_cast<T>(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const T r = y(0, k) - p.gamma.value()(0, k);
        const T nu = p.nu.value()(0, k), al = p.alpha.value()(0, k);
        total += std::abs(r) * (T(2) * nu + al);
        dg(0, k) = -inv_m * detail::sign(r) * (T(2) * nu + al);
        dn(0, k) = inv_m * T(2) * std::abs(r);
        da(0, k) = inv_m * std::abs(r);
    }
    return detail::push_nig_scalar(p, total * inv_m, std::move(dg), std::move(dn), std::move(da), std::move(db));
}

/**
 * Mean over modes of the Gaussian CRPS with mean gamma and the total
 * evidential standard deviation sqrt(beta (1 + 1/nu) / (alpha - 1)).
 */
template <class T>
Var<T> crps_op(const Mat<T>& y, const model::NigVars<T>& p) {
    detail::check_rows(p, y, "crps_op");
    const auto m = y.cols();
    Mat<T> dg(1, m), dn(1, m), da(1, m), db(1, m);
    T total = 0;
    const T inv_m = T(1) / static_cast<T>(m);
    const T inv_sqrt_pi = T(1) / std::sqrt(std::numbers::pi_v<T>);
    for (Eigen::Index k = 0; k < m; ++k) {
        const T nu = p.nu.value()(0, k), al = p.alpha.value()(0, k), be = p.beta.value()(0, k);
        if (!(al > T(1))) throw InvalidArgument("crps_op: alpha must exceed 1");
        const T sigma = std::sqrt(be * (T(1) + T(1) / nu) / (al - T(1)));
        const T z = (y(0, k) - p.gamma.value()(0, k)) / sigma;
        const T cdf = T(0.5) * std::erfc(-z / std::numbers::sqrt2_v<T>);
        const T pdf = std::exp(T(-0.5) * z * z) / std::sqrt(T(2) * std::numbers::pi_v<T>);
        total += sigma * (z * (T(2) * cdf - T(1)) + T(2) * pdf - inv_sqrt_pi);
        const T d_sigma = T(2) * pdf - inv_sqrt_pi;
        dg(0, k) = -inv_m * (T(2) * cdf - T(1));
        db(0, k) = inv_m * d_sigma * sigma / (T(2) * be);
        dn(0, k) = inv_m * d_sigma * T(0.5) * sigma * (T(1) / (nu + T(1)) - T(1) / nu);
        da(0, k) = -inv_m * d_sigma * sigma / (T(2) * (al - T(1)));
    }
    return detail::push_nig_scalar(p, total * inv_m, std::move(dg), std::move(dn), std::move(da), std::move(db));
}

/// Weighted mean over modes of 1 - MAC(pred_m, truth_m).
template <class T>
Var<T> mac_loss_op(Var<T> pred, const Mat<T>& truth, const std::vector<double>& weights) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) throw InvalidArgument("mac_loss_op: shape mismatch");
    if (weights.size() != static_cast<std::size_t>(pred.cols())) throw InvalidArgument("mac_loss_op: weight count");
    T wsum = 0;
    for (double w : weights) wsum += static_cast<T>(w);
    if (!(wsum > T(0))) throw InvalidArgument("mac_loss_op: weights sum to zero");
    const auto& a = pred.value();
    Mat<T> grad(a.rows(), a.cols());
    T total = 0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
        const T w = static_cast<T>(weights[static_cast<std::size_t>(k)]) / wsum;
        const T aa = a.col(k).squaredNorm(), bb = truth.col(k).squaredNorm(), ab = a.col(k).dot(truth.col(k));
        if (!(aa > T(0)) || !(bb > T(0))) throw NumericalError("mac_loss_op: zero-norm mode shape column");
        const T macv = ab * ab / (aa * bb);
        total += w * (T(1) - macv);
        grad.col(k) = -w * (T(2) * ab / (aa * bb) * truth.col(k) - T(2) * ab * ab / (aa * aa * bb) * a.col(k));
    }
    auto& t = *pred.tape;
    const int ip = pred.id;
    return t.push(Mat<T>::Constant(1, 1, total), [ip, grad = std::move(grad)](Tape<T>& tp, int self) {
        tp.accumulate(ip, tp.grad(self)(0, 0) * grad);
    }, t.needs_grad(ip));
}

/// Σ |ΦᵀΦ - I| element-wise.
template <class T>
Var<T> ortho_loss_op(Var<T> phi) {
    const auto& a = phi.value();
    const Mat<T> g = a.transpose() * a - Mat<T>::Identity(a.cols(), a.cols());
    const Mat<T> s = g.unaryExpr([](T x) { return detail::sign(x); });
    Mat<T> grad = a * (s + s.transpose());
    auto& t = *phi.tape;
    const int ip = phi.id;
    return t.push(Mat<T>::Constant(1, 1, g.cwiseAbs().sum()), [ip, grad = std::move(grad)](Tape<T>& tp, int self) {
        tp.accumulate(ip, tp.grad(self)(0, 0) * grad);
    }, t.needs_grad(ip));
}

/// -½ Σ (1 + logvar - mu² - exp(logvar)).
template <class T>
Var<T> kl_op(Var<T> mu, Var<T> logvar) {
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) throw InvalidArgument("kl_op: shape mismatch");
    const auto& m = mu.value();
    const auto& lv = logvar.value();
    const T value = T(-0.5) * (T(1) + lv.array() - m.array().square() - lv.array().exp()).sum();
    auto& t = *mu.tape;
    const int im = mu.id, il = logvar.id;
    return t.push(Mat<T>::Constant(1, 1, value), [im, il](Tape<T>& tp, int self) {
        const T g = tp.grad(self)(0, 0);
        tp.accumulate(im, g * tp.value(im));
        tp.accumulate(il, T(-0.5) * g * (T(1) - tp.value(il).array().exp()).matrix());
    }, t.needs_grad(im) || t.needs_grad(il));
}

// ---------------------------------------------------------------------------
// Composite objective
// ---------------------------------------------------------------------------

struct LossWeights {
    double lambda_f = 1.0;
    double lambda_zeta = 1.0;
    double lambda_crps = 0.1;
    double lambda_phi = 1.0;
    double lambda_ortho = 0.01;
    double kl = 1e-3;
    double lambda_evi = 0.01;
    std::vector<double> mode_weights{1.0, 1.0, 2.0, 2.0};

    void validate(int n_modes) const {
        require(lambda_f >= 0 && lambda_zeta >= 0 && lambda_crps >= 0 && lambda_phi >= 0 && lambda_ortho >= 0 &&
                    kl >= 0 && lambda_evi >= 0,
                "LossWeights: all weights must be >= 0");
        require(mode_weights.size() == static_cast<std::size_t>(n_modes), "LossWeights: one mode weight per mode");
        for (double w : mode_weights) require(w >= 0.0, "LossWeights: mode weights must be >= 0");
    }
};

/// Effective per-term weights after phase gating and warm-up.
struct TermWeights {
    double f = 0, zeta = 0, evi = 0, crps = 0, phi = 0, ortho = 0, kl = 0;
    std::vector<double> mode_weights;
};

struct LossBreakdown {
    double nll_f = 0, reg_f = 0, nll_zeta = 0, reg_zeta = 0, crps = 0, mac = 0, ortho = 0, kl = 0;
    double total = 0;
};

template <class T>
struct Targets {
    Mat<T> log_freq;  // 1 x M
    Mat<T> log_zeta;  // 1 x M
    Mat<T> phi;       // N x M
};

template <class T>
struct LossResult {
    Var<T> total;
    LossBreakdown parts;
};

/**
 * total = f (NLL_f + evi reg_f) + zeta (NLL_zeta + evi reg_zeta) + crps CRPS
 *       + phi L_MAC + ortho L_ortho + kl L_KL.
 *
 * Terms with zero weight are evaluated for the breakdown but kept off the
 * gradient path. Mode-shape terms need out.phi; they are skipped if absent.
 */
template <class T>
LossResult<T> total_loss(const model::ModelOutput<T>& out, const Targets<T>& tgt, const TermWeights& w) {
    std::vector<Var<T>> terms;
    std::vector<T> coeffs;
    LossBreakdown b;
    auto take = [&](Var<T> v, double coeff, double& slot, const char* name) {
        slot = static_cast<double>(v.scalar());
        if (!std::isfinite(slot)) throw NumericalError(std::string("total_loss: non-finite term ") + name);
        if (coeff != 0.0) {
            terms.push_back(v);
            coeffs.push_back(static_cast<T>(coeff));
        }
        b.total += coeff * slot;
    };
    take(nig_nll_op(tgt.log_freq, out.freq), w.f, b.nll_f, "nll_f");
    take(evidential_reg_op(tgt.log_freq, out.freq), w.f * w.evi, b.reg_f, "reg_f");
    take(nig_nll_op(tgt.log_zeta, out.zeta), w.zeta, b.nll_zeta, "nll_zeta");
    take(evidential_reg_op(tgt.log_zeta, out.zeta), w.zeta * w.evi, b.reg_zeta, "reg_zeta");
    {
        auto cf = crps_op(tgt.log_freq, out.freq);
        auto cz = crps_op(tgt.log_zeta, out.zeta);
        auto c = ad::weighted_sum<T>({cf, cz}, {T(0.5), T(0.5)});
        take(c, w.crps, b.crps, "crps");
    }
    if (out.phi.valid()) {
        take(mac_loss_op(out.phi, tgt.phi, w.mode_weights), w.phi, b.mac, "mac");
        take(ortho_loss_op(out.phi), w.ortho, b.ortho, "ortho");
    }
    take(kl_op(out.mu, out.logvar), w.kl, b.kl, "kl");

    LossResult<T> r;
    r.parts = b;
    if (terms.empty()) {
        r.total = out.mu.tape->constant(Mat<T>::Zero(1, 1));
    } else {
        r.total = ad::weighted_sum(terms, coeffs);
    }
    return r;
}

/// Baseline objective: squared error on log targets plus mode-shape MAC loss.
template <class T>
Var<T> baseline_loss(const model::BaselineOutput<T>& out, const Targets<T>& tgt, const std::vector<double>& mode_weights,
                     double lambda_phi) {
    auto& t = *out.log_freq.tape;
    auto ef = ad::sub(out.log_freq, t.constant(tgt.log_freq));
    auto ez = ad::sub(out.log_zeta, t.constant(tgt.log_zeta));
    const T inv_m = T(1) / static_cast<T>(tgt.log_freq.cols());
    auto mse = ad::scale(ad::add(ad::sum(ad::mul(ef, ef)), ad::sum(ad::mul(ez, ez))), inv_m);
    if (lambda_phi == 0.0) return mse;
    return ad::weighted_sum<T>({mse, mac_loss_op(out.phi, tgt.phi, mode_weights)}, {T(1), static_cast<T>(lambda_phi)});
}

}  // namespace mvgae::loss
