#pragma once

/**
 * @file nig.hpp
 * @brief Closed-form predictive distribution of a Normal-Inverse-Gamma output.
 */

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include <boost/math/distributions/students_t.hpp>

#include "modalvgae/core/errors.hpp"

namespace mvgae::uq {

/// Evidential output for one quantity and one mode.
struct Nig {
    double gamma = 0.0;
    double nu = 1.0;
    double alpha = 2.0;
    double beta = 1.0;
};

struct PredictiveSummary {
    double mean = 0.0;
    double sigma2_alea = 0.0;
    double sigma2_epis = 0.0;
    double sigma2_total = 0.0;
    double dof = 0.0;         // 2 alpha
    double t_scale_sq = 0.0;  // squared scale of the Student-t marginal
};

inline void check_constraints(const Nig& p, const char* where) {
    if (!std::isfinite(p.gamma) || !(p.nu > 0.0) || !(p.alpha > 1.0) || !(p.beta > 0.0) || !std::isfinite(p.nu) ||
        !std::isfinite(p.alpha) || !std::isfinite(p.beta)) {
        throw InvalidArgument(std::string(where) + ": require finite gamma, nu > 0, alpha > 1, beta > 0");
    }
}

inline PredictiveSummary predictive_moments(const Nig& p) {
    check_constraints(p, "predictive_moments");
    PredictiveSummary s;
    s.mean = p.gamma;
    s.sigma2_alea = p.beta / (p.alpha - 1.0);
    s.sigma2_epis = s.sigma2_alea / p.nu;
    s.sigma2_total = s.sigma2_alea + s.sigma2_epis;
    s.dof = 2.0 * p.alpha;
    s.t_scale_sq = p.beta * (1.0 + p.nu) / (p.nu * p.alpha);
    return s;
}

/**
 * Log-density of the NIG marginal St(y; gamma, beta(1+nu)/(nu alpha), 2 alpha).
 * Only alpha > 0 is needed for the density itself.
 */
inline double student_t_logpdf(double y, const Nig& p) {
    if (!(p.nu > 0.0) || !(p.alpha > 0.0) || !(p.beta > 0.0)) {
        throw InvalidArgument("student_t_logpdf: require nu > 0, alpha > 0, beta > 0");
    }
    const double omega = 2.0 * p.beta * (1.0 + p.nu);
    const double r = y - p.gamma;
    return std::lgamma(p.alpha + 0.5) - std::lgamma(p.alpha) - 0.5 * std::log(std::numbers::pi * omega / p.nu) -
           (p.alpha + 0.5) * std::log1p(r * r * p.nu / omega);
}

/// Central interval of the Student-t predictive at the given level.
inline std::pair<double, double> confidence_interval(const Nig& p, double level) {
    check_constraints(p, "confidence_interval");
    if (!(level > 0.0) || !(level < 1.0)) throw InvalidArgument("confidence_interval: level must be in (0, 1)");
    const boost::math::students_t dist(2.0 * p.alpha);
    const double q = boost::math::quantile(dist, 0.5 + 0.5 * level);
    const double half = q * std::sqrt(p.beta * (1.0 + p.nu) / (p.nu * p.alpha));
    return {p.gamma - half, p.gamma + half};
}

/**
 * Central Student-t interval for a summary whose variance may have been
 * widened by sampling-based terms. The scale is chosen so the Student-t
 * variance matches sigma2_total.
 */
inline std::pair<double, double> confidence_interval(const PredictiveSummary& s, double level) {
    if (!(level > 0.0) || !(level < 1.0)) throw InvalidArgument("confidence_interval: level must be in (0, 1)");
    if (!(s.dof > 2.0) || !(s.sigma2_total >= 0.0)) throw InvalidArgument("confidence_interval: invalid summary");
    const boost::math::students_t dist(s.dof);
    const double q = boost::math::quantile(dist, 0.5 + 0.5 * level);
    const double scale = std::sqrt(s.sigma2_total * (s.dof - 2.0) / s.dof);
    return {s.mean - q * scale, s.mean + q * scale};
}

/// Adds sampling-based variances to the epistemic component; the mean is kept.
inline PredictiveSummary combine_uncertainty(const PredictiveSummary& evidential, double var_mc, double var_swag) {
    if (!(var_mc >= 0.0) || !(var_swag >= 0.0)) throw InvalidArgument("combine_uncertainty: variances must be >= 0");
    PredictiveSummary s = evidential;
    s.sigma2_epis += var_mc + var_swag;
    s.sigma2_total = s.sigma2_alea + s.sigma2_epis;
    if (var_mc + var_swag > 0.0) s.t_scale_sq = s.sigma2_total * (s.dof - 2.0) / s.dof;
    return s;
}

}  // namespace mvgae::uq
