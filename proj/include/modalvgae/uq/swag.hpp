#pragma once

/**
 * @file swag.hpp
 * @brief Diagonal SWAG: Gaussian fit to flattened parameter snapshots.
 */

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/rng.hpp"

namespace mvgae::uq {

struct SwagPosterior {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;  // unbiased, 1/(K-1)
    int k = 0;

    void validate() const {
        require(k >= 2, "SwagPosterior: at least two snapshots required");
        require(mean.size() == var.size(), "SwagPosterior: mean/variance size mismatch");
        require((var.array() >= 0.0).all() && var.allFinite() && mean.allFinite(), "SwagPosterior: invalid moments");
    }

    /// theta ~ N(mean, scale * diag(var)).
    Eigen::VectorXd sample(Rng& rng, double variance_scale = 1.0) const {
        Eigen::VectorXd out(mean.size());
        for (Eigen::Index i = 0; i < mean.size(); ++i) {
            out[i] = mean[i] + std::sqrt(variance_scale * var[i]) * rng.normal();
        }
        return out;
    }
};

/// Welford accumulation of snapshots, so buffers stay O(P) regardless of K.
class SwagAccumulator {
public:
    void add(const Eigen::VectorXd& theta) {
        if (k_ == 0) {
            mean_ = Eigen::VectorXd::Zero(theta.size());
            m2_ = Eigen::VectorXd::Zero(theta.size());
        } else if (theta.size() != mean_.size()) {
            throw InvalidArgument("SwagAccumulator: snapshot size mismatch");
        }
        ++k_;
        const Eigen::VectorXd delta = theta - mean_;
        mean_ += delta / static_cast<double>(k_);
        m2_ += delta.cwiseProduct(theta - mean_);
    }

    int count() const { return k_; }

    SwagPosterior finalize() const {
        if (k_ < 2) throw InvalidArgument("swag: at least two snapshots required (got " + std::to_string(k_) + ")");
        SwagPosterior p;
        p.mean = mean_;
        p.var = (m2_ / static_cast<double>(k_ - 1)).cwiseMax(0.0);
        p.k = k_;
        return p;
    }

private:
    Eigen::VectorXd mean_, m2_;
    int k_ = 0;
};

inline SwagPosterior swag_collect(const std::vector<Eigen::VectorXd>& snapshots) {
    if (snapshots.size() < 2) throw InvalidArgument("swag_collect: at least two snapshots required");
    SwagAccumulator acc;
    for (const auto& s : snapshots) acc.add(s);
    return acc.finalize();
}

}  // namespace mvgae::uq
