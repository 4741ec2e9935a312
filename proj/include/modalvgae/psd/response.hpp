#pragma once

/**
 * @file response.hpp
 * @brief Random-vibration response of a truss by modal superposition.
 *
 * Every free DOF is driven by independent zero-order-hold white noise. Each
 * modal coordinate is advanced with the exact discrete transition of its
 * damped oscillator, so the integration is unconditionally stable.
 */

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/rng.hpp"
#include "modalvgae/psd/welch.hpp"
#include "modalvgae/truss/truss.hpp"

namespace mvgae {

struct ExcitationSpec {
    double force_std = 1000.0;  // N, per free DOF
    double fs = 512.0;          // Hz
    double duration = 130.0;    // s
    std::uint64_t seed = 0;
    /// Responses are reported in millimetres.
    double output_scale = 1e3;

    Eigen::Index n_samples() const { return static_cast<Eigen::Index>(std::llround(fs * duration)); }

    void validate(const WelchConfig& welch) const {
        require(force_std >= 0.0, "ExcitationSpec: force std must be >= 0");
        require(fs > 0.0 && duration > 0.0, "ExcitationSpec: fs and duration must be positive");
        require(n_samples() >= 4 * welch.segment_length,
                "ExcitationSpec: duration * fs must cover at least four Welch segments");
    }
};

/// Exact zero-order-hold transition of q'' + 2 zeta w q' + w^2 q = p.
struct OscillatorStep {
    Eigen::Matrix2d a;
    Eigen::Vector2d b;

    OscillatorStep(double omega, double zeta, double dt) {
        Eigen::Matrix2d cont;
        cont << 0.0, 1.0, -omega * omega, -2.0 * zeta * omega;
        a = (cont * dt).exp();
        b = cont.inverse() * (a - Eigen::Matrix2d::Identity()) * Eigen::Vector2d(0.0, 1.0);
    }
};

/**
 * Vertical displacement time series (N x n_samples) of every node.
 *
 * All modes below 0.95 x Nyquist contribute; the first M use the supplied
 * damping ratios, the rest the truss's Rayleigh coefficients. Supported
 * nodes have identically zero response.
 */
inline Eigen::MatrixXd simulate_response(const ModalSolution& modal, const TrussModel& truss, const ExcitationSpec& exc,
                                         const WelchConfig& welch = {}) {
    exc.validate(welch);
    const double nyquist = exc.fs / 2.0;
    if (modal.n_modes() > 0 && !(modal.frequencies.maxCoeff() < nyquist)) {
        throw InvalidArgument("simulate_response: sampling rate " + std::to_string(exc.fs) +
                              " Hz does not exceed twice the highest target mode (" +
                              std::to_string(modal.frequencies.maxCoeff()) + " Hz)");
    }
    const auto sys = assemble_system(truss);
    const auto all = solve_modes(sys, sys.n_dof());
    const auto rayleigh = rayleigh_damping(truss.rayleigh_a0, truss.rayleigh_a1, all.omegas);

    std::vector<int> active;
    std::vector<OscillatorStep> steps;
    const double dt = 1.0 / exc.fs;
    double slowest_decay = 1e300;
    for (int m = 0; m < sys.n_dof(); ++m) {
        if (all.frequencies[m] >= 0.95 * nyquist) break;
        const double zeta = m < modal.n_modes() ? modal.damping[m] : rayleigh[m];
        if (!(zeta > 0.0 && zeta < 1.0)) continue;
        active.push_back(m);
        steps.emplace_back(all.omegas[m], zeta, dt);
        slowest_decay = std::min(slowest_decay, zeta * all.omegas[m]);
    }
    const int na = static_cast<int>(active.size());

    // Modal participation of each free DOF and vertical output map.
    Eigen::MatrixXd participation(na, sys.n_dof());
    Eigen::MatrixXd output = Eigen::MatrixXd::Zero(truss.n_nodes(), na);
    for (int k = 0; k < na; ++k) {
        participation.row(k) = all.eigenvectors.col(active[static_cast<std::size_t>(k)]).transpose();
        for (int r = 0; r < sys.n_dof(); ++r) {
            const auto [node, dir] = sys.dof_owner[static_cast<std::size_t>(r)];
            if (dir == 1) output(node, k) = exc.output_scale * all.eigenvectors(r, active[static_cast<std::size_t>(k)]);
        }
    }

    const Eigen::Index n = exc.n_samples();
    // Burn-in long enough for the start-up transient of the slowest mode to decay by e^-8.
    const Eigen::Index burn_in = na > 0 ? static_cast<Eigen::Index>(std::ceil(8.0 / slowest_decay * exc.fs)) : 0;

    Rng rng(exc.seed);
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2, na);
    Eigen::VectorXd force(sys.n_dof());
    Eigen::VectorXd modal_force(na);
    Eigen::MatrixXd series(truss.n_nodes(), n);
    Eigen::VectorXd qpos(na);
    for (Eigen::Index t = -burn_in; t < n; ++t) {
        if (t >= 0) {
            qpos = q.row(0).transpose();
            series.col(t) = output * qpos;
        }
        for (int r = 0; r < sys.n_dof(); ++r) force[r] = exc.force_std * rng.normal();
        modal_force.noalias() = participation * force;
        for (int k = 0; k < na; ++k) {
            const auto& s = steps[static_cast<std::size_t>(k)];
            const Eigen::Vector2d next = s.a * q.col(k) + s.b * modal_force[k];
            q.col(k) = next;
        }
    }
    if (!series.allFinite()) throw NumericalError("simulate_response: non-finite response");
    return series;
}

/// Per-node PSD (rows) on a shared frequency axis.
struct NodePSDMatrix {
    Eigen::MatrixXd values;       // N x F
    Eigen::VectorXd frequencies;  // F, Hz
};

/// Welch estimate of every row of `series`, downsampled to 512 bins.
inline NodePSDMatrix node_psd(const Eigen::MatrixXd& series, const WelchConfig& welch, double fs, int out_bins = 512) {
    NodePSDMatrix out;
    out.values.resize(series.rows(), out_bins);
    for (Eigen::Index i = 0; i < series.rows(); ++i) {
        const Eigen::VectorXd row = series.row(i).transpose();
        out.values.row(i) = downsample_psd(welch_psd(row, welch, fs), out_bins).transpose();
    }
    out.frequencies = downsample_frequencies(welch_frequencies(welch, fs), out_bins);
    return out;
}

/**
 * Adds noise at the given SNR to every channel with non-zero power.
 * Channels at supported nodes carry no signal and are left unchanged.
 */
inline Eigen::MatrixXd add_noise_channels(const Eigen::MatrixXd& series, const Snr& snr_db, std::uint64_t seed) {
    if (!snr_db) return series;
    Eigen::MatrixXd out = series;
    for (Eigen::Index i = 0; i < series.rows(); ++i) {
        const Eigen::VectorXd row = series.row(i).transpose();
        if (row.squaredNorm() == 0.0) continue;
        out.row(i) = add_noise(row, snr_db, splitmix64(seed ^ static_cast<std::uint64_t>(i))).transpose();
    }
    return out;
}

}  // namespace mvgae
