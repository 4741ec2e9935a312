#pragma once

/**
 * @file welch.hpp
 * @brief Welch PSD estimation, bin downsampling, and SNR-controlled noise.
 */

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/rng.hpp"

namespace mvgae {

struct WelchConfig {
    int segment_length = 2048;
    double overlap = 0.5;

    int raw_bins() const { return segment_length / 2 + 1; }

    void validate() const {
        require(segment_length >= 2 && (segment_length & (segment_length - 1)) == 0,
                "WelchConfig: segment length must be a power of two");
        require(overlap >= 0.0 && overlap < 1.0, "WelchConfig: overlap must be in [0, 1)");
    }
};

/// Periodic Hann window.
inline Eigen::VectorXd hann_window(int n) {
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    return w;
}

/// One-sided frequency axis of a Welch estimate, Hz.
inline Eigen::VectorXd welch_frequencies(const WelchConfig& cfg, double fs) {
    return Eigen::VectorXd::LinSpaced(cfg.raw_bins(), 0.0, fs / 2.0);
}

/**
 * Averaged Hann-windowed one-sided periodogram with per-segment mean
 * removal, scaled as a density so that its integral equals the variance.
 */
inline Eigen::VectorXd welch_psd(const Eigen::Ref<const Eigen::VectorXd>& series, const WelchConfig& cfg, double fs) {
    cfg.validate();
    require(fs > 0.0, "welch_psd: sampling rate must be positive");
    const int n = cfg.segment_length;
    if (series.size() < n) {
        throw InvalidArgument("welch_psd: series of length " + std::to_string(series.size()) +
                              " is shorter than one segment (" + std::to_string(n) + ")");
    }
    const int hop = std::max(1, static_cast<int>(std::lround(n * (1.0 - cfg.overlap))));
    const Eigen::VectorXd w = hann_window(n);
    const double scale = 1.0 / (fs * w.squaredNorm());

    Eigen::FFT<double> fft;
    std::vector<double> buf(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> spec;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(cfg.raw_bins());
    int count = 0;
    for (Eigen::Index start = 0; start + n <= series.size(); start += hop) {
        const double mean = series.segment(start, n).mean();
        for (int i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = (series[start + i] - mean) * w[i];
        fft.fwd(spec, buf);
        for (int k = 0; k < cfg.raw_bins(); ++k) acc[k] += std::norm(spec[static_cast<std::size_t>(k)]);
        ++count;
    }
    acc *= scale / count;
    // Fold negative frequencies into the one-sided estimate (DC and Nyquist appear once).
    acc.segment(1, cfg.raw_bins() - 2) *= 2.0;
    return acc;
}

/**
 * Drops the Nyquist bin of a (2 * out_bins + 1)-bin spectrum and averages
 * adjacent pairs, giving out_bins values.
 */
inline Eigen::VectorXd downsample_psd(const Eigen::Ref<const Eigen::VectorXd>& psd, int out_bins = 512) {
    if (psd.size() != 2 * out_bins + 1) {
        throw InvalidArgument("downsample_psd: expected " + std::to_string(2 * out_bins + 1) + " bins, got " +
                              std::to_string(psd.size()));
    }
    Eigen::VectorXd out(out_bins);
    for (int k = 0; k < out_bins; ++k) out[k] = 0.5 * (psd[2 * k] + psd[2 * k + 1]);
    return out;
}

/// Lower-edge frequency of each downsampled bin (starts at 0, spacing 2 df).
inline Eigen::VectorXd downsample_frequencies(const Eigen::VectorXd& raw_freqs, int out_bins = 512) {
    require(raw_freqs.size() == 2 * out_bins + 1, "downsample_frequencies: wrong axis length");
    Eigen::VectorXd out(out_bins);
    for (int k = 0; k < out_bins; ++k) out[k] = raw_freqs[2 * k];
    return out;
}

/// Signal-to-noise ratio in dB; std::nullopt means "clean".
using Snr = std::optional<double>;

inline std::string snr_label(const Snr& snr) {
    if (!snr) return "clean";
    const double v = *snr;
    return (v == std::floor(v) ? std::to_string(static_cast<long long>(v)) : std::to_string(v)) + "dB";
}

/**
 * Adds zero-mean Gaussian noise so that 10 log10(P_signal / P_noise) equals
 * snr_db, with P the mean square of the series. A clean SNR returns the input.
 */
inline Eigen::VectorXd add_noise(const Eigen::Ref<const Eigen::VectorXd>& series, const Snr& snr_db, std::uint64_t seed) {
    if (!snr_db) return series;
    require(std::isfinite(*snr_db), "add_noise: SNR must be finite or clean");
    const double power = series.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(series.size(), 1));
    if (!(power > 0.0)) throw InvalidArgument("add_noise: zero-power signal cannot be given a finite SNR");
    const double sigma = std::sqrt(power / std::pow(10.0, *snr_db / 10.0));
    Rng rng(seed);
    Eigen::VectorXd out = series;
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += sigma * rng.normal();
    return out;
}

}  // namespace mvgae
