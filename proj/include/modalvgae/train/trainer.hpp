#pragma once

/**
 * @file trainer.hpp
 * @brief Three-phase training of the variational graph model and point
 *        training of the baseline.
 *
 *   Phase 1: frequency and damping evidential losses only.
 *   Phase 2: adds the weighted MAC mode-shape loss.
 *   Phase 3: full objective with KL and CRPS warm-ups; SWAG snapshots.
 */

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/parallel.hpp"
#include "modalvgae/core/rng.hpp"
#include "modalvgae/dataset/graph.hpp"
#include "modalvgae/losses/losses.hpp"
#include "modalvgae/model/baseline.hpp"
#include "modalvgae/model/ures_vgae.hpp"
#include "modalvgae/train/optim.hpp"
#include "modalvgae/uq/swag.hpp"

namespace mvgae::train {

struct TrainConfig {
    /// Loss weights used for training; the MAC term is emphasized more than the bare loss default.
    static loss::LossWeights default_weights() {
        loss::LossWeights w;
        w.lambda_phi = 3.0;
        return w;
    }

    std::array<int, 3> phase_epochs{30, 50, 50};
    int batch_size = 8;
    int accumulation = 1;
    double lr_backbone = 5e-4;
    double lr_head = 1e-3;
    double lr_min_ratio = 0.01;
    double weight_decay = 1e-4;
    double clip_norm = 1.0;
    double cosine_t0 = 10.0;  // epochs, restarted at every phase start
    double cosine_t_mult = 2.0;
    int kl_warmup = 20;   // epochs from the start of phase 3
    int evi_warmup = 10;  // epochs from the start of training
    int crps_start = 10;  // epochs into phase 3
    int swag_epochs = 15; // snapshot window at the end of phase 3
    int swag_interval = 1;
    int baseline_epochs = 0;  // 0 = same total as the three phases
    loss::LossWeights weights = default_weights();
    std::uint64_t seed = 0;
    bool deterministic = false;

    int total_epochs() const { return phase_epochs[0] + phase_epochs[1] + phase_epochs[2]; }

    void validate(int n_modes) const {
        for (int e : phase_epochs) require(e >= 1, "TrainConfig: epochs per phase must be >= 1");
        require(batch_size >= 1 && accumulation >= 1, "TrainConfig: batch size and accumulation must be >= 1");
        require(lr_backbone > 0 && lr_head > 0, "TrainConfig: learning rates must be positive");
        require(lr_min_ratio >= 0 && lr_min_ratio <= 1, "TrainConfig: lr_min_ratio must be in [0, 1]");
        require(weight_decay >= 0, "TrainConfig: weight decay must be >= 0");
        require(clip_norm > 0, "TrainConfig: clip norm must be positive");
        require(cosine_t0 > 0 && cosine_t_mult >= 1, "TrainConfig: need cosine_t0 > 0 and cosine_t_mult >= 1");
        require(kl_warmup >= 0 && evi_warmup >= 0 && crps_start >= 0, "TrainConfig: warm-ups must be >= 0");
        require(swag_epochs >= 0 && swag_interval >= 1, "TrainConfig: swag_epochs >= 0, swag_interval >= 1");
        require(baseline_epochs >= 0, "TrainConfig: baseline_epochs must be >= 0");
        weights.validate(n_modes);
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"phase_epochs", c.phase_epochs},
                       {"batch_size", c.batch_size},
                       {"accumulation", c.accumulation},
                       {"lr_backbone", c.lr_backbone},
                       {"lr_head", c.lr_head},
                       {"lr_min_ratio", c.lr_min_ratio},
                       {"weight_decay", c.weight_decay},
                       {"clip_norm", c.clip_norm},
                       {"cosine_t0", c.cosine_t0},
                       {"cosine_t_mult", c.cosine_t_mult},
                       {"kl_warmup", c.kl_warmup},
                       {"evi_warmup", c.evi_warmup},
                       {"crps_start", c.crps_start},
                       {"swag_epochs", c.swag_epochs},
                       {"swag_interval", c.swag_interval},
                       {"baseline_epochs", c.baseline_epochs},
                       {"seed", c.seed},
                       {"deterministic", c.deterministic},
                       {"weights",
                        {{"lambda_f", c.weights.lambda_f},
                         {"lambda_zeta", c.weights.lambda_zeta},
                         {"lambda_crps", c.weights.lambda_crps},
                         {"lambda_phi", c.weights.lambda_phi},
                         {"lambda_ortho", c.weights.lambda_ortho},
                         {"kl", c.weights.kl},
                         {"lambda_evi", c.weights.lambda_evi},
                         {"mode_weights", c.weights.mode_weights}}}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    TrainConfig d;
    c.phase_epochs = j.value("phase_epochs", d.phase_epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.accumulation = j.value("accumulation", d.accumulation);
    c.lr_backbone = j.value("lr_backbone", d.lr_backbone);
    c.lr_head = j.value("lr_head", d.lr_head);
    c.lr_min_ratio = j.value("lr_min_ratio", d.lr_min_ratio);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
    c.clip_norm = j.value("clip_norm", d.clip_norm);
    c.cosine_t0 = j.value("cosine_t0", d.cosine_t0);
    c.cosine_t_mult = j.value("cosine_t_mult", d.cosine_t_mult);
    c.kl_warmup = j.value("kl_warmup", d.kl_warmup);
    c.evi_warmup = j.value("evi_warmup", d.evi_warmup);
    c.crps_start = j.value("crps_start", d.crps_start);
    c.swag_epochs = j.value("swag_epochs", d.swag_epochs);
    c.swag_interval = j.value("swag_interval", d.swag_interval);
    c.baseline_epochs = j.value("baseline_epochs", d.baseline_epochs);
    c.seed = j.value("seed", d.seed);
    c.deterministic = j.value("deterministic", d.deterministic);
    c.weights = d.weights;
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        c.weights.lambda_f = w.value("lambda_f", d.weights.lambda_f);
        c.weights.lambda_zeta = w.value("lambda_zeta", d.weights.lambda_zeta);
        c.weights.lambda_crps = w.value("lambda_crps", d.weights.lambda_crps);
        c.weights.lambda_phi = w.value("lambda_phi", d.weights.lambda_phi);
        c.weights.lambda_ortho = w.value("lambda_ortho", d.weights.lambda_ortho);
        c.weights.kl = w.value("kl", d.weights.kl);
        c.weights.lambda_evi = w.value("lambda_evi", d.weights.lambda_evi);
        c.weights.mode_weights = w.value("mode_weights", d.weights.mode_weights);
    }
}

// ---------------------------------------------------------------------------
// Schedule
// ---------------------------------------------------------------------------

struct ScheduleState {
    int epoch = 0;        // global, 0-based
    int phase = 1;        // 1..3
    int phase_epoch = 0;  // epochs since the phase started
    double kl_mult = 0.0;
    double evi_mult = 0.0;
    double crps_mult = 0.0;
    double lr_backbone = 0.0;
    double lr_head = 0.0;
};

inline ScheduleState schedule_at(const TrainConfig& c, int epoch, double epoch_fraction = 0.0) {
    ScheduleState s;
    s.epoch = epoch;
    const int p1 = c.phase_epochs[0], p12 = p1 + c.phase_epochs[1];
    s.phase = epoch < p1 ? 1 : (epoch < p12 ? 2 : 3);
    s.phase_epoch = s.phase == 1 ? epoch : (s.phase == 2 ? epoch - p1 : epoch - p12);
    s.evi_mult = warmup_multiplier(epoch, 0.0, c.evi_warmup);
    s.kl_mult = warmup_multiplier(epoch, p12, c.kl_warmup);
    s.crps_mult = warmup_multiplier(epoch, p12 + c.crps_start, 0.0);
    CosineSchedule cs{c.lr_backbone, c.lr_backbone * c.lr_min_ratio, c.cosine_t0, c.cosine_t_mult};
    s.lr_backbone = cosine_warm_restart_lr(s.phase_epoch + epoch_fraction, cs);
    s.lr_head = s.lr_backbone * (c.lr_head / c.lr_backbone);
    return s;
}

/// Effective loss weights for a schedule state (phase gating times warm-ups).
inline loss::TermWeights term_weights(const loss::LossWeights& w, const ScheduleState& s) {
    loss::TermWeights t;
    t.f = w.lambda_f;
    t.zeta = w.lambda_zeta;
    t.evi = w.lambda_evi * s.evi_mult;
    t.mode_weights = w.mode_weights;
    if (s.phase >= 2) t.phi = w.lambda_phi;
    if (s.phase >= 3) {
        t.ortho = w.lambda_ortho;
        t.crps = w.lambda_crps * s.crps_mult;
        t.kl = w.kl * s.kl_mult;
    }
    return t;
}

/// Weights of the full objective with every term active; used for validation.
inline loss::TermWeights full_weights(const loss::LossWeights& w) {
    ScheduleState s;
    s.phase = 3;
    s.kl_mult = s.evi_mult = s.crps_mult = 1.0;
    return term_weights(w, s);
}

// ---------------------------------------------------------------------------
// Data and logs
// ---------------------------------------------------------------------------

struct TrainData {
    std::vector<PreparedGraph<float>> train;
    std::vector<PreparedGraph<float>> val;
    /// Optional per-epoch rewrite of a training graph (e.g. random sensor masking).
    std::function<void(std::size_t index, int epoch, PreparedGraph<float>& g)> augment;
};

struct EpochLog {
    int epoch = 0;
    int phase = 1;
    double lr_backbone = 0, lr_head = 0;
    double kl_mult = 0, evi_mult = 0, crps_mult = 0;
    double train_loss = 0;  // scheduled objective, mean over graphs
    double grad_norm = 0;   // mean pre-clip norm over optimizer steps
    double val_metric = 0;  // full objective on validation
    loss::LossBreakdown val_parts;
};

inline std::string epoch_log_csv_header() {
    return "epoch,phase,lr_backbone,lr_head,kl_mult,evi_mult,crps_mult,train_loss,grad_norm,val_metric,"
           "val_nll_f,val_reg_f,val_nll_zeta,val_reg_zeta,val_crps,val_mac,val_ortho,val_kl";
}

inline std::string epoch_log_csv_row(const EpochLog& e) {
    char buf[512];
    const auto& p = e.val_parts;
    std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.9g,%.6g,%.6g,%.6g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                  e.epoch, e.phase, e.lr_backbone, e.lr_head, e.kl_mult, e.evi_mult, e.crps_mult, e.train_loss,
                  e.grad_norm, e.val_metric, p.nll_f, p.reg_f, p.nll_zeta, p.reg_zeta, p.crps, p.mac, p.ortho, p.kl);
    return buf;
}

struct TrainResult {
    nn::ParamStore<float> best;
    nn::ParamStore<float> final;
    std::optional<uq::SwagPosterior> swag;
    std::vector<EpochLog> log;
    int best_epoch = -1;
    double best_metric = std::numeric_limits<double>::infinity();
};

using EpochCallback = std::function<void(const EpochLog&)>;

namespace detail {

inline Eigen::RowVectorXd mean_targets(const std::vector<PreparedGraph<float>>& graphs, bool freq) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero((freq ? graphs[0].targets.log_freq : graphs[0].targets.log_zeta).cols());
    for (const auto& g : graphs) sum += (freq ? g.targets.log_freq : g.targets.log_zeta).cast<double>();
    return sum / static_cast<double>(graphs.size());
}

inline void check_data(const TrainData& data, const ModelConfig& cfg) {
    if (data.train.empty()) throw InvalidArgument("train: empty training split");
    if (data.val.empty()) throw InvalidArgument("train: empty validation split");
    for (const auto* split : {&data.train, &data.val}) {
        for (const auto& g : *split) {
            if (g.features.cols() != cfg.in_features) {
                throw InvalidArgument("train: graph " + std::to_string(g.id) + " has " +
                                      std::to_string(g.features.cols()) + " features, model expects " +
                                      std::to_string(cfg.in_features));
            }
            if (g.targets.log_freq.cols() != cfg.n_modes) throw InvalidArgument("train: mode count mismatch");
        }
    }
}

/**
 * Generic epoch loop: per-graph loss closures, gradient accumulation over
 * micro-batches, clipping, AdamW, best-on-validation bookkeeping.
 *
 * sample_loss(params, graph, schedule, rng) returns the scalar objective and
 * fills tape gradients; val_loss(params, graph) returns the selection metric,
 * which only competes from epoch `select_from` on.
 */
template <class LossFn, class ValFn, class SnapshotFn>
TrainResult run_epochs(nn::ParamStore<float> params, TrainData& data, const TrainConfig& tc, int n_epochs,
                       LossFn&& sample_loss, ValFn&& val_loss, SnapshotFn&& on_epoch_end, const EpochCallback& cb,
                       int select_from = 0) {
    TrainResult res;
    AdamWState<float> opt(params);
    AdamWConfig ocfg;
    ocfg.weight_decay = tc.weight_decay;
    const std::size_t n_train = data.train.size();
    const std::size_t steps_per_epoch = (n_train + tc.batch_size - 1) / tc.batch_size;
    const int workers = tc.deterministic ? 1 : worker_count();

    std::vector<std::size_t> order(n_train);
    nn::Gradients<float> acc(params);
    std::vector<nn::Gradients<float>> slot_grads;
    std::vector<double> slot_loss;

    for (int epoch = 0; epoch < n_epochs; ++epoch) {
        if (data.augment) {
            for (std::size_t i = 0; i < n_train; ++i) data.augment(i, epoch, data.train[i]);
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(tc.seed, static_cast<std::uint64_t>(epoch), Stream::Shuffle);
        shuffle_rng.shuffle(order);

        EpochLog log;
        const auto s0 = schedule_at(tc, epoch);
        log.epoch = epoch;
        log.phase = s0.phase;
        log.lr_backbone = s0.lr_backbone;
        log.lr_head = s0.lr_head;
        log.kl_mult = s0.kl_mult;
        log.evi_mult = s0.evi_mult;
        log.crps_mult = s0.crps_mult;

        double loss_sum = 0.0, norm_sum = 0.0;
        int opt_steps = 0, micro = 0;
        acc.set_zero();
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            const std::size_t lo = step * tc.batch_size;
            const std::size_t hi = std::min(n_train, lo + tc.batch_size);
            const auto sched = schedule_at(tc, epoch, static_cast<double>(step) / steps_per_epoch);
            const std::size_t bs = hi - lo;
            slot_loss.assign(bs, 0.0);
            if (workers > 1 && bs > 1) {
                if (slot_grads.size() < bs) slot_grads.resize(bs, nn::Gradients<float>(params));
                parallel_for(bs, [&](std::size_t k) {
                    const std::size_t gi = order[lo + k];
                    slot_grads[k].set_zero();
                    Rng rng(tc.seed, static_cast<std::uint64_t>(epoch) * 1000003ull + gi, Stream::Dropout);
                    ad::Tape<float> tape;
                    slot_loss[k] = sample_loss(params, data.train[gi], sched, rng, tape, epoch, gi);
                    slot_grads[k].accumulate_from(tape);
                }, workers);
                // fixed-order reduction keeps results independent of scheduling
                for (std::size_t k = 0; k < bs; ++k) acc.add(slot_grads[k], 1.0f / static_cast<float>(bs));
            } else {
                for (std::size_t k = 0; k < bs; ++k) {
                    const std::size_t gi = order[lo + k];
                    Rng rng(tc.seed, static_cast<std::uint64_t>(epoch) * 1000003ull + gi, Stream::Dropout);
                    ad::Tape<float> tape;
                    slot_loss[k] = sample_loss(params, data.train[gi], sched, rng, tape, epoch, gi);
                    acc.accumulate_from(tape, 1.0f / static_cast<float>(bs));
                }
            }
            for (double l : slot_loss) loss_sum += l;
            ++micro;
            if (micro == tc.accumulation || step + 1 == steps_per_epoch) {
                if (micro > 1) {
                    for (auto& v : acc.values) v /= static_cast<float>(micro);
                }
                if (!acc.all_finite()) {
                    throw NumericalError("train: non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                                         std::to_string(step));
                }
                norm_sum += clip_gradients(acc, tc.clip_norm);
                adamw_step(params, acc, opt, sched.lr_backbone, sched.lr_head, ocfg);
                ++opt_steps;
                micro = 0;
                acc.set_zero();
            }
        }
        log.train_loss = loss_sum / static_cast<double>(n_train);
        log.grad_norm = opt_steps ? norm_sum / opt_steps : 0.0;

        loss::LossBreakdown vsum;
        double vtotal = 0.0;
        for (const auto& g : data.val) {
            const auto parts = val_loss(params, g);
            vtotal += parts.total;
            vsum.nll_f += parts.nll_f;
            vsum.reg_f += parts.reg_f;
            vsum.nll_zeta += parts.nll_zeta;
            vsum.reg_zeta += parts.reg_zeta;
            vsum.crps += parts.crps;
            vsum.mac += parts.mac;
            vsum.ortho += parts.ortho;
            vsum.kl += parts.kl;
        }
        const double nv = static_cast<double>(data.val.size());
        log.val_metric = vtotal / nv;
        log.val_parts = {vsum.nll_f / nv, vsum.reg_f / nv, vsum.nll_zeta / nv, vsum.reg_zeta / nv,
                         vsum.crps / nv,  vsum.mac / nv,   vsum.ortho / nv,    vsum.kl / nv,
                         log.val_metric};
        if (!std::isfinite(log.val_metric)) {
            throw NumericalError("train: non-finite validation metric at epoch " + std::to_string(epoch));
        }
        if (epoch >= select_from && log.val_metric < res.best_metric) {
            res.best_metric = log.val_metric;
            res.best_epoch = epoch;
            res.best = params;
        }
        on_epoch_end(epoch, params);
        res.log.push_back(log);
        if (cb) cb(log);
    }
    res.final = std::move(params);
    return res;
}

}  // namespace detail

/// Initializes the mean outputs of both evidential heads at the training target means.
inline void init_head_biases(nn::ParamStore<float>& p, const std::vector<PreparedGraph<float>>& train, int m) {
    const auto mf = detail::mean_targets(train, true);
    const auto mz = detail::mean_targets(train, false);
    for (Eigen::Index k = 0; k < m; ++k) {
        p["head_freq.out.b"](0, k) = static_cast<float>(mf[k]);
        p["head_zeta.out.b"](0, k) = static_cast<float>(mz[k]);
    }
}

/// Three-phase training of the variational graph model.
inline TrainResult train(TrainData& data, const ModelConfig& cfg, const TrainConfig& tc,
                         const EpochCallback& cb = {}) {
    cfg.validate();
    tc.validate(cfg.n_modes);
    detail::check_data(data, cfg);
    auto params = model::init_params<float>(cfg, derive_seed(tc.seed, 0, Stream::Init));
    init_head_biases(params, data.train, cfg.n_modes);

    const auto val_weights = full_weights(tc.weights);
    const int total = tc.total_epochs();
    const int swag_from = std::max(total - tc.swag_epochs, total - tc.phase_epochs[2]);
    uq::SwagAccumulator swag;

    auto sample_loss = [&](const nn::ParamStore<float>& ps, const PreparedGraph<float>& g, const ScheduleState& s,
                           Rng& rng, ad::Tape<float>& tape, int epoch, std::size_t gi) {
        nn::Binding<float> b(tape, ps);
        model::ForwardOptions fo;
        fo.latent = model::LatentMode::Stochastic;
        fo.dropout = cfg.dropout > 0.0;
        fo.rng = &rng;
        model::Branches br;
        br.node_decoder = s.phase >= 2;
        const auto out = model::forward(b, g.features, g.nb, cfg, fo, br);
        loss::LossResult<float> r;
        try {
            r = loss::total_loss(out, g.targets, term_weights(tc.weights, s));
        } catch (const NumericalError& ex) {
            throw NumericalError(std::string(ex.what()) + " (epoch " + std::to_string(epoch) + ", graph " +
                                 std::to_string(g.id) + ", slot " + std::to_string(gi) + ")");
        }
        tape.backward(r.total);
        return r.parts.total;
    };
    auto val_loss = [&](const nn::ParamStore<float>& ps, const PreparedGraph<float>& g) {
        ad::Tape<float> tape;
        nn::Binding<float> b(tape, ps);
        const auto out = model::forward(b, g.features, g.nb, cfg, model::ForwardOptions{});
        return loss::total_loss(out, g.targets, val_weights).parts;
    };
    auto on_end = [&](int epoch, const nn::ParamStore<float>& ps) {
        if (tc.swag_epochs > 0 && epoch >= swag_from && (epoch - swag_from) % tc.swag_interval == 0) {
            swag.add(ps.flatten());
        }
    };
    auto res = detail::run_epochs(std::move(params), data, tc, total, sample_loss, val_loss, on_end, cb,
                                  total - tc.phase_epochs[2]);
    if (swag.count() >= 2) res.swag = swag.finalize();
    return res;
}

/// Point-estimate baseline trained with squared log error plus the MAC loss.
inline TrainResult train_baseline(TrainData& data, const ModelConfig& cfg, const TrainConfig& tc,
                                  const EpochCallback& cb = {}) {
    cfg.validate();
    tc.validate(cfg.n_modes);
    detail::check_data(data, cfg);
    auto params = model::init_baseline_params<float>(cfg, derive_seed(tc.seed, 1, Stream::Init));
    const auto mf = detail::mean_targets(data.train, true);
    const auto mz = detail::mean_targets(data.train, false);
    for (Eigen::Index k = 0; k < cfg.n_modes; ++k) {
        params["base.head.out.b"](0, k) = static_cast<float>(mf[k]);
        params["base.head.out.b"](0, cfg.n_modes + k) = static_cast<float>(mz[k]);
    }
    const int epochs = tc.baseline_epochs > 0 ? tc.baseline_epochs : tc.total_epochs();
    // Schedule without phases: one cosine run over all epochs.
    TrainConfig flat = tc;
    flat.phase_epochs = {epochs, 1, 1};

    auto eval_loss = [&](const nn::ParamStore<float>& ps, const PreparedGraph<float>& g, ad::Tape<float>& tape) {
        nn::Binding<float> b(tape, ps);
        const auto out = model::baseline_forward(b, g.features, g.nb, cfg);
        return loss::baseline_loss(out, g.targets, tc.weights.mode_weights, tc.weights.lambda_phi);
    };
    auto sample_loss = [&](const nn::ParamStore<float>& ps, const PreparedGraph<float>& g, const ScheduleState&, Rng&,
                           ad::Tape<float>& tape, int, std::size_t) {
        auto l = eval_loss(ps, g, tape);
        const double v = l.scalar();
        if (!std::isfinite(v)) throw NumericalError("train_baseline: non-finite loss at graph " + std::to_string(g.id));
        tape.backward(l);
        return v;
    };
    auto val_loss = [&](const nn::ParamStore<float>& ps, const PreparedGraph<float>& g) {
        ad::Tape<float> tape;
        loss::LossBreakdown b;
        b.total = eval_loss(ps, g, tape).scalar();
        return b;
    };
    auto on_end = [](int, const nn::ParamStore<float>&) {};
    return detail::run_epochs(std::move(params), data, flat, epochs, sample_loss, val_loss, on_end, cb);
}

}  // namespace mvgae::train
