/**
 * @file modalvgae.cpp
 * @brief Command-line front end: dataset generation, training, evaluation,
 *        prediction, noise/sparsity studies, model comparison and reports.
 */

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "modalvgae/cli/config.hpp"
#include "modalvgae/cli/svg.hpp"
#include "modalvgae/dataset/generate.hpp"
#include "modalvgae/dataset/io.hpp"
#include "modalvgae/eval/pipeline.hpp"
#include "modalvgae/eval/report_io.hpp"
#include "modalvgae/train/checkpoint.hpp"
#include "modalvgae/train/masked.hpp"
#include "modalvgae/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace mvgae;

namespace {

/// Flags shared by every command.
struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool deterministic = false;
    bool no_plots = false;
    bool force = false;
    std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c, bool out_required = true) {
    app->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "Master seed for this command");
    auto* o = app->add_option("--out", c.out, "Output directory");
    if (out_required) o->required();
    app->add_flag("--deterministic", c.deterministic, "Single-worker training for bit-identical logs");
    app->add_flag("--no-plots", c.no_plots, "Skip SVG figures");
    app->add_flag("--force", c.force, "Overwrite a non-empty output directory");
    app->add_option("--set", c.sets, "Config override, e.g. --set train.lr_backbone=5e-4")->take_all();
}

cli::RunConfig load_config(const Common& c) { return cli::load_run_config(c.config, c.sets); }

/// Refuses to touch a non-empty directory unless forced; creates it otherwise.
void claim_output(const fs::path& out, bool force) {
    if (fs::exists(out) && !fs::is_directory(out)) throw InvalidArgument("output path '" + out.string() + "' is a file");
    if (fs::exists(out) && !fs::is_empty(out) && !force) {
        throw InvalidArgument("output directory '" + out.string() + "' is not empty (use --force to overwrite)");
    }
    fs::create_directories(out);
}

void write_text(const fs::path& p, const std::string& s) { mvgae::detail::write_file(p, s); }

void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

nlohmann::json provenance(const cli::RunConfig& rc) {
    return {{"config", rc.tree()}, {"digest", rc.digest()}, {"source", rc.source}, {"overrides", rc.overrides}};
}

Dataset load_dataset(const std::string& dir) {
    if (dir.empty()) throw InvalidArgument("--data is required");
    if (!fs::exists(fs::path(dir) / "manifest.json")) {
        throw InvalidArgument("dataset '" + dir + "' not found (no manifest.json)");
    }
    return read_dataset(dir);
}

train::Checkpoint load_ckpt(const std::string& dir) {
    if (!fs::exists(fs::path(dir) / "ckpt.json")) throw InvalidArgument("checkpoint '" + dir + "' not found (no ckpt.json)");
    return train::load_checkpoint(dir);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void log(const std::string& msg) { std::cerr << "[modalvgae] " << msg << std::endl; }

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

int cmd_generate(const Common& c, std::optional<int> n) {
    auto rc = load_config(c);
    if (c.seed) rc.generation.seed = *c.seed;
    if (n) {
        if (*n < 3) throw InvalidArgument("--n must be at least 3 (one graph per split)");
        const auto& g = rc.generation;
        const double total = g.total();
        const int n_val = static_cast<int>(std::lround(*n * g.n_val / total));
        const int n_test = static_cast<int>(std::lround(*n * g.n_test / total));
        rc.generation.n_val = n_val;
        rc.generation.n_test = n_test;
        rc.generation.n_train = *n - n_val - n_test;
    }
    rc.validate();
    const fs::path out(c.out);
    claim_output(out, c.force);
    const auto t0 = std::chrono::steady_clock::now();
    const auto ds = generate_dataset(rc.generation);
    write_dataset(out, ds, true);
    double mean_n = 0.0;
    for (const auto& s : ds.samples) mean_n += s.n_nodes();
    mean_n /= static_cast<double>(ds.samples.size());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("generated %zu graphs (train %zu / val %zu / test %zu), mean nodes %.2f, %.1f s\n", ds.samples.size(),
                ds.manifest.train_ids.size(), ds.manifest.val_ids.size(), ds.manifest.test_ids.size(), mean_n, secs);
    std::printf("generation digest %s\n", ds.manifest.generation_digest.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const Common& c, const std::string& data_dir, const std::string& kind) {
    auto rc = load_config(c);
    if (c.seed) rc.train.seed = *c.seed;
    if (c.deterministic) rc.train.deterministic = true;
    if (kind != "ures" && kind != "baseline" && kind != "masked") {
        throw InvalidArgument("--model must be ures, baseline or masked");
    }
    const Dataset ds = load_dataset(data_dir);
    rc.model.in_features = ds.manifest.feature_dim + (kind == "masked" ? 1 : 0);
    rc.model.n_modes = ds.manifest.n_modes;
    rc.validate();
    const fs::path out(c.out);
    claim_output(out, c.force);

    auto data = kind == "masked" ? train::make_masked_train_data(ds, rc.study.mask) : train::make_train_data(ds);
    std::ofstream csv(out / "metrics.csv");
    csv << train::epoch_log_csv_header() << "\n";
    auto cb = [&](const train::EpochLog& e) {
        csv << train::epoch_log_csv_row(e) << "\n";
        csv.flush();
        if ((e.epoch + 1) % 10 == 0) {
            log("epoch " + std::to_string(e.epoch + 1) + " phase " + std::to_string(e.phase) + " train " +
                std::to_string(e.train_loss) + " val " + std::to_string(e.val_metric));
        }
    };
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = kind == "baseline" ? train::train_baseline(data, rc.model, rc.train, cb)
                                        : train::train(data, rc.model, rc.train, cb);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::json info{{"best_epoch", res.best_epoch},
                        {"best_val_metric", res.best_metric},
                        {"epochs", res.log.size()},
                        {"train_seconds", secs},
                        {"dataset_digest", ds.manifest.generation_digest},
                        {"run_digest", rc.digest()},
                        {"variant", kind}};
    train::Checkpoint best{kind == "baseline" ? "baseline" : "ures_vgae", rc.model, res.best, res.swag, info};
    train::Checkpoint fin = best;
    fin.params = res.final;
    train::save_checkpoint(out / "best", best);
    train::save_checkpoint(out / "final", fin);
    if (res.swag) {
        // Weights at the SWAG mean: the recommended checkpoint for evaluation.
        train::Checkpoint swa = best;
        swa.params.unflatten(res.swag->mean);
        train::save_checkpoint(out / "swa", swa);
    }
    write_json(out / "run_config.json", provenance(rc));
    write_json(out / "summary.json", info);
    std::printf("trained %s model: %zu epochs in %.1f s, best epoch %d (val %.5g)%s\n", kind.c_str(), res.log.size(),
                secs, res.best_epoch + 1, res.best_metric, res.swag ? ", SWAG collected" : "");
    return 0;
}

// ---------------------------------------------------------------------------
// eval / predict
// ---------------------------------------------------------------------------

void write_eval_plots(const fs::path& dir, const eval::EvalReport& r, const train::Checkpoint& ck, const Dataset& ds,
                      const std::vector<const GraphSample*>& split) {
    fs::create_directories(dir);
    plot::error_histograms(r).save(dir / "error_histograms.svg");
    plot::mac_boxplot(r).save(dir / "mac_boxplot.svg");
    plot::scatter(r, false).save(dir / "scatter_frequency.svg");
    plot::scatter(r, true).save(dir / "scatter_damping.svg");
    if (r.has_uncertainty) {
        plot::reliability(r).save(dir / "reliability.svg");
        plot::uncertainty_bars(r).save(dir / "uncertainty_decomposition.svg");
    }
    // mode-shape overlay for the lowest-id sample of the split
    const GraphSample* s = split.front();
    for (const auto* x : split) {
        if (x->id < s->id) s = x;
    }
    GraphSample norm = apply_normalization(*s, ds.manifest.norm);
    if (eval::expects_flag(ck, ds.manifest)) norm = with_observed_flag(norm);
    eval::UQConfig point;
    point.mc_passes = 0;
    point.swag_samples = 0;
    const auto pred = eval::predict_graph(ck, prepare<float>(norm, TargetTransform{}), point);
    plot::mode_shape_overlay(s->coords, s->edges, s->phi.cast<double>(), pred.phi, s->id).save(dir / "mode_shapes.svg");
}

void write_eval_outputs(const fs::path& out, const eval::EvalReport& r) {
    write_json(out / "report.json", eval::report_json(r));
    write_text(out / "modes.csv", eval::mode_table_csv(r));
    write_text(out / "samples.csv", eval::samples_csv(r));
    if (r.has_uncertainty) write_text(out / "calibration.csv", eval::calibration_csv(r));
}

int cmd_eval(const Common& c, const std::string& ckpt_dir, const std::string& data_dir, const std::string& split) {
    auto rc = load_config(c);
    if (c.seed) rc.uq.seed = *c.seed;
    rc.validate();
    const auto ck = load_ckpt(ckpt_dir);
    const Dataset ds = load_dataset(data_dir);
    const auto samples = ds.split(split);
    if (samples.empty()) throw InvalidArgument("split '" + split + "' is empty");
    const fs::path out(c.out);
    claim_output(out, c.force);
    const auto r = eval::evaluate_samples(ck, samples, ds.manifest, rc.uq);
    write_eval_outputs(out, r);
    write_json(out / "run_config.json", provenance(rc));
    if (!c.no_plots) write_eval_plots(out / "plots", r, ck, ds, samples);
    std::printf("%s on %s (%d graphs): mean MAC %.4f, freq MAE %.3f%%, damp MAE %.3f%%\n", ck.kind.c_str(),
                split.c_str(), r.n_samples, r.mean_mac, r.freq_mae, r.damp_mae);
    for (int k = 0; k < r.n_modes; ++k) {
        const auto& m = r.modes[static_cast<std::size_t>(k)];
        std::printf("  mode %d: MAC %.4f  freq err %+.3f%% (MAE %.3f%%)  damp err %+.3f%% (MAE %.3f%%)", k + 1,
                    m.mac.mean, m.freq_error.mean, m.freq_error.mae, m.damp_error.mean, m.damp_error.mae);
        if (r.has_uncertainty) std::printf("  ECE f %.3f z %.3f", m.ece_freq, m.ece_damp);
        std::printf("\n");
    }
    return 0;
}

int cmd_predict(const Common& c, const std::string& ckpt_dir, const std::string& data_dir, const std::string& split,
                const std::string& ids, double level) {
    auto rc = load_config(c);
    if (c.seed) rc.uq.seed = *c.seed;
    rc.validate();
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("--level must be in (0, 1)");
    const auto ck = load_ckpt(ckpt_dir);
    const Dataset ds = load_dataset(data_dir);
    std::vector<const GraphSample*> samples;
    if (!ids.empty()) {
        for (const auto& s : split_list(ids)) samples.push_back(&ds.get(static_cast<std::uint32_t>(std::stoul(s))));
    } else {
        samples = ds.split(split);
    }
    if (samples.empty()) throw InvalidArgument("nothing to predict");
    const fs::path out(c.out);
    claim_output(out, c.force);
    const bool flag = eval::expects_flag(ck, ds.manifest);
    std::vector<eval::Prediction> preds(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        GraphSample s = apply_normalization(*samples[i], ds.manifest.norm);
        if (flag) s = with_observed_flag(s);
        preds[i] = eval::predict_graph(ck, prepare<float>(s, TargetTransform{}), rc.uq);
    });
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : preds) {
        nlohmann::json jp{{"id", p.id}};
        const char* qnames[2] = {"frequency_hz", "damping_ratio"};
        for (int q = 0; q < 2; ++q) {
            nlohmann::json modes = nlohmann::json::array();
            for (Eigen::Index k = 0; k < p.mean.cols(); ++k) {
                nlohmann::json jm{{"mode", k + 1}, {"value", std::exp(p.mean(q, k))}};
                if (!p.summary.empty()) {
                    const auto& s = p.summary[q][static_cast<std::size_t>(k)];
                    const auto [lo, hi] = uq::confidence_interval(s, level);
                    jm["interval"] = {std::exp(lo), std::exp(hi)};
                    jm["sigma2_aleatoric_log"] = s.sigma2_alea;
                    jm["sigma2_epistemic_log"] = s.sigma2_epis;
                }
                modes.push_back(jm);
            }
            jp[qnames[q]] = modes;
        }
        std::vector<std::vector<double>> phi(static_cast<std::size_t>(p.phi.rows()));
        for (Eigen::Index r = 0; r < p.phi.rows(); ++r) {
            for (Eigen::Index k = 0; k < p.phi.cols(); ++k) phi[static_cast<std::size_t>(r)].push_back(p.phi(r, k));
        }
        jp["mode_shapes"] = phi;
        arr.push_back(jp);
    }
    write_json(out / "predictions.json", {{"checkpoint", ckpt_dir}, {"interval_level", level}, {"graphs", arr}});
    std::printf("wrote predictions for %zu graphs\n", preds.size());
    return 0;
}

// ---------------------------------------------------------------------------
// studies
// ---------------------------------------------------------------------------

struct ModelArgs {
    std::string ckpt;
    std::string baseline;
};

std::vector<train::Checkpoint> load_models(const ModelArgs& m, std::vector<eval::NamedModel>& named) {
    std::vector<train::Checkpoint> cks;
    cks.reserve(2);
    cks.push_back(load_ckpt(m.ckpt));
    if (!m.baseline.empty()) cks.push_back(load_ckpt(m.baseline));
    named.clear();
    for (const auto& ck : cks) named.push_back({ck.kind == "baseline" ? "GNN" : "UResVGAE", &ck});
    if (named.size() == 2 && named[0].name == named[1].name) {
        named[0].name += "_A";
        named[1].name += "_B";
    }
    return cks;
}

void write_study(const fs::path& out, const eval::StudyResult& s, bool plots, const std::string& title) {
    write_json(out / "study.json", eval::study_json(s));
    write_text(out / "study.csv", eval::study_csv(s));
    if (s.models.size() == 2) {
        const auto cmp = eval::compare_models(s);
        write_json(out / "comparison.json", eval::comparison_json(cmp));
        write_text(out / "comparison.csv", eval::comparison_csv(cmp));
    }
    if (plots) {
        fs::create_directories(out / "plots");
        plot::study_trends(s.labels, s.models, s.reports, title).save(out / "plots" / "study_trends.svg");
    }
    std::cout << eval::study_csv(s);
}

int cmd_study_noise(const Common& c, const ModelArgs& m, const std::string& data_dir, const std::string& snr) {
    auto rc = load_config(c);
    if (c.seed) rc.uq.seed = *c.seed;
    if (!snr.empty()) rc.study.snr = split_list(snr);
    rc.validate();
    const auto snrs = eval::parse_snr_list(rc.study.snr);
    std::vector<eval::NamedModel> named;
    const auto cks = load_models(m, named);
    const Dataset ds = load_dataset(data_dir);
    const fs::path out(c.out);
    claim_output(out, c.force);
    const auto s = eval::noise_study(named, ds, snrs, rc.uq, rc.study.split);
    write_study(out, s, !c.no_plots, "Noise robustness");
    write_json(out / "run_config.json", provenance(rc));
    return 0;
}

int cmd_study_sparsity(const Common& c, const ModelArgs& m, const std::string& data_dir, const std::string& fractions) {
    auto rc = load_config(c);
    if (c.seed) rc.uq.seed = *c.seed;
    if (!fractions.empty()) {
        rc.study.fractions.clear();
        for (const auto& f : split_list(fractions)) rc.study.fractions.push_back(std::stod(f));
    }
    rc.validate();
    std::vector<eval::NamedModel> named;
    const auto cks = load_models(m, named);
    const Dataset ds = load_dataset(data_dir);
    const fs::path out(c.out);
    claim_output(out, c.force);
    const auto s = eval::sparsity_study(named, ds, rc.study.fraction_values(), rc.uq, rc.study.mask.seed, rc.study.split);
    write_study(out, s, !c.no_plots, "Sensor sparsity");
    write_json(out / "run_config.json", provenance(rc));
    return 0;
}

int cmd_compare(const Common& c, const ModelArgs& m, const std::string& data_dir, const std::string& snr) {
    if (m.baseline.empty()) throw InvalidArgument("compare needs --baseline");
    return cmd_study_noise(c, m, data_dir, snr);
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

std::string md_row(const std::vector<std::string>& cells) {
    std::string s = "|";
    for (const auto& c : cells) s += " " + c + " |";
    return s + "\n";
}

std::string f4(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4f", v);
    return b;
}

/// Collects every report.json / study.json / comparison.json below `in` into one Markdown summary.
int cmd_report(const Common& c, const std::string& in) {
    if (!fs::is_directory(in)) throw InvalidArgument("--in '" + in + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(in)) {
        const auto name = e.path().filename().string();
        if (name == "report.json" || name == "study.json" || name == "comparison.json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InvalidArgument("no report.json, study.json or comparison.json found under '" + in + "'");
    const fs::path out(c.out);
    claim_output(out, c.force);
    std::ostringstream md;
    md << "# Modal identification report\n\n";
    for (const auto& f : files) {
        const auto j = nlohmann::json::parse(mvgae::detail::read_file(f));
        const auto rel = fs::relative(f, in).string();
        const auto name = f.filename().string();
        md << "## " << rel << "\n\n";
        if (name == "report.json") {
            const auto& s = j.at("summary");
            md << "Samples: " << j.at("n_samples").get<int>() << ", mean MAC " << f4(s.at("mean_mac").get<double>())
               << ", frequency MAE " << f4(s.at("freq_mae_pct").get<double>()) << "%, damping MAE "
               << f4(s.at("damp_mae_pct").get<double>()) << "%\n\n";
            const bool unc = j.at("has_uncertainty").get<bool>();
            std::vector<std::string> head{"Mode", "MAC mean", "MAC std", "MAC min", "f err mean %", "f err std %",
                                          "f err max %", "z err mean %", "z err std %", "z err max %"};
            if (unc) head.insert(head.end(), {"epis frac f", "epis frac z", "ECE f", "ECE z"});
            md << md_row(head);
            md << md_row(std::vector<std::string>(head.size(), "---"));
            for (const auto& m : j.at("modes")) {
                std::vector<std::string> row{std::to_string(m.at("mode").get<int>()),
                                             f4(m.at("mac").at("mean")), f4(m.at("mac").at("std")), f4(m.at("mac").at("min")),
                                             f4(m.at("freq_error_pct").at("mean")), f4(m.at("freq_error_pct").at("std")),
                                             f4(m.at("freq_error_pct").at("max_abs")), f4(m.at("damp_error_pct").at("mean")),
                                             f4(m.at("damp_error_pct").at("std")), f4(m.at("damp_error_pct").at("max_abs"))};
                if (unc) {
                    row.push_back(f4(m.at("epistemic_fraction").at("freq")));
                    row.push_back(f4(m.at("epistemic_fraction").at("damp")));
                    row.push_back(f4(m.at("calibration").at("ece_freq")));
                    row.push_back(f4(m.at("calibration").at("ece_damp")));
                }
                md << md_row(row);
            }
        } else if (name == "study.json") {
            md << "Axis: " << j.at("axis").get<std::string>() << "\n\n";
            std::vector<std::string> head{"Condition"};
            for (auto it = j.at("models").begin(); it != j.at("models").end(); ++it) {
                head.push_back(it.key() + " MAC");
                head.push_back(it.key() + " f MAE %");
                head.push_back(it.key() + " z MAE %");
            }
            md << md_row(head) << md_row(std::vector<std::string>(head.size(), "---"));
            const auto labels = j.at("conditions").get<std::vector<std::string>>();
            for (std::size_t i = 0; i < labels.size(); ++i) {
                std::vector<std::string> row{labels[i]};
                for (auto it = j.at("models").begin(); it != j.at("models").end(); ++it) {
                    const auto& s = it.value().at(i).at("summary");
                    row.push_back(f4(s.at("mean_mac")));
                    row.push_back(f4(s.at("freq_mae_pct")));
                    row.push_back(f4(s.at("damp_mae_pct")));
                }
                md << md_row(row);
            }
        } else {
            const auto a = j.at("model_a").get<std::string>(), b = j.at("model_b").get<std::string>();
            md << md_row({"Condition", "MAC " + a, "MAC " + b, "f MAE " + a, "f MAE " + b, "z MAE " + a, "z MAE " + b});
            md << md_row(std::vector<std::string>(7, "---"));
            for (const auto& r : j.at("rows")) {
                auto cell = [&](const char* key, const std::string& model) {
                    const double v = r.at(key).at(model).get<double>();
                    return r.at(key).at("winner").get<std::string>() == (model == a ? "A" : "B") ? "**" + f4(v) + "**" : f4(v);
                };
                md << md_row({r.at("condition").get<std::string>(), cell("mac", a), cell("mac", b), cell("freq_mae_pct", a),
                              cell("freq_mae_pct", b), cell("damp_mae_pct", a), cell("damp_mae_pct", b)});
            }
        }
        md << "\n";
    }
    write_text(out / "report.md", md.str());
    std::printf("wrote %s (%zu sources)\n", (out / "report.md").string().c_str(), files.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Modal identification from PSD graphs with a variational graph autoencoder"};
    app.require_subcommand(1);

    Common gen_c, train_c, eval_c, pred_c, noise_c, sparse_c, cmp_c, rep_c;
    std::optional<int> gen_n;
    std::string data, split = "test", kind = "ures", ids, snr, fractions, in;
    double level = 0.9;
    ModelArgs models;

    auto* gen = app.add_subcommand("generate", "Synthesize a truss dataset");
    add_common(gen, gen_c);
    gen->add_option("--n", gen_n, "Total graph count (split proportions follow the config)");

    auto* tr = app.add_subcommand("train", "Train a model on a dataset");
    add_common(tr, train_c);
    tr->add_option("--data", data, "Dataset directory")->required();
    tr->add_option("--model", kind, "ures | baseline | masked");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    add_common(ev, eval_c);
    ev->add_option("--ckpt", models.ckpt, "Checkpoint directory")->required();
    ev->add_option("--data", data, "Dataset directory")->required();
    ev->add_option("--split", split, "train | val | test");

    auto* pr = app.add_subcommand("predict", "Write per-graph predictions with intervals");
    add_common(pr, pred_c);
    pr->add_option("--ckpt", models.ckpt, "Checkpoint directory")->required();
    pr->add_option("--data", data, "Dataset directory")->required();
    pr->add_option("--split", split, "train | val | test");
    pr->add_option("--ids", ids, "Comma-separated sample ids (overrides --split)");
    pr->add_option("--level", level, "Interval confidence level");

    auto* sn = app.add_subcommand("study-noise", "Evaluate under measurement noise");
    add_common(sn, noise_c);
    sn->add_option("--ckpt", models.ckpt, "Checkpoint directory")->required();
    sn->add_option("--baseline", models.baseline, "Optional second checkpoint");
    sn->add_option("--data", data, "Dataset directory")->required();
    sn->add_option("--snr", snr, "Conditions, e.g. clean,30,20,10");

    auto* ss = app.add_subcommand("study-sparsity", "Evaluate with a fraction of sensors");
    add_common(ss, sparse_c);
    ss->add_option("--ckpt", models.ckpt, "Masked-input checkpoint directory")->required();
    ss->add_option("--baseline", models.baseline, "Optional second masked-input checkpoint");
    ss->add_option("--data", data, "Dataset directory")->required();
    ss->add_option("--fractions", fractions, "Observed-sensor percentages, e.g. 5,10,20,30,50,80,95");

    auto* cm = app.add_subcommand("compare", "Side-by-side comparison across noise conditions");
    add_common(cm, cmp_c);
    cm->add_option("--ckpt", models.ckpt, "Checkpoint directory")->required();
    cm->add_option("--baseline", models.baseline, "Baseline checkpoint directory")->required();
    cm->add_option("--data", data, "Dataset directory")->required();
    cm->add_option("--snr", snr, "Conditions, e.g. clean,30,20,10");

    auto* rp = app.add_subcommand("report", "Summarize report/study JSON files as Markdown");
    add_common(rp, rep_c);
    rp->add_option("--in", in, "Directory to scan")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cmd_generate(gen_c, gen_n);
        if (*tr) return cmd_train(train_c, data, kind);
        if (*ev) return cmd_eval(eval_c, models.ckpt, data, split);
        if (*pr) return cmd_predict(pred_c, models.ckpt, data, split, ids, level);
        if (*sn) return cmd_study_noise(noise_c, models, data, snr);
        if (*ss) return cmd_study_sparsity(sparse_c, models, data, fractions);
        if (*cm) return cmd_compare(cmp_c, models, data, snr);
        if (*rp) return cmd_report(rep_c, in);
    } catch (const InvalidArgument& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
