#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "trifuse/gradcheck_suite.hpp"
#include "trifuse/metrics.hpp"
#include "trifuse/synth.hpp"
#include "trifuse/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Runs stay reproducible even when no seed is given: the generated one is
// announced on stderr.
std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t given) {
    if (opt->count() > 0) return given;
    std::random_device rd;
    const std::uint64_t seed =
        (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
    std::fprintf(stderr, "seed: %" PRIu64 " (generated; pass --seed to reproduce)\n", seed);
    return seed;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw trifuse::DataError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw trifuse::DataError("write failed for " + path.string());
}

struct TrainFlags {
    std::string data;
    std::string out_dir;
    std::string config_path;
    trifuse::TrainConfig cfg;
    std::string task = "classification";
    std::string kv = "sequence";
    std::string fusion = "cross";
    bool no_video = false, no_image = false, no_text = false;

    CLI::Option* o_task = nullptr;
    CLI::Option* o_lr = nullptr;
    CLI::Option* o_batch = nullptr;
    CLI::Option* o_epochs = nullptr;
    CLI::Option* o_patience = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_sigma = nullptr;
    CLI::Option* o_maskp = nullptr;
    CLI::Option* o_auto = nullptr;
    CLI::Option* o_lambda = nullptr;
    CLI::Option* o_dh = nullptr;
    CLI::Option* o_kv = nullptr;
    CLI::Option* o_fusion = nullptr;
    CLI::Option* o_fold = nullptr;
};

// Shared by train and ablate: config file first, then explicit flags on top.
void add_train_flags(CLI::App* cmd, TrainFlags& f, bool with_variant_flags) {
    cmd->add_option("--data", f.data, "manifest.jsonl path")->required();
    cmd->add_option("--config", f.config_path, "JSON config file");
    f.o_task = cmd->add_option("--task", f.task, "classification|regression");
    f.o_lr = cmd->add_option("--lr", f.cfg.lr, "learning rate");
    f.o_batch = cmd->add_option("--batch", f.cfg.batch, "batch size");
    f.o_epochs = cmd->add_option("--max-epochs", f.cfg.max_epochs, "epoch budget");
    f.o_patience = cmd->add_option("--patience", f.cfg.patience, "early-stopping patience");
    f.o_seed = cmd->add_option("--seed", f.cfg.seed, "training seed");
    f.o_sigma = cmd->add_option("--sigma", f.cfg.sigma, "augmentation noise std");
    f.o_maskp = cmd->add_option("--mask-p", f.cfg.mask_p, "augmentation mask probability");
    f.o_auto = cmd->add_flag("--autoencoder", f.cfg.autoencoder, "enable recon regularizer");
    f.o_lambda = cmd->add_option("--lambda", f.cfg.lambda, "recon weight");
    f.o_dh = cmd->add_option("--d-h", f.cfg.d_h, "hidden size");
    f.o_kv = cmd->add_option("--attention-kv", f.kv, "sequence|final");
    f.o_fold = cmd->add_option("--val-fold", f.cfg.val_fold, "validation fold (1..5)");
    if (with_variant_flags) {
        f.o_fusion = cmd->add_option("--fusion", f.fusion, "cross|concat");
        cmd->add_flag("--no-video", f.no_video, "zero out the video stream");
        cmd->add_flag("--no-image", f.no_image, "zero out the image stream");
        cmd->add_flag("--no-text", f.no_text, "zero out the text stream");
    }
}

trifuse::TrainConfig resolve_train_config(const TrainFlags& f) {
    trifuse::TrainConfig cfg;
    if (!f.config_path.empty()) cfg = trifuse::TrainConfig::load(f.config_path);
    if (f.o_task->count()) cfg.task = trifuse::task_from_name(f.task);
    if (f.o_lr->count()) cfg.lr = f.cfg.lr;
    if (f.o_batch->count()) cfg.batch = f.cfg.batch;
    if (f.o_epochs->count()) cfg.max_epochs = f.cfg.max_epochs;
    if (f.o_patience->count()) cfg.patience = f.cfg.patience;
    cfg.seed = resolve_seed(f.o_seed, f.cfg.seed);
    if (f.o_sigma->count()) cfg.sigma = f.cfg.sigma;
    if (f.o_maskp->count()) cfg.mask_p = f.cfg.mask_p;
    if (f.o_auto->count()) cfg.autoencoder = f.cfg.autoencoder;
    if (f.o_lambda->count()) cfg.lambda = f.cfg.lambda;
    if (f.o_dh->count()) cfg.d_h = f.cfg.d_h;
    if (f.o_kv->count()) cfg.kv = trifuse::kv_mode_from_name(f.kv);
    if (f.o_fusion != nullptr && f.o_fusion->count())
        cfg.fusion = trifuse::fusion_mode_from_name(f.fusion);
    if (f.o_fold->count()) cfg.val_fold = f.cfg.val_fold;
    if (f.no_video) cfg.use_video = false;
    if (f.no_image) cfg.use_image = false;
    if (f.no_text) cfg.use_text = false;
    cfg.validate();
    return cfg;
}

int run_train(const TrainFlags& f) {
    const trifuse::TrainConfig cfg = resolve_train_config(f);
    const trifuse::Manifest man = trifuse::read_manifest(f.data);
    fs::create_directories(f.out_dir);

    std::ofstream log(fs::path(f.out_dir) / "train_log.jsonl",
                      std::ios::binary | std::ios::trunc);
    if (!log) throw trifuse::DataError("cannot open train_log.jsonl for writing");
    const trifuse::TrainResult res = trifuse::train(cfg, man, &log);
    for (const trifuse::EpochStat& e : res.log)
        std::fprintf(stderr, "epoch %3zu  train_loss %.6f  val_%s %.4f\n", e.epoch,
                     e.train_loss, res.metric.c_str(), e.val_metric);

    const fs::path ckpt_path = fs::path(f.out_dir) / "checkpoint.tfck";
    trifuse::save_checkpoint(ckpt_path, res.checkpoint);
    std::fprintf(stderr, "best epoch %zu  val_%s %.4f  -> %s\n", res.checkpoint.epoch,
                 res.metric.c_str(), res.checkpoint.best, ckpt_path.string().c_str());
    return 0;
}

int run_eval(const std::string& data, const std::string& ckpt_path, int fold,
             bool fold_given, const std::string& out) {
    const trifuse::Checkpoint ckpt = trifuse::load_checkpoint(ckpt_path);
    const trifuse::Manifest man = trifuse::read_manifest(data);
    const int use_fold = fold_given ? fold : ckpt.config.val_fold;
    const trifuse::EvalReport rep = trifuse::evaluate(ckpt, man, use_fold);
    const std::string text = rep.to_json().dump() + "\n";
    std::fputs(text.c_str(), stdout);
    if (!out.empty()) write_text(out, text);
    return 0;
}

int run_gradcheck(std::uint64_t seed, double eps, double tol) {
    const trifuse::GradAuditReport rep = trifuse::run_grad_audit(seed, eps);
    for (const trifuse::GradAuditEntry& e : rep.entries)
        std::printf("%-26s %.3e\n", e.name.c_str(), e.max_rel_err);
    const double worst = rep.worst();
    std::printf("max relative error: %.3e (tolerance %.1e)\n", worst, tol);
    return worst < tol ? 0 : 1;
}

int run_ablate(const TrainFlags& f, const std::vector<std::uint64_t>& seeds,
               const std::string& out) {
    const trifuse::Manifest man = trifuse::read_manifest(f.data);
    trifuse::TrainConfig base = resolve_train_config(f);

    struct Variant {
        const char* name;
        trifuse::FusionMode fusion;
        bool v, i, t;
    };
    // Unimodal baselines use the concat head so the surviving stream feeds
    // the head directly instead of dying in the attention query path.
    const Variant variants[] = {
        {"full", trifuse::FusionMode::Cross, true, true, true},
        {"video", trifuse::FusionMode::Concat, true, false, false},
        {"image", trifuse::FusionMode::Concat, false, true, false},
        {"text", trifuse::FusionMode::Concat, false, false, true},
        {"concat", trifuse::FusionMode::Concat, true, true, true},
    };

    json result = json::object();
    std::printf("%-8s", "variant");
    for (std::uint64_t s : seeds) std::printf("  seed=%-6" PRIu64, s);
    std::printf("  mean\n");
    for (const Variant& v : variants) {
        trifuse::TrainConfig cfg = base;
        cfg.fusion = v.fusion;
        cfg.use_video = v.v;
        cfg.use_image = v.i;
        cfg.use_text = v.t;
        std::vector<double> scores;
        std::printf("%-8s", v.name);
        for (std::uint64_t s : seeds) {
            cfg.seed = s;
            const trifuse::TrainResult r = trifuse::train(cfg, man);
            scores.push_back(r.checkpoint.best);
            std::printf("  %-11.4f", r.checkpoint.best);
            std::fflush(stdout);
        }
        double mean = 0.0;
        for (double s : scores) mean += s;
        mean /= static_cast<double>(scores.size());
        std::printf("  %.4f\n", mean);
        result[v.name] = {{"scores", scores}, {"mean", mean}};
    }
    if (!out.empty()) write_text(out, result.dump(2) + "\n");
    return 0;
}

int run_report(const std::vector<std::string>& files, const std::vector<double>& scores,
               const std::string& metric, const std::string& out) {
    trifuse::FoldReport rep;
    if (!scores.empty()) {
        if (!files.empty())
            throw trifuse::ConfigError("report: pass eval files or --scores, not both");
        rep = trifuse::aggregate_folds(scores, metric);
    } else {
        if (files.size() != 5)
            throw trifuse::ConfigError("report: expected exactly 5 eval files, got " +
                                       std::to_string(files.size()));
        std::vector<double> vals;
        std::string met;
        for (const std::string& path : files) {
            std::ifstream in(path);
            if (!in) throw trifuse::DataError("report: cannot open " + path);
            json j;
            try {
                in >> j;
            } catch (const json::exception& e) {
                throw trifuse::DataError("report: " + path + ": " + e.what());
            }
            if (!j.contains("metric") || !j.contains("score"))
                throw trifuse::DataError("report: " + path + " is not an eval output");
            const std::string m = j["metric"].get<std::string>();
            if (met.empty()) met = m;
            else if (met != m)
                throw trifuse::ConfigError("report: mixed metrics " + met + " and " + m);
            vals.push_back(j["score"].get<double>());
        }
        rep = trifuse::aggregate_folds(vals, met);
    }
    std::printf("%s\n", rep.table_row().c_str());
    if (!out.empty()) write_text(out, rep.json() + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"three-stream multimodal fusion: synthesis, training, evaluation"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark");
    trifuse::SynthConfig scfg;
    std::string synth_out, synth_task = "classification";
    std::uint64_t synth_seed = 1;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--n", scfg.n_clips, "number of clips");
    synth->add_option("--dv", scfg.d_v, "video feature dim");
    synth->add_option("--di", scfg.d_i, "image feature dim");
    synth->add_option("--dt", scfg.d_t, "text feature dim");
    synth->add_option("--task", synth_task, "classification|regression");
    auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--noise", scfg.noise, "background noise scale");
    synth->add_option("--slots", scfg.n_slots, "keyed lookup slot count");

    // train
    auto* train_cmd = app.add_subcommand("train", "train and checkpoint a model");
    TrainFlags tf;
    add_train_flags(train_cmd, tf, true);
    train_cmd->add_option("--out", tf.out_dir, "output directory")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on one fold");
    std::string eval_data, eval_ckpt, eval_out;
    int eval_fold = 1;
    eval_cmd->add_option("--data", eval_data, "manifest.jsonl path")->required();
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    auto* eval_fold_opt = eval_cmd->add_option("--fold", eval_fold, "fold to score (1..5)");
    eval_cmd->add_option("--out", eval_out, "write the metric JSON here too");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    std::uint64_t gc_seed = 7;
    double gc_eps = 1e-5, gc_tol = 1e-4;
    auto* gc_seed_opt = gc->add_option("--seed", gc_seed, "audit seed");
    gc->add_option("--eps", gc_eps, "central-difference step");
    gc->add_option("--tol", gc_tol, "pass threshold on max relative error");

    // ablate
    auto* ab = app.add_subcommand("ablate", "compare full/unimodal/concat variants");
    TrainFlags af;
    add_train_flags(ab, af, false);
    std::vector<std::uint64_t> ab_seeds = {1, 2, 3};
    std::string ab_out;
    ab->add_option("--seeds", ab_seeds, "training seeds")->delimiter(',');
    ab->add_option("--out", ab_out, "write the comparison JSON here");

    // report
    auto* rp = app.add_subcommand("report", "aggregate five per-fold eval outputs");
    std::vector<std::string> rp_files;
    std::vector<double> rp_scores;
    std::string rp_metric = "f1", rp_out;
    rp->add_option("files", rp_files, "five eval JSON files");
    rp->add_option("--scores", rp_scores, "five scores, bypassing files")->delimiter(',');
    rp->add_option("--metric", rp_metric, "metric name used with --scores");
    rp->add_option("--out", rp_out, "write the report JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            scfg.task = trifuse::task_from_name(synth_task);
            scfg.seed = resolve_seed(synth_seed_opt, synth_seed);
            scfg.out_dir = synth_out;
            const trifuse::Manifest man = trifuse::generate_synthetic(scfg);
            std::printf("%s\n", (scfg.out_dir / "manifest.jsonl").string().c_str());
            std::fprintf(stderr, "wrote %zu clips\n", man.records.size());
            return 0;
        }
        if (train_cmd->parsed()) return run_train(tf);
        if (eval_cmd->parsed())
            return run_eval(eval_data, eval_ckpt, eval_fold, eval_fold_opt->count() > 0,
                            eval_out);
        if (gc->parsed()) return run_gradcheck(resolve_seed(gc_seed_opt, gc_seed), gc_eps, gc_tol);
        if (ab->parsed()) return run_ablate(af, ab_seeds, ab_out);
        if (rp->parsed()) return run_report(rp_files, rp_scores, rp_metric, rp_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
