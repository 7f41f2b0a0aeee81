#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "trifuse/common.hpp"
#include "trifuse/synth.hpp"
#include "trifuse/trainer.hpp"

using namespace trifuse;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const Manifest& small_manifest() {
    static const Manifest m = [] {
        SynthConfig cfg;
        cfg.n_clips = 40;
        cfg.seed = 9;
        cfg.out_dir = temp_dir("trifuse_trainer_ds");
        return generate_synthetic(cfg);
    }();
    return m;
}

TrainConfig quick_config() {
    TrainConfig c;
    c.d_h = 8;
    c.max_epochs = 2;
    c.patience = 10;
    c.sigma = 0.0;
    c.mask_p = 0.0;
    c.seed = 3;
    return c;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("adamw reproduces the update rule step by step") {
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;
    ad::Tape tape;
    ad::Node* p = tape.leaf(Tensor::row({1.0, -2.0}));
    AdamW opt({lr, b1, b2, eps, wd});

    double theta[2] = {1.0, -2.0};
    double m[2] = {0.0, 0.0}, v[2] = {0.0, 0.0};
    const double grads[2][2] = {{0.3, -0.7}, {-0.1, 0.4}};
    for (int t = 1; t <= 2; ++t) {
        for (int k = 0; k < 2; ++k) p->grad()[k] = grads[t - 1][k];
        opt.step(std::vector<ad::Node*>{p});
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
        for (int k = 0; k < 2; ++k) {
            const double g = grads[t - 1][k];
            m[k] = b1 * m[k] + (1.0 - b1) * g;
            v[k] = b2 * v[k] + (1.0 - b2) * g * g;
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            theta[k] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + wd * theta[k]);
            CHECK(p->value[k] == theta[k]);
        }
    }
    CHECK(opt.steps() == 2);
}

TEST_CASE("adamw with zero gradients: decay only, or a strict no-op") {
    ad::Tape tape;
    ad::Node* p = tape.leaf(Tensor::row({0.5, -1.5}));
    p->grad();  // materialize zeros

    AdamW frozen({0.1, 0.9, 0.999, 1e-8, 0.0});
    frozen.step(std::vector<ad::Node*>{p});
    CHECK(p->value[0] == 0.5);
    CHECK(p->value[1] == -1.5);

    AdamW decay({0.1, 0.9, 0.999, 1e-8, 0.01});
    decay.step(std::vector<ad::Node*>{p});
    for (int k = 0; k < 2; ++k) {
        const double t0 = k == 0 ? 0.5 : -1.5;
        const double expect = t0 - 0.1 * (0.0 / (std::sqrt(0.0) + 1e-8) + 0.01 * t0);
        CHECK(p->value[k] == expect);
    }
}

TEST_CASE("adamw validates its configuration and parameter identity") {
    CHECK_THROWS_AS(AdamW({-1.0, 0.9, 0.999, 1e-8, 0.01}), ContractError);
    CHECK_THROWS_AS(AdamW({std::nan(""), 0.9, 0.999, 1e-8, 0.01}), ContractError);
    CHECK_THROWS_AS(AdamW({3e-4, 1.0, 0.999, 1e-8, 0.01}), ContractError);
    CHECK_THROWS_AS(AdamW({3e-4, 0.9, -0.1, 1e-8, 0.01}), ContractError);
    CHECK_THROWS_AS(AdamW({3e-4, 0.9, 0.999, 0.0, 0.01}), ContractError);
    CHECK_THROWS_AS(AdamW({3e-4, 0.9, 0.999, 1e-8, -0.01}), ContractError);

    ad::Tape tape;
    ad::Node* a = tape.leaf(Tensor::row({1.0}));
    ad::Node* b = tape.leaf(Tensor::row({2.0}));
    AdamW opt({0.1, 0.9, 0.999, 1e-8, 0.0});
    opt.step(std::vector<ad::Node*>{a, b});
    CHECK_THROWS_AS(opt.step(std::vector<ad::Node*>{a}), ContractError);

    AdamW opt2({0.1, 0.9, 0.999, 1e-8, 0.0});
    opt2.step(std::vector<ad::Node*>{a});
    a->value = Tensor::row({1.0, 2.0});
    CHECK_THROWS_AS(opt2.step(std::vector<ad::Node*>{a}), ContractError);
}

TEST_CASE("train config validation rejects each out-of-range field") {
    TrainConfig base;
    base.validate();

    auto expect_bad = [](TrainConfig c) { CHECK_THROWS_AS(c.validate(), ConfigError); };
    TrainConfig c = base;
    c.lr = -1.0;
    expect_bad(c);
    c = base;
    c.batch = 0;
    expect_bad(c);
    c = base;
    c.beta1 = 1.0;
    expect_bad(c);
    c = base;
    c.beta2 = -0.1;
    expect_bad(c);
    c = base;
    c.eps = 0.0;
    expect_bad(c);
    c = base;
    c.weight_decay = -0.01;
    expect_bad(c);
    c = base;
    c.patience = 0;
    expect_bad(c);
    c = base;
    c.max_epochs = 0;
    expect_bad(c);
    c = base;
    c.sigma = -0.1;
    expect_bad(c);
    c = base;
    c.mask_p = 1.5;
    expect_bad(c);
    c = base;
    c.lambda = -0.1;
    expect_bad(c);
    c = base;
    c.d_h = 0;
    expect_bad(c);
    c = base;
    c.val_fold = 0;
    expect_bad(c);
    c = base;
    c.val_fold = 6;
    expect_bad(c);
}

TEST_CASE("train config json roundtrip preserves every field") {
    TrainConfig c;
    c.task = Task::Regression;
    c.lr = 1e-3;
    c.batch = 4;
    c.beta1 = 0.8;
    c.beta2 = 0.99;
    c.eps = 1e-9;
    c.weight_decay = 0.02;
    c.patience = 3;
    c.max_epochs = 7;
    c.seed = 42;
    c.sigma = 0.05;
    c.mask_p = 0.2;
    c.autoencoder = true;
    c.lambda = 0.3;
    c.d_h = 16;
    c.kv = KvMode::Final;
    c.fusion = FusionMode::Concat;
    c.use_video = false;
    c.use_text = false;
    c.val_fold = 4;

    const TrainConfig r = TrainConfig::from_json(c.to_json());
    CHECK(r.to_json() == c.to_json());
    CHECK(r.task == Task::Regression);
    CHECK(r.kv == KvMode::Final);
    CHECK(r.fusion == FusionMode::Concat);
    CHECK(r.use_video == false);
    CHECK(r.use_image == true);
    CHECK(r.use_text == false);
    CHECK(r.seed == 42);

    const ModelConfig mc = r.model_config(16, 16, 12);
    CHECK(mc.task == Task::Regression);
    CHECK(mc.d_v == 16);
    CHECK(mc.d_h == 16);
    CHECK(mc.fusion == FusionMode::Concat);
    CHECK(mc.use_video == false);
    CHECK(mc.autoencoder == true);
    CHECK(mc.out_dim() == 2);
    CHECK(mc.fused_dim() == 3 * 16);
}

TEST_CASE("train config json rejects malformed input") {
    CHECK_THROWS_AS(TrainConfig::from_json(json::parse(R"({"no_such_key": 1})")), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json(json::parse(R"({"betas": [0.9]})")), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json(json::parse(R"({"betas": 0.9})")), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json(json::parse(R"({"lr": "fast"})")), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json(json::parse(R"({"attention": {"kv": "final", "heads": 2}})")),
                    ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json(json::parse(R"({"attention": {"kv": "middle"}})")),
                    ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json(json::parse(R"({"fusion": "sum"})")), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json(json::parse(R"([1, 2])")), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json(json::parse(R"({"lr": -0.5})")), ConfigError);

    const fs::path dir = temp_dir("trifuse_trainer_cfg");
    CHECK_THROWS_AS(TrainConfig::load(dir / "absent.json"), DataError);
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK_THROWS_AS(TrainConfig::load(dir / "bad.json"), ConfigError);
    std::ofstream(dir / "good.json") << TrainConfig().to_json().dump();
    CHECK(TrainConfig::load(dir / "good.json").to_json() == TrainConfig().to_json());
}

TEST_CASE("a short run drives the training loss down") {
    TrainConfig cfg = quick_config();
    cfg.max_epochs = 8;
    const TrainResult res = train(cfg, small_manifest());
    REQUIRE(res.log.size() == 8);
    CHECK(res.metric == "f1");
    CHECK(res.log.back().train_loss < res.log.front().train_loss);
    CHECK(res.checkpoint.epoch >= 1);
    CHECK(res.checkpoint.best >= 0.0);
}

TEST_CASE("early stopping: frozen parameters quit after patience epochs") {
    TrainConfig cfg = quick_config();
    cfg.lr = 0.0;
    cfg.patience = 2;
    cfg.max_epochs = 50;
    const TrainResult res = train(cfg, small_manifest());
    // Epoch 1 always improves on -inf; 2 and 3 tie, which is not improvement.
    REQUIRE(res.log.size() == 3);
    CHECK(res.checkpoint.epoch == 1);
    CHECK(res.checkpoint.best == res.log.front().val_metric);
    CHECK(res.log[1].val_metric == res.log[0].val_metric);
    CHECK(res.log[2].val_metric == res.log[0].val_metric);
}

TEST_CASE("training is deterministic and checkpoints round-trip bit-exactly") {
    TrainConfig cfg = quick_config();
    cfg.sigma = 0.01;  // exercise the augmentation path
    cfg.mask_p = 0.1;
    std::ostringstream log_a, log_b;
    const TrainResult a = train(cfg, small_manifest(), &log_a);
    const TrainResult b = train(cfg, small_manifest(), &log_b);

    CHECK(log_a.str() == log_b.str());
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].train_loss == b.log[i].train_loss);
        CHECK(a.log[i].val_metric == b.log[i].val_metric);
    }
    REQUIRE(a.checkpoint.tensors.size() == b.checkpoint.tensors.size());
    for (std::size_t i = 0; i < a.checkpoint.tensors.size(); ++i) {
        CHECK(a.checkpoint.tensors[i].first == b.checkpoint.tensors[i].first);
        const Tensor& x = a.checkpoint.tensors[i].second;
        const Tensor& y = b.checkpoint.tensors[i].second;
        REQUIRE(x.same_shape(y));
        for (std::size_t k = 0; k < x.numel(); ++k) CHECK(x[k] == y[k]);
    }

    const fs::path dir = temp_dir("trifuse_trainer_ckpt");
    save_checkpoint(dir / "a.tfck", a.checkpoint);
    save_checkpoint(dir / "b.tfck", b.checkpoint);
    CHECK(file_bytes(dir / "a.tfck") == file_bytes(dir / "b.tfck"));

    SUBCASE("loaded checkpoints rescore identically") {
        const Checkpoint loaded = load_checkpoint(dir / "a.tfck");
        CHECK(loaded.epoch == a.checkpoint.epoch);
        CHECK(loaded.best == a.checkpoint.best);
        CHECK(loaded.d_v == a.checkpoint.d_v);
        CHECK(loaded.config.to_json() == cfg.to_json());
        REQUIRE(loaded.tensors.size() == a.checkpoint.tensors.size());
        for (const auto& [name, value] : loaded.tensors) {
            bool found = false;
            for (const auto& [oname, ovalue] : a.checkpoint.tensors) {
                if (oname != name) continue;
                found = true;
                REQUIRE(value.same_shape(ovalue));
                for (std::size_t k = 0; k < value.numel(); ++k) CHECK(value[k] == ovalue[k]);
            }
            CHECK(found);
        }

        const EvalReport from_memory = evaluate(a.checkpoint, small_manifest(), cfg.val_fold);
        const EvalReport from_disk = evaluate(loaded, small_manifest(), cfg.val_fold);
        CHECK(from_memory.score == from_disk.score);
        CHECK(from_memory.score == a.checkpoint.best);
        CHECK(from_memory.metric == "f1");
        CHECK(from_memory.n_windows > 0);
    }
}

TEST_CASE("checkpoint files reject corruption") {
    const fs::path dir = temp_dir("trifuse_trainer_ckpt_bad");
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.tfck"), DataError);

    std::ofstream(dir / "magic.tfck", std::ios::binary) << "NOPE1234";
    try {
        load_checkpoint(dir / "magic.tfck");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset == 0);
    }

    std::ofstream out(dir / "version.tfck", std::ios::binary);
    out << "TFCK";
    const char version9[4] = {9, 0, 0, 0};
    out.write(version9, 4);
    out.close();
    try {
        load_checkpoint(dir / "version.tfck");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset == 4);
    }
}

TEST_CASE("epoch log lines are one json object per epoch") {
    TrainConfig cfg = quick_config();
    std::ostringstream log;
    const TrainResult res = train(cfg, small_manifest(), &log);

    std::istringstream in(log.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const json j = json::parse(line);
        ++n;
        CHECK(j.at("epoch").get<std::size_t>() == n);
        CHECK(std::isfinite(j.at("train_loss").get<double>()));
        CHECK(j.contains("val_f1"));
        CHECK(j.at("val_f1").get<double>() == res.log[n - 1].val_metric);
    }
    CHECK(n == res.log.size());
}

TEST_CASE("forward is invariant to batch packing") {
    const auto windows = load_windows(small_manifest(), std::nullopt, true);
    REQUIRE(windows.size() >= 3);
    TrainConfig cfg = quick_config();
    Model model(cfg.model_config(windows[0].video.dim, windows[0].image.dim, windows[0].text.dim),
                cfg.seed);

    ad::Tape tape;
    const std::vector<const WindowSample*> batch = {&windows[0], &windows[1], &windows[2]};
    const Model::Forward packed = model.forward(tape, batch);
    for (std::size_t i = 0; i < 3; ++i) {
        ad::Tape t2;
        const Model::Forward single = model.forward(t2, {&windows[i]});
        REQUIRE(single.out->value.cols() == packed.out->value.cols());
        for (std::size_t j = 0; j < packed.out->value.cols(); ++j)
            CHECK(single.out->value.at(0, j) == packed.out->value.at(i, j));
        for (std::size_t j = 0; j < packed.fused->value.cols(); ++j)
            CHECK(single.fused->value.at(0, j) == packed.fused->value.at(i, j));
    }
}

TEST_CASE("train refuses empty splits and mismatched tasks") {
    TrainConfig cfg = quick_config();

    Manifest only_fold1 = small_manifest();
    std::erase_if(only_fold1.records, [](const ManifestRecord& r) { return r.fold != 1; });
    cfg.val_fold = 1;
    CHECK_THROWS_AS(train(cfg, only_fold1), ConfigError);  // empty training split

    Manifest only_fold2 = small_manifest();
    std::erase_if(only_fold2.records, [](const ManifestRecord& r) { return r.fold != 2; });
    CHECK_THROWS_AS(train(cfg, only_fold2), ConfigError);  // empty validation split

    TrainConfig wrong_task = quick_config();
    wrong_task.task = Task::Regression;
    CHECK_THROWS_AS(train(wrong_task, small_manifest()), ConfigError);

    const auto windows = load_windows(small_manifest(), std::nullopt, true);
    Model model(cfg.model_config(windows[0].video.dim, windows[0].image.dim, windows[0].text.dim),
                cfg.seed);
    CHECK_THROWS_AS(evaluate(model, {}), ConfigError);
    std::vector<WindowSample> flipped = {windows[0]};
    flipped[0].label.task = Task::Regression;
    CHECK_THROWS_AS(evaluate(model, flipped), ConfigError);
}

TEST_CASE("an absurd learning rate diverges loudly") {
    TrainConfig cfg = quick_config();
    cfg.lr = 1e18;
    cfg.batch = 4;
    cfg.max_epochs = 30;
    std::ostringstream log;
    CHECK_THROWS_AS(train(cfg, small_manifest(), &log), DataError);

    std::istringstream in(log.str());
    std::string line, last;
    while (std::getline(in, line)) last = line;
    REQUIRE(!last.empty());
    const json j = json::parse(last);
    CHECK(j.at("event").get<std::string>() == "diverged");
    CHECK(j.at("epoch").get<std::size_t>() >= 1);
}
