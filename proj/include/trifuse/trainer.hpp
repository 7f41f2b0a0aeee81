#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "trifuse/model.hpp"

namespace trifuse {

/// AdamW with decoupled weight decay:
///   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
class AdamW {
public:
    struct Config {
        double lr = 3e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.01;
    };

    explicit AdamW(Config cfg);

    /// Consumes params[i]->grad() (zero if never materialized) and updates
    /// params[i]->value in place. Parameter identity and order must not
    /// change across calls.
    void step(std::span<ad::Node* const> params);

    std::size_t steps() const { return t_; }

private:
    Config cfg_;
    std::size_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

struct TrainConfig {
    Task task = Task::Classification;
    double lr = 3e-4;
    std::size_t batch = 8;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    std::size_t patience = 10;
    std::size_t max_epochs = 50;
    std::uint64_t seed = 1;
    double sigma = 0.01;  // train-time feature noise
    double mask_p = 0.1;  // train-time timestep masking
    bool autoencoder = false;
    double lambda = 0.1;  // recon weight, used only with autoencoder
    std::size_t d_h = 32;
    KvMode kv = KvMode::Sequence;
    FusionMode fusion = FusionMode::Cross;
    bool use_video = true;
    bool use_image = true;
    bool use_text = true;
    int val_fold = 1;

    // lr = 0 is allowed: it freezes the parameters, which the early-stopping
    // contract is tested against.
    void validate() const;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
    static TrainConfig load(const std::filesystem::path& path);

    ModelConfig model_config(std::size_t d_v, std::size_t d_i, std::size_t d_t) const;
};

/// Best-epoch weights plus everything needed to rebuild and rescore them.
struct Checkpoint {
    TrainConfig config;
    std::size_t d_v = 0, d_i = 0, d_t = 0;
    std::size_t epoch = 0;   // epoch the weights come from
    double best = 0.0;       // its validation score
    std::vector<std::pair<std::string, Tensor>> tensors;

    Model build_model() const;
};

// Container: "TFCK" | u32 version | u64 index length | index JSON |
// per-tensor float64 blocks. The index maps tensor names to absolute file
// offsets and embeds config/epoch/best. Byte-identical for identical inputs.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochStat {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_metric = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochStat> log;
    std::string metric;  // "f1" or "ccc"
};

/// Trains on every fold except config.val_fold, validates on it after each
/// epoch, stops when the metric fails to improve for `patience` epochs.
/// Writes one JSON line per epoch to `epoch_log` when given.
TrainResult train(const TrainConfig& cfg, const Manifest& manifest,
                  std::ostream* epoch_log = nullptr);

struct EvalReport {
    std::string metric;
    double score = 0.0;
    std::size_t n_windows = 0;

    nlohmann::json to_json() const;
};

/// Scores a window split; parameters are not touched.
EvalReport evaluate(Model& model, const std::vector<WindowSample>& split);

/// Rebuilds the checkpointed model and scores fold `fold` of the manifest.
EvalReport evaluate(const Checkpoint& ckpt, const Manifest& manifest, int fold);

}  // namespace trifuse
