#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trifuse/dataset.hpp"
#include "trifuse/fusion.hpp"
#include "trifuse/graph.hpp"
#include "trifuse/gru.hpp"
#include "trifuse/heads.hpp"

namespace trifuse {

/// Cross is the two-stage cross-attention architecture; Concat is the naive
/// baseline that feeds the three final encoder states straight to the head.
enum class FusionMode { Cross, Concat };

FusionMode fusion_mode_from_name(const std::string& name);
std::string fusion_mode_name(FusionMode m);

struct ModelConfig {
    Task task = Task::Classification;
    std::size_t d_v = 16;
    std::size_t d_i = 16;
    std::size_t d_t = 12;
    std::size_t d_h = 32;
    KvMode kv = KvMode::Sequence;
    FusionMode fusion = FusionMode::Cross;
    // Ablations keep the parameters but replace the stream's encodings with
    // zeros, so variant comparisons hold parameter counts fixed.
    bool use_video = true;
    bool use_image = true;
    bool use_text = true;
    bool autoencoder = false;

    std::size_t out_dim() const { return task == Task::Classification ? 1 : 2; }
    std::size_t fused_dim() const { return (fusion == FusionMode::Cross ? 2 : 3) * d_h; }
};

/// Owns every parameter as leaves on a long-lived tape; per-batch graphs are
/// built on caller tapes pointing back at those leaves.
class Model {
public:
    Model(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    const std::vector<std::pair<std::string, ad::Node*>>& named_params() const {
        return named_;
    }
    const std::vector<ad::Node*>& params() const { return flat_; }
    std::size_t param_count() const;

    struct Forward {
        ad::Node* out;     // [B x out_dim], raw
        ad::Node* fused;   // [B x fused_dim]
        ad::Node* finals;  // [B x 3*d_h], concatenated final states
    };

    Forward forward(ad::Tape& tape, const std::vector<const WindowSample*>& batch);

    /// total_loss over the batch: focal (classification) or MSE (regression)
    /// plus lambda * reconstruction when the autoencoder is enabled.
    ad::Node* loss(ad::Tape& tape, const std::vector<const WindowSample*>& batch,
                   double lambda);

    /// Overwrites a named parameter's value, shape-checked.
    void set_param(const std::string& name, const Tensor& value);

private:
    ModelConfig cfg_;
    ad::Tape param_tape_;
    GruParams enc_v_, enc_i_, enc_t_;
    FusionParams fus_;
    HeadParams head_;
    DecoderParams dec_;
    std::vector<std::pair<std::string, ad::Node*>> named_;
    std::vector<ad::Node*> flat_;
};

}  // namespace trifuse
