#pragma once

#include <vector>

#include "trifuse/common.hpp"
#include "trifuse/graph.hpp"

namespace trifuse {

/// One-hidden-layer MLP on the fused embedding:
///   out = relu(fused W1 + b1) W2 + b2
/// out has 1 column (classification logit) or 2 (valence, arousal), raw in
/// both cases.
struct HeadParams {
    ad::Node* w1 = nullptr;  // [in x hidden]
    ad::Node* b1 = nullptr;  // [1 x hidden]
    ad::Node* w2 = nullptr;  // [hidden x out]
    ad::Node* b2 = nullptr;  // [1 x out]

    static HeadParams init(ad::Tape& params, std::size_t in, std::size_t hidden,
                           std::size_t out, Rng& rng);
    std::size_t out_dim() const { return w2->value.cols(); }
};

ad::Node* head_forward(ad::Tape& tape, const HeadParams& p, ad::Node* fused);

/// Linear decoder for the autoencoding regularizer: reconstructs the
/// concatenated final modality states (3*d_h wide) from the fused embedding.
struct DecoderParams {
    ad::Node* wd = nullptr;  // [in x out]
    ad::Node* bd = nullptr;  // [1 x out]

    static DecoderParams init(ad::Tape& params, std::size_t in, std::size_t out, Rng& rng);
};

/// Mean over the batch of
///   -alpha*y*(1-p)^gamma*ln p - (1-alpha)*(1-y)*p^gamma*ln(1-p),  p = sigmoid(logit)
/// with the ln argument clamped at 1e-12. logits is [B x 1]; y holds B
/// entries in {0,1}.
ad::Node* focal_loss(ad::Tape& tape, ad::Node* logits, const std::vector<int>& y,
                     double alpha = 0.25, double gamma = 2.0);

/// Mean of squared differences over all entries; shapes must match.
ad::Node* mse_loss(ad::Tape& tape, ad::Node* pred, ad::Node* target);

/// mse(fused Wd + bd, finals); finals stays in the graph, so the regularizer
/// shapes the encoders too.
ad::Node* recon_loss(ad::Tape& tape, const DecoderParams& d, ad::Node* fused,
                     ad::Node* finals);

/// task + lambda * recon. recon may be null when the regularizer is off.
ad::Node* total_loss(ad::Tape& tape, ad::Node* task, ad::Node* recon, double lambda);

}  // namespace trifuse
