#pragma once

#include <vector>

#include "trifuse/common.hpp"
#include "trifuse/graph.hpp"

namespace trifuse {

/// Scaled dot-product cross-attention projections, all [d_h x d_h].
struct AttentionParams {
    ad::Node* wq = nullptr;
    ad::Node* wk = nullptr;
    ad::Node* wv = nullptr;

    static AttentionParams init(ad::Tape& params, std::size_t d_h, Rng& rng);
};

struct AttentionOut {
    ad::Node* context;  // [1 x d_h]
    ad::Node* weights;  // [1 x T], the softmaxed scores
};

/// q [1 x d_h] attends over kv [T x d_h]:
///   w = softmax((q Wq)(kv Wk)^T / sqrt(d_h)),  context = w (kv Wv)
AttentionOut attend(ad::Tape& tape, const AttentionParams& p, ad::Node* q,
                    ad::Node* kv);

/// What the keys/values range over: the encoder's full hidden sequence or
/// just its final state.
enum class KvMode { Sequence, Final };

KvMode kv_mode_from_name(const std::string& name);
std::string kv_mode_name(KvMode m);

/// Two-stage fusion: the image encoder's final state queries the video
/// stream, then the text stream, and the two contexts are concatenated.
struct FusionParams {
    AttentionParams iv;  // image -> video
    AttentionParams it;  // image -> text

    static FusionParams init(ad::Tape& params, std::size_t d_h, Rng& rng);
};

/// Batched fusion. image_final is [B x d_h]; video_hs / text_hs are the
/// per-timestep [B x d_h] stacks from gru_forward. Returns [B x 2*d_h].
ad::Node* fuse(ad::Tape& tape, const FusionParams& p, ad::Node* image_final,
               const std::vector<ad::Node*>& video_hs,
               const std::vector<ad::Node*>& text_hs, KvMode kv);

}  // namespace trifuse
