#pragma once

#include <vector>

#include "trifuse/common.hpp"
#include "trifuse/graph.hpp"

namespace trifuse {

/// Single-layer GRU, row-vector convention (x is [B x d_in], states are
/// [B x d_h]):
///   r  = sigmoid(x Wr + h Ur + br)
///   z  = sigmoid(x Wz + h Uz + bz)
///   hc = tanh(x Wh + (r*h) Uh + bh)
///   h' = (1-z)*h + z*hc
/// Parameters are leaves on a long-lived tape so per-step graphs can point
/// at them across rebuilds.
struct GruParams {
    ad::Node* wr = nullptr;  // [d_in x d_h]
    ad::Node* wz = nullptr;
    ad::Node* wh = nullptr;
    ad::Node* ur = nullptr;  // [d_h x d_h]
    ad::Node* uz = nullptr;
    ad::Node* uh = nullptr;
    ad::Node* br = nullptr;  // [1 x d_h]
    ad::Node* bz = nullptr;
    ad::Node* bh = nullptr;

    /// Weights U(-1/sqrt(d_h), 1/sqrt(d_h)), biases 0.
    static GruParams init(ad::Tape& params, std::size_t d_in, std::size_t d_h, Rng& rng);

    std::size_t d_in() const { return wr->value.rows(); }
    std::size_t d_h() const { return wr->value.cols(); }
};

/// Unrolls the GRU over xs[0..T-1], each [B x d_in] with one shared B.
/// h0 defaults to zeros (the encoders always start there). Returns every
/// hidden state, hs[t] being [B x d_h].
std::vector<ad::Node*> gru_forward(ad::Tape& tape, const GruParams& g,
                                   const std::vector<ad::Node*>& xs,
                                   ad::Node* h0 = nullptr);

}  // namespace trifuse
