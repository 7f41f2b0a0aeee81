#include "trifuse/fusion.hpp"

#include <cmath>

namespace trifuse {

using ad::Node;
using ad::Tape;

namespace {

Tensor uniform_matrix(std::size_t n, double bound, Rng& rng) {
    std::vector<double> v(n * n);
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Tensor({n, n}, std::move(v));
}

// Per-sample KV matrix: row t is hs[t] row i. Final mode keeps only the
// last state, so attention degenerates to a learned projection of it.
Node* sample_kv(Tape& tape, const std::vector<Node*>& hs, std::size_t i, KvMode kv) {
    if (kv == KvMode::Final) return ad::select_row(tape, hs.back(), i);
    std::vector<Node*> rows;
    rows.reserve(hs.size());
    for (Node* h : hs) rows.push_back(ad::select_row(tape, h, i));
    return ad::concat_rows(tape, rows);
}

}  // namespace

AttentionParams AttentionParams::init(Tape& params, std::size_t d_h, Rng& rng) {
    if (d_h == 0) throw ContractError("attention: d_h must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_h));
    AttentionParams p;
    p.wq = params.leaf(uniform_matrix(d_h, bound, rng));
    p.wk = params.leaf(uniform_matrix(d_h, bound, rng));
    p.wv = params.leaf(uniform_matrix(d_h, bound, rng));
    return p;
}

AttentionOut attend(Tape& tape, const AttentionParams& p, Node* q, Node* kv) {
    const std::size_t d_h = p.wq->value.rows();
    if (q->value.rank() != 2 || q->value.rows() != 1 || q->value.cols() != d_h)
        throw ContractError("attend: q must be [1 x d_h]");
    if (kv->value.rank() != 2 || kv->value.cols() != d_h)
        throw ContractError("attend: kv must be [T x d_h]");

    Node* qp = ad::matmul(tape, q, p.wq);   // [1 x d_h]
    Node* kp = ad::matmul(tape, kv, p.wk);  // [T x d_h]
    Node* vp = ad::matmul(tape, kv, p.wv);  // [T x d_h]
    Node* scores = ad::scale(tape, ad::matmul(tape, qp, ad::transpose(tape, kp)),
                             1.0 / std::sqrt(static_cast<double>(d_h)));
    Node* w = ad::softmax_rows(tape, scores);  // [1 x T]
    return AttentionOut{ad::matmul(tape, w, vp), w};
}

KvMode kv_mode_from_name(const std::string& name) {
    if (name == "sequence") return KvMode::Sequence;
    if (name == "final") return KvMode::Final;
    throw ConfigError("attention.kv must be \"sequence\" or \"final\", got \"" + name + "\"");
}

std::string kv_mode_name(KvMode m) {
    return m == KvMode::Sequence ? "sequence" : "final";
}

FusionParams FusionParams::init(Tape& params, std::size_t d_h, Rng& rng) {
    FusionParams p;
    p.iv = AttentionParams::init(params, d_h, rng);
    p.it = AttentionParams::init(params, d_h, rng);
    return p;
}

Node* fuse(Tape& tape, const FusionParams& p, Node* image_final,
           const std::vector<Node*>& video_hs, const std::vector<Node*>& text_hs,
           KvMode kv) {
    if (video_hs.empty() || text_hs.empty())
        throw ContractError("fuse: empty encoder sequence");
    const std::size_t batch = image_final->value.rows();

    std::vector<Node*> fused_rows;
    fused_rows.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        Node* q = ad::select_row(tape, image_final, i);
        Node* ziv = attend(tape, p.iv, q, sample_kv(tape, video_hs, i, kv)).context;
        Node* zit = attend(tape, p.it, q, sample_kv(tape, text_hs, i, kv)).context;
        fused_rows.push_back(ad::concat_cols(tape, {ziv, zit}));  // [1 x 2*d_h]
    }
    return batch == 1 ? fused_rows.front() : ad::concat_rows(tape, fused_rows);
}

}  // namespace trifuse
