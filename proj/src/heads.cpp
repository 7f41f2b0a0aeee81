#include "trifuse/heads.hpp"

#include <cmath>

namespace trifuse {

using ad::Node;
using ad::Tape;

namespace {

Tensor uniform_matrix(std::size_t r, std::size_t c, double bound, Rng& rng) {
    std::vector<double> v(r * c);
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Tensor({r, c}, std::move(v));
}

Node* affine(Tape& tape, Node* x, Node* w, Node* b) {
    Node* y = ad::matmul(tape, x, w);
    Node* bt = ad::repeat_rows(tape, b, x->value.rows());
    return ad::add(tape, y, bt);
}

}  // namespace

HeadParams HeadParams::init(Tape& params, std::size_t in, std::size_t hidden,
                            std::size_t out, Rng& rng) {
    if (in == 0 || hidden == 0) throw ContractError("head: dims must be positive");
    if (out != 1 && out != 2) throw ContractError("head: out must be 1 or 2");
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    HeadParams p;
    p.w1 = params.leaf(uniform_matrix(in, hidden, bound, rng));
    p.b1 = params.leaf(Tensor::zeros({1, hidden}));
    p.w2 = params.leaf(uniform_matrix(hidden, out, bound, rng));
    p.b2 = params.leaf(Tensor::zeros({1, out}));
    return p;
}

Node* head_forward(Tape& tape, const HeadParams& p, Node* fused) {
    if (fused->value.rank() != 2 || fused->value.cols() != p.w1->value.rows())
        throw ContractError("head_forward: fused must be [B x 2*d_h]");
    Node* hidden = ad::relu(tape, affine(tape, fused, p.w1, p.b1));
    return affine(tape, hidden, p.w2, p.b2);
}

DecoderParams DecoderParams::init(Tape& params, std::size_t in, std::size_t out, Rng& rng) {
    if (in == 0 || out == 0) throw ContractError("decoder: dims must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DecoderParams p;
    p.wd = params.leaf(uniform_matrix(in, out, bound, rng));
    p.bd = params.leaf(Tensor::zeros({1, out}));
    return p;
}

Node* focal_loss(Tape& tape, Node* logits, const std::vector<int>& y, double alpha,
                 double gamma) {
    const std::size_t batch = logits->value.numel();
    if (logits->value.rank() != 2 || logits->value.cols() != 1)
        throw ContractError("focal_loss: logits must be [B x 1]");
    if (y.size() != batch) throw ContractError("focal_loss: label count mismatch");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("focal_loss: alpha not in (0,1)");
    if (gamma < 0.0) throw ContractError("focal_loss: gamma must be >= 0");

    std::vector<double> pos(batch), neg(batch), one(batch, 1.0);
    for (std::size_t i = 0; i < batch; ++i) {
        if (y[i] != 0 && y[i] != 1) throw ContractError("focal_loss: labels must be 0/1");
        pos[i] = y[i];
        neg[i] = 1 - y[i];
    }
    const std::vector<std::size_t> shape = {batch, 1};
    Node* y_pos = tape.leaf(Tensor(shape, std::move(pos)));
    Node* y_neg = tape.leaf(Tensor(shape, std::move(neg)));
    Node* ones = tape.leaf(Tensor(shape, std::move(one)));

    Node* p = ad::sigmoid(tape, logits);
    Node* q = ad::add(tape, ones, ad::scale(tape, p, -1.0));  // 1 - p
    Node* pos_term = ad::mul(tape, y_pos,
                             ad::mul(tape, ad::pow_const(tape, q, gamma),
                                     ad::log_clamped(tape, p)));
    Node* neg_term = ad::mul(tape, y_neg,
                             ad::mul(tape, ad::pow_const(tape, p, gamma),
                                     ad::log_clamped(tape, q)));
    Node* sum = ad::add(tape, ad::scale(tape, pos_term, -alpha),
                        ad::scale(tape, neg_term, -(1.0 - alpha)));
    return ad::scale(tape, ad::sum_all(tape, sum), 1.0 / static_cast<double>(batch));
}

Node* mse_loss(Tape& tape, Node* pred, Node* target) {
    if (!pred->value.same_shape(target->value))
        throw ContractError("mse_loss: shape mismatch " + pred->value.shape_str() +
                            " vs " + target->value.shape_str());
    Node* diff = ad::add(tape, pred, ad::scale(tape, target, -1.0));
    Node* sq = ad::mul(tape, diff, diff);
    return ad::scale(tape, ad::sum_all(tape, sq),
                     1.0 / static_cast<double>(pred->value.numel()));
}

Node* recon_loss(Tape& tape, const DecoderParams& d, Node* fused, Node* finals) {
    if (fused->value.rank() != 2 || fused->value.cols() != d.wd->value.rows())
        throw ContractError("recon_loss: fused width does not match the decoder");
    Node* rec = affine(tape, fused, d.wd, d.bd);
    return mse_loss(tape, rec, finals);
}

Node* total_loss(Tape& tape, Node* task, Node* recon, double lambda) {
    if (lambda < 0.0) throw ContractError("total_loss: lambda must be >= 0");
    if (recon == nullptr || lambda == 0.0) return task;
    return ad::add(tape, task, ad::scale(tape, recon, lambda));
}

}  // namespace trifuse
