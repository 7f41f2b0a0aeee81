#include "trifuse/gru.hpp"

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

}  // namespace

GruParams GruParams::init(Tape& params, std::size_t d_in, std::size_t d_h, Rng& rng) {
    if (d_in == 0 || d_h == 0) throw ContractError("gru: dims must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_h));
    GruParams p;
    p.wr = params.leaf(uniform_matrix(d_in, d_h, bound, rng));
    p.wz = params.leaf(uniform_matrix(d_in, d_h, bound, rng));
    p.wh = params.leaf(uniform_matrix(d_in, d_h, bound, rng));
    p.ur = params.leaf(uniform_matrix(d_h, d_h, bound, rng));
    p.uz = params.leaf(uniform_matrix(d_h, d_h, bound, rng));
    p.uh = params.leaf(uniform_matrix(d_h, d_h, bound, rng));
    p.br = params.leaf(Tensor::zeros({1, d_h}));
    p.bz = params.leaf(Tensor::zeros({1, d_h}));
    p.bh = params.leaf(Tensor::zeros({1, d_h}));
    return p;
}

std::vector<Node*> gru_forward(Tape& tape, const GruParams& g,
                               const std::vector<Node*>& xs, Node* h0) {
    if (xs.empty()) throw ContractError("gru_forward: empty input sequence");
    const std::size_t batch = xs.front()->value.rows();
    const std::size_t d_in = xs.front()->value.cols();
    if (d_in != g.wr->value.rows())
        throw ContractError("gru_forward: input dim does not match Wr");
    for (const Node* x : xs)
        if (x->value.rows() != batch || x->value.cols() != d_in)
            throw ContractError("gru_forward: ragged input batch");
    const std::size_t d_h = g.wr->value.cols();
    if (h0 && (h0->value.rows() != batch || h0->value.cols() != d_h))
        throw ContractError("gru_forward: h0 must be batch x d_h");

    Node* br = ad::repeat_rows(tape, g.br, batch);
    Node* bz = ad::repeat_rows(tape, g.bz, batch);
    Node* bh = ad::repeat_rows(tape, g.bh, batch);
    Node* ones =
        tape.leaf(Tensor({batch, d_h}, std::vector<double>(batch * d_h, 1.0)));
    Node* h = h0 ? h0 : tape.leaf(Tensor::zeros({batch, d_h}));

    std::vector<Node*> hs;
    hs.reserve(xs.size());
    for (Node* x : xs) {
        Node* r = ad::sigmoid(
            tape, ad::add(tape,
                          ad::add(tape, ad::matmul(tape, x, g.wr),
                                  ad::matmul(tape, h, g.ur)),
                          br));
        Node* z = ad::sigmoid(
            tape, ad::add(tape,
                          ad::add(tape, ad::matmul(tape, x, g.wz),
                                  ad::matmul(tape, h, g.uz)),
                          bz));
        Node* hc = ad::tanh(
            tape, ad::add(tape,
                          ad::add(tape, ad::matmul(tape, x, g.wh),
                                  ad::matmul(tape, ad::mul(tape, r, h), g.uh)),
                          bh));
        Node* keep = ad::mul(tape, ad::add(tape, ones, ad::scale(tape, z, -1.0)), h);
        h = ad::add(tape, keep, ad::mul(tape, z, hc));
        hs.push_back(h);
    }
    return hs;
}

}  // namespace trifuse
