#pragma once

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "trifuse/tensor.hpp"

namespace trifuse::ad {

struct Node;
using BackwardFn = std::function<void(Node&)>;

/// One vertex of the computation graph: a value, its gradient buffer, links
/// to the inputs it was computed from, and the rule that pushes its gradient
/// into those inputs. The graph is a DAG; gradients accumulate additively
/// across fan-out and are zeroed explicitly between optimization steps.
struct Node {
    Tensor value;
    std::vector<Node*> parents;
    BackwardFn backward_rule;  // empty for leaves

    // The gradient buffer is materialized on first access so forward-only
    // evaluations (finite differences) skip the allocation.
    Tensor& grad();
    const Tensor& grad() const;
    bool has_grad() const { return !grad_.empty(); }
    void zero_grad();

private:
    friend class Tape;
    mutable Tensor grad_;
};

/// Arena that owns graph nodes. Parents are raw pointers, so a node may refer
/// to nodes of an older, longer-lived tape (model parameters) but never the
/// reverse. Single-threaded per instance.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    // Moving is safe: deque elements stay put, so Node* links keep working.
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    Node* leaf(Tensor value);
    Node* make(Tensor value, std::vector<Node*> parents, BackwardFn rule);

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    std::deque<Node> nodes_;
};

// Elementwise; operands must have identical shapes (no broadcasting).
Node* add(Tape& t, Node* a, Node* b);
Node* mul(Tape& t, Node* a, Node* b);
Node* scale(Tape& t, Node* a, double c);
Node* sigmoid(Tape& t, Node* a);
Node* tanh(Tape& t, Node* a);
Node* relu(Tape& t, Node* a);
// ln(max(x, 1e-12)); gradient is 0 where the clamp is active.
Node* log_clamped(Tape& t, Node* a);
// x^p for constant p; gradient p*x^(p-1). Callers keep x in the domain where
// that is finite.
Node* pow_const(Tape& t, Node* a, double p);

// a [m x k] * b [k x n] -> [m x n].
Node* matmul(Tape& t, Node* a, Node* b);
Node* transpose(Tape& t, Node* a);

// Row-wise softmax with max subtraction; accepts a vector (one row) or a
// matrix. Every output row is a probability vector.
Node* softmax_rows(Tape& t, Node* a);

// Concatenation. Rank-1 parts join end to end; rank-2 parts stack rows
// (equal column counts) or columns (equal row counts).
Node* concat_rows(Tape& t, std::span<Node* const> parts);
Node* concat_cols(Tape& t, std::span<Node* const> parts);
inline Node* concat_rows(Tape& t, std::initializer_list<Node*> parts) {
    return concat_rows(t, std::span<Node* const>(parts.begin(), parts.size()));
}
inline Node* concat_cols(Tape& t, std::initializer_list<Node*> parts) {
    return concat_cols(t, std::span<Node* const>(parts.begin(), parts.size()));
}

// Row i of a matrix as a [1 x n] node.
Node* select_row(Tape& t, Node* a, std::size_t i);
// Tile a [1 x n] row m times -> [m x n]; gradient sums over the tiled rows.
Node* repeat_rows(Tape& t, Node* a, std::size_t m);

// Sum of all entries -> shape [1].
Node* sum_all(Tape& t, Node* a);

/// Reverse topological sweep from a scalar loss. Populates grad on every
/// reachable node; contributions accumulate additively.
void backward(Node* loss);

void zero_grads(std::span<Node* const> nodes);

/// Central-difference audit of the analytic gradient. `build` reconstructs
/// the scalar loss from the current values of `params`; returns the max over
/// all parameter entries of |analytic - fd| / max(1, |analytic|).
double grad_check(const std::function<Node*(Tape&)>& build,
                  std::span<Node* const> params, double eps);

}  // namespace trifuse::ad
