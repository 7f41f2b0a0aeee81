#include "trifuse/graph.hpp"

#include <cmath>
#include <unordered_set>

#include "trifuse/kernels.hpp"

namespace trifuse::ad {

namespace {

void require_same_shape(const Node* a, const Node* b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw ContractError(std::string(op) + ": shape mismatch " + a->value.shape_str() +
                            " vs " + b->value.shape_str());
}

std::vector<double> buffer(std::size_t n) { return std::vector<double>(n); }

}  // namespace

Tensor& Node::grad() {
    if (grad_.empty()) grad_ = Tensor(value.shape());
    return grad_;
}

const Tensor& Node::grad() const {
    if (grad_.empty()) grad_ = Tensor(value.shape());
    return grad_;
}

void Node::zero_grad() {
    if (grad_.empty()) {
        grad_ = Tensor(value.shape());
    } else {
        grad_.fill(0.0);
    }
}

Node* Tape::leaf(Tensor value) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(value);
    return &n;
}

Node* Tape::make(Tensor value, std::vector<Node*> parents, BackwardFn rule) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.backward_rule = std::move(rule);
    return &n;
}

// ---- elementwise -----------------------------------------------------------

Node* add(Tape& t, Node* a, Node* b) {
    require_same_shape(a, b, "add");
    const std::size_t n = a->value.numel();
    auto out = buffer(n);
    kern::map_binary(kern::Binary::Add, a->value.data(), b->value.data(), out.data(), n);
    return t.make(Tensor(a->value.shape(), std::move(out)), {a, b}, [](Node& self) {
        const std::size_t m = self.value.numel();
        kern::axpy(1.0, self.grad().data(), self.parents[0]->grad().data(), m);
        kern::axpy(1.0, self.grad().data(), self.parents[1]->grad().data(), m);
    });
}

Node* mul(Tape& t, Node* a, Node* b) {
    require_same_shape(a, b, "mul");
    const std::size_t n = a->value.numel();
    auto out = buffer(n);
    kern::map_binary(kern::Binary::Mul, a->value.data(), b->value.data(), out.data(), n);
    return t.make(Tensor(a->value.shape(), std::move(out)), {a, b}, [](Node& self) {
        const std::size_t m = self.value.numel();
        const double* g = self.grad().data();
        Node* pa = self.parents[0];
        Node* pb = self.parents[1];
        double* da = pa->grad().data();
        double* db = pb->grad().data();
        const double* av = pa->value.data();
        const double* bv = pb->value.data();
        for (std::size_t i = 0; i < m; ++i) {
            da[i] += g[i] * bv[i];
            db[i] += g[i] * av[i];
        }
    });
}

Node* scale(Tape& t, Node* a, double c) {
    const std::size_t n = a->value.numel();
    auto out = buffer(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = c * a->value[i];
    return t.make(Tensor(a->value.shape(), std::move(out)), {a}, [c](Node& self) {
        kern::axpy(c, self.grad().data(), self.parents[0]->grad().data(), self.value.numel());
    });
}

Node* sigmoid(Tape& t, Node* a) {
    const std::size_t n = a->value.numel();
    auto out = buffer(n);
    kern::map_unary(kern::Unary::Sigmoid, a->value.data(), out.data(), n);
    return t.make(Tensor(a->value.shape(), std::move(out)), {a}, [](Node& self) {
        const std::size_t m = self.value.numel();
        const double* g = self.grad().data();
        const double* y = self.value.data();
        double* da = self.parents[0]->grad().data();
        for (std::size_t i = 0; i < m; ++i) da[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Node* tanh(Tape& t, Node* a) {
    const std::size_t n = a->value.numel();
    auto out = buffer(n);
    kern::map_unary(kern::Unary::Tanh, a->value.data(), out.data(), n);
    return t.make(Tensor(a->value.shape(), std::move(out)), {a}, [](Node& self) {
        const std::size_t m = self.value.numel();
        const double* g = self.grad().data();
        const double* y = self.value.data();
        double* da = self.parents[0]->grad().data();
        for (std::size_t i = 0; i < m; ++i) da[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

Node* relu(Tape& t, Node* a) {
    const std::size_t n = a->value.numel();
    auto out = buffer(n);
    kern::map_unary(kern::Unary::Relu, a->value.data(), out.data(), n);
    return t.make(Tensor(a->value.shape(), std::move(out)), {a}, [](Node& self) {
        const std::size_t m = self.value.numel();
        const double* g = self.grad().data();
        const double* x = self.parents[0]->value.data();
        double* da = self.parents[0]->grad().data();
        for (std::size_t i = 0; i < m; ++i)
            if (x[i] > 0.0) da[i] += g[i];
    });
}

Node* log_clamped(Tape& t, Node* a) {
    const std::size_t n = a->value.numel();
    auto out = buffer(n);
    kern::map_unary(kern::Unary::LogClamped, a->value.data(), out.data(), n);
    return t.make(Tensor(a->value.shape(), std::move(out)), {a}, [](Node& self) {
        const std::size_t m = self.value.numel();
        const double* g = self.grad().data();
        const double* x = self.parents[0]->value.data();
        double* da = self.parents[0]->grad().data();
        for (std::size_t i = 0; i < m; ++i)
            if (x[i] > kern::kLogClampFloor) da[i] += g[i] / x[i];
    });
}

Node* pow_const(Tape& t, Node* a, double p) {
    const std::size_t n = a->value.numel();
    auto out = buffer(n);
    kern::pow_const(a->value.data(), p, out.data(), n);
    return t.make(Tensor(a->value.shape(), std::move(out)), {a}, [p](Node& self) {
        if (p == 0.0) return;  // constant 1, and 0 * pow(x,-1) would NaN at x=0
        const std::size_t m = self.value.numel();
        const double* g = self.grad().data();
        const double* x = self.parents[0]->value.data();
        double* da = self.parents[0]->grad().data();
        for (std::size_t i = 0; i < m; ++i) da[i] += g[i] * p * std::pow(x[i], p - 1.0);
    });
}

// ---- matmul family ---------------------------------------------------------

Node* matmul(Tape& t, Node* a, Node* b) {
    if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.cols() != b->value.rows())
        throw ContractError("matmul: incompatible shapes " + a->value.shape_str() + " vs " +
                            b->value.shape_str());
    const std::size_t m = a->value.rows(), k = a->value.cols(), n = b->value.cols();
    auto out = buffer(m * n);
    kern::gemm_nn(a->value.data(), b->value.data(), out.data(), m, k, n, false);
    return t.make(Tensor({m, n}, std::move(out)), {a, b}, [m, k, n](Node& self) {
        Node* pa = self.parents[0];
        Node* pb = self.parents[1];
        const double* g = self.grad().data();
        // dA += G * B^T, dB += A^T * G
        kern::gemm_nt(g, pb->value.data(), pa->grad().data(), m, n, k, true);
        kern::gemm_tn(pa->value.data(), g, pb->grad().data(), k, m, n, true);
    });
}

Node* transpose(Tape& t, Node* a) {
    if (a->value.rank() != 2)
        throw ContractError("transpose: need rank-2 tensor, got " + a->value.shape_str());
    const std::size_t m = a->value.rows(), n = a->value.cols();
    auto out = buffer(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a->value[i * n + j];
    return t.make(Tensor({n, m}, std::move(out)), {a}, [m, n](Node& self) {
        const double* g = self.grad().data();  // [n x m]
        double* da = self.parents[0]->grad().data();
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < m; ++i) da[i * n + j] += g[j * m + i];
    });
}

// ---- softmax ---------------------------------------------------------------

Node* softmax_rows(Tape& t, Node* a) {
    std::size_t m, n;
    if (a->value.rank() == 1) {
        m = 1;
        n = a->value.shape()[0];
    } else if (a->value.rank() == 2) {
        m = a->value.rows();
        n = a->value.cols();
    } else {
        throw ContractError("softmax_rows: need rank-1 or rank-2, got " + a->value.shape_str());
    }
    auto out = buffer(m * n);
    kern::softmax_rows(a->value.data(), out.data(), m, n);
    return t.make(Tensor(a->value.shape(), std::move(out)), {a}, [m, n](Node& self) {
        const double* g = self.grad().data();
        const double* y = self.value.data();
        double* da = self.parents[0]->grad().data();
        for (std::size_t i = 0; i < m; ++i) {
            const double* gr = g + i * n;
            const double* yr = y + i * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
            for (std::size_t j = 0; j < n; ++j) da[i * n + j] += yr[j] * (gr[j] - dot);
        }
    });
}

// ---- concatenation ---------------------------------------------------------

Node* concat_rows(Tape& t, std::span<Node* const> parts) {
    if (parts.empty()) throw ContractError("concat_rows: no parts");
    const std::size_t rank = parts[0]->value.rank();
    if (rank == 1) {
        std::size_t total = 0;
        for (Node* p : parts) {
            if (p->value.rank() != 1)
                throw ContractError("concat_rows: mixed ranks, " + parts[0]->value.shape_str() +
                                    " vs " + p->value.shape_str());
            total += p->value.numel();
        }
        auto out = buffer(total);
        std::size_t off = 0;
        for (Node* p : parts) {
            for (std::size_t i = 0; i < p->value.numel(); ++i) out[off + i] = p->value[i];
            off += p->value.numel();
        }
        std::vector<Node*> parents(parts.begin(), parts.end());
        return t.make(Tensor({total}, std::move(out)), std::move(parents), [](Node& self) {
            const double* g = self.grad().data();
            std::size_t off = 0;
            for (Node* p : self.parents) {
                kern::axpy(1.0, g + off, p->grad().data(), p->value.numel());
                off += p->value.numel();
            }
        });
    }
    const std::size_t cols = parts[0]->value.cols();
    std::size_t rows = 0;
    for (Node* p : parts) {
        if (p->value.rank() != 2 || p->value.cols() != cols)
            throw ContractError("concat_rows: column mismatch " + parts[0]->value.shape_str() +
                                " vs " + p->value.shape_str());
        rows += p->value.rows();
    }
    auto out = buffer(rows * cols);
    std::size_t off = 0;
    for (Node* p : parts) {
        const std::size_t n = p->value.numel();
        for (std::size_t i = 0; i < n; ++i) out[off + i] = p->value[i];
        off += n;
    }
    std::vector<Node*> parents(parts.begin(), parts.end());
    return t.make(Tensor({rows, cols}, std::move(out)), std::move(parents), [](Node& self) {
        const double* g = self.grad().data();
        std::size_t off = 0;
        for (Node* p : self.parents) {
            kern::axpy(1.0, g + off, p->grad().data(), p->value.numel());
            off += p->value.numel();
        }
    });
}

Node* concat_cols(Tape& t, std::span<Node* const> parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts");
    const std::size_t rows = parts[0]->value.rank() == 2 ? parts[0]->value.rows() : 0;
    std::size_t cols = 0;
    for (Node* p : parts) {
        if (p->value.rank() != 2 || p->value.rows() != rows)
            throw ContractError("concat_cols: row mismatch " + parts[0]->value.shape_str() +
                                " vs " + p->value.shape_str());
        cols += p->value.cols();
    }
    auto out = buffer(rows * cols);
    std::size_t col_off = 0;
    for (Node* p : parts) {
        const std::size_t pc = p->value.cols();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pc; ++c) out[r * cols + col_off + c] = p->value[r * pc + c];
        col_off += pc;
    }
    std::vector<Node*> parents(parts.begin(), parts.end());
    return t.make(Tensor({rows, cols}, std::move(out)), std::move(parents), [rows, cols](Node& self) {
        const double* g = self.grad().data();
        std::size_t col_off = 0;
        for (Node* p : self.parents) {
            const std::size_t pc = p->value.cols();
            double* dp = p->grad().data();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < pc; ++c) dp[r * pc + c] += g[r * cols + col_off + c];
            col_off += pc;
        }
    });
}

Node* select_row(Tape& t, Node* a, std::size_t i) {
    if (a->value.rank() != 2)
        throw ContractError("select_row: need rank-2 tensor, got " + a->value.shape_str());
    if (i >= a->value.rows())
        throw ContractError("select_row: row " + std::to_string(i) + " out of range for " +
                            a->value.shape_str());
    const std::size_t n = a->value.cols();
    auto out = buffer(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = a->value[i * n + j];
    return t.make(Tensor({1, n}, std::move(out)), {a}, [i, n](Node& self) {
        kern::axpy(1.0, self.grad().data(), self.parents[0]->grad().data() + i * n, n);
    });
}

Node* repeat_rows(Tape& t, Node* a, std::size_t m) {
    if (a->value.rank() != 2 || a->value.rows() != 1)
        throw ContractError("repeat_rows: need a [1 x n] row, got " + a->value.shape_str());
    const std::size_t n = a->value.cols();
    auto out = buffer(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a->value[j];
    return t.make(Tensor({m, n}, std::move(out)), {a}, [m, n](Node& self) {
        const double* g = self.grad().data();
        double* da = self.parents[0]->grad().data();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) da[j] += g[i * n + j];
    });
}

Node* sum_all(Tape& t, Node* a) {
    const double s = kern::sum(a->value.data(), a->value.numel());
    return t.make(Tensor::scalar(s), {a}, [](Node& self) {
        const double g = self.grad()[0];
        double* da = self.parents[0]->grad().data();
        const std::size_t n = self.parents[0]->value.numel();
        for (std::size_t i = 0; i < n; ++i) da[i] += g;
    });
}

// ---- backward --------------------------------------------------------------

void backward(Node* loss) {
    if (loss == nullptr) throw ContractError("backward: null loss");
    if (loss->value.numel() != 1)
        throw ContractError("backward: loss must be scalar, got shape " + loss->value.shape_str());

    // Iterative post-order DFS; reverse gives a valid topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss, 0);
    visited.insert(loss);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++];
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Materialize gradient buffers for every reachable node, then sweep.
    for (Node* n : order) n->grad();
    loss->grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_rule) (*it)->backward_rule(**it);
    }
}

void zero_grads(std::span<Node* const> nodes) {
    for (Node* n : nodes) n->zero_grad();
}

double grad_check(const std::function<Node*(Tape&)>& build,
                  std::span<Node* const> params, double eps) {
    if (!(eps > 0.0 && eps <= 1e-2))
        throw ContractError("grad_check: eps must be in (0, 1e-2], got " + std::to_string(eps));

    auto eval = [&build]() {
        Tape t;
        Node* out = build(t);
        if (out == nullptr || out->value.numel() != 1)
            throw ContractError("grad_check: builder must produce a scalar");
        return out->value[0];
    };

    // Analytic pass.
    std::vector<Tensor> analytic;
    {
        Tape t;
        Node* loss = build(t);
        if (loss == nullptr || loss->value.numel() != 1)
            throw ContractError("grad_check: builder must produce a scalar");
        zero_grads(params);
        backward(loss);
        analytic.reserve(params.size());
        for (Node* p : params) analytic.push_back(p->grad());
    }

    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Node* p = params[pi];
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + eps;
            const double hi = eval();
            p->value[i] = saved - eps;
            const double lo = eval();
            p->value[i] = saved;
            const double fd = (hi - lo) / (2.0 * eps);
            const double a = analytic[pi][i];
            const double rel = std::abs(a - fd) / std::max(1.0, std::abs(a));
            if (rel > worst) worst = rel;
        }
    }
    return worst;
}

}  // namespace trifuse::ad
