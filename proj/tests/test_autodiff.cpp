#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "doctest.h"
#include "trifuse/common.hpp"
#include "trifuse/graph.hpp"

using namespace trifuse;
using ad::Node;
using ad::Tape;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -2.0,
                     double hi = 2.0) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("tape mechanics: lazy grads, fan-out accumulation, zero_grads") {
    Tape t;
    Node* x = t.leaf(Tensor::row({1.5, -0.5, 2.0}));
    CHECK_FALSE(x->has_grad());

    // y = x*x + x, dy/dx = 2x + 1 through two paths into the same leaf.
    Node* y = ad::sum_all(t, ad::add(t, ad::mul(t, x, x), x));
    ad::backward(y);
    REQUIRE(x->has_grad());
    CHECK(x->grad()[0] == 2.0 * 1.5 + 1.0);
    CHECK(x->grad()[1] == 2.0 * -0.5 + 1.0);
    CHECK(x->grad()[2] == 2.0 * 2.0 + 1.0);

    const std::vector<Node*> leaves = {x};
    ad::zero_grads(leaves);
    CHECK(x->grad()[0] == 0.0);
    CHECK(x->grad()[1] == 0.0);
    CHECK(x->grad()[2] == 0.0);
}

TEST_CASE("elementwise gradients match closed forms") {
    Rng rng(21);
    Tape t;
    Node* x = t.leaf(random_tensor({2, 3}, rng));
    Node* y = t.leaf(random_tensor({2, 3}, rng));

    SUBCASE("mul routes the other operand") {
        ad::backward(ad::sum_all(t, ad::mul(t, x, y)));
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(x->grad()[i] == y->value[i]);
            CHECK(y->grad()[i] == x->value[i]);
        }
    }
    SUBCASE("add routes ones") {
        ad::backward(ad::sum_all(t, ad::add(t, x, y)));
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(x->grad()[i] == 1.0);
            CHECK(y->grad()[i] == 1.0);
        }
    }
    SUBCASE("scale routes the constant") {
        ad::backward(ad::sum_all(t, ad::scale(t, x, -1.7)));
        for (std::size_t i = 0; i < 6; ++i) CHECK(x->grad()[i] == -1.7);
    }
    SUBCASE("sigmoid gradient s(1-s)") {
        Node* s = ad::sigmoid(t, x);
        ad::backward(ad::sum_all(t, s));
        for (std::size_t i = 0; i < 6; ++i) {
            const double sv = s->value[i];
            CHECK(x->grad()[i] == doctest::Approx(sv * (1.0 - sv)).epsilon(1e-15));
        }
    }
    SUBCASE("tanh gradient 1-t^2") {
        Node* th = ad::tanh(t, x);
        ad::backward(ad::sum_all(t, th));
        for (std::size_t i = 0; i < 6; ++i) {
            const double tv = th->value[i];
            CHECK(x->grad()[i] == doctest::Approx(1.0 - tv * tv).epsilon(1e-15));
        }
    }
    SUBCASE("relu gradient masks x > 0") {
        ad::backward(ad::sum_all(t, ad::relu(t, x)));
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(x->grad()[i] == (x->value[i] > 0.0 ? 1.0 : 0.0));
    }
}

TEST_CASE("log_clamped gradient is 1/x above the floor, 0 below") {
    Tape t;
    Node* x = t.leaf(Tensor::row({2.0, 1e-13, 0.5}));
    ad::backward(ad::sum_all(t, ad::log_clamped(t, x)));
    CHECK(x->grad()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(x->grad()[1] == 0.0);
    CHECK(x->grad()[2] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("pow_const gradient p*x^(p-1)") {
    Tape t;
    Node* x = t.leaf(Tensor::row({0.7, 1.3, 2.2}));
    ad::backward(ad::sum_all(t, ad::pow_const(t, x, 1.7)));
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(x->grad()[i] ==
              doctest::Approx(1.7 * std::pow(x->value[i], 0.7)).epsilon(1e-14));
}

TEST_CASE("matmul gradients are the transpose products") {
    Rng rng(22);
    Tape t;
    Node* a = t.leaf(random_tensor({3, 4}, rng));
    Node* b = t.leaf(random_tensor({4, 2}, rng));
    ad::backward(ad::sum_all(t, ad::matmul(t, a, b)));

    // d/dA sum(AB) = ones * B^T; d/dB = A^T * ones.
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t p = 0; p < 4; ++p) {
            double want = 0.0;
            for (std::size_t j = 0; j < 2; ++j) want += b->value.at(p, j);
            CHECK(a->grad().at(i, p) == doctest::Approx(want).epsilon(1e-14));
        }
    for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t j = 0; j < 2; ++j) {
            double want = 0.0;
            for (std::size_t i = 0; i < 3; ++i) want += a->value.at(i, p);
            CHECK(b->grad().at(p, j) == doctest::Approx(want).epsilon(1e-14));
        }
}

TEST_CASE("softmax_rows gradient matches the Jacobian") {
    Tape t;
    Node* x = t.leaf(Tensor::row({0.3, -1.1, 0.8}));
    Node* w = t.leaf(Tensor::row({1.0, -2.0, 0.5}));
    Node* s = ad::softmax_rows(t, x);
    ad::backward(ad::sum_all(t, ad::mul(t, s, w)));

    double dot = 0.0;
    for (std::size_t j = 0; j < 3; ++j) dot += w->value[j] * s->value[j];
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(x->grad()[j] ==
              doctest::Approx(s->value[j] * (w->value[j] - dot)).epsilon(1e-13));
}

TEST_CASE("structural ops route gradients to the right slots") {
    Rng rng(23);
    Tape t;

    SUBCASE("transpose") {
        Node* a = t.leaf(random_tensor({2, 3}, rng));
        Node* w = t.leaf(random_tensor({3, 2}, rng));
        ad::backward(ad::sum_all(t, ad::mul(t, ad::transpose(t, a), w)));
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(a->grad().at(i, j) == w->value.at(j, i));
    }
    SUBCASE("concat_rows splits back by row blocks") {
        Node* a = t.leaf(random_tensor({2, 3}, rng));
        Node* b = t.leaf(random_tensor({1, 3}, rng));
        Node* w = t.leaf(random_tensor({3, 3}, rng));
        ad::backward(ad::sum_all(t, ad::mul(t, ad::concat_rows(t, {a, b}), w)));
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(a->grad().at(i, j) == w->value.at(i, j));
        for (std::size_t j = 0; j < 3; ++j) CHECK(b->grad().at(0, j) == w->value.at(2, j));
    }
    SUBCASE("concat_cols splits back by column blocks") {
        Node* a = t.leaf(random_tensor({2, 2}, rng));
        Node* b = t.leaf(random_tensor({2, 3}, rng));
        Node* w = t.leaf(random_tensor({2, 5}, rng));
        ad::backward(ad::sum_all(t, ad::mul(t, ad::concat_cols(t, {a, b}), w)));
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < 2; ++j) CHECK(a->grad().at(i, j) == w->value.at(i, j));
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(b->grad().at(i, j) == w->value.at(i, j + 2));
        }
    }
    SUBCASE("select_row lands in one row only") {
        Node* a = t.leaf(random_tensor({3, 4}, rng));
        ad::backward(ad::sum_all(t, ad::select_row(t, a, 1)));
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                CHECK(a->grad().at(i, j) == (i == 1 ? 1.0 : 0.0));
    }
    SUBCASE("repeat_rows sums over the tiles") {
        Node* a = t.leaf(random_tensor({1, 4}, rng));
        ad::backward(ad::sum_all(t, ad::repeat_rows(t, a, 5)));
        for (std::size_t j = 0; j < 4; ++j) CHECK(a->grad().at(0, j) == 5.0);
    }
    SUBCASE("sum_all routes ones") {
        Node* a = t.leaf(random_tensor({2, 3}, rng));
        ad::backward(ad::sum_all(t, a));
        for (std::size_t i = 0; i < 6; ++i) CHECK(a->grad()[i] == 1.0);
    }
}

TEST_CASE("backward agrees with an independent finite-difference loop") {
    // sum(w * sigmoid(x W + b)) with hand-run central differences, not
    // grad_check, so the audit helper itself gets an external witness.
    Rng rng(24);
    Tensor x0 = random_tensor({2, 3}, rng);
    Tensor w0 = random_tensor({3, 2}, rng);
    Tensor b0 = random_tensor({1, 2}, rng);
    Tensor r0 = random_tensor({2, 2}, rng);

    auto eval = [&](const Tensor& xv, const Tensor& wv, const Tensor& bv) {
        Tape t;
        Node* x = t.leaf(xv);
        Node* w = t.leaf(wv);
        Node* b = t.leaf(bv);
        Node* h = ad::sigmoid(t, ad::add(t, ad::matmul(t, x, w), ad::repeat_rows(t, b, 2)));
        Node* loss = ad::sum_all(t, ad::mul(t, h, t.leaf(r0)));
        return loss->value[0];
    };

    Tape t;
    Node* x = t.leaf(x0);
    Node* w = t.leaf(w0);
    Node* b = t.leaf(b0);
    Node* h = ad::sigmoid(t, ad::add(t, ad::matmul(t, x, w), ad::repeat_rows(t, b, 2)));
    ad::backward(ad::sum_all(t, ad::mul(t, h, t.leaf(r0))));

    const double eps = 1e-6;
    auto check_param = [&](Node* node, Tensor& store, auto evaluate) {
        for (std::size_t i = 0; i < store.numel(); ++i) {
            const double keep = store[i];
            store[i] = keep + eps;
            const double up = evaluate();
            store[i] = keep - eps;
            const double dn = evaluate();
            store[i] = keep;
            const double fd = (up - dn) / (2.0 * eps);
            CHECK(node->grad()[i] == doctest::Approx(fd).epsilon(1e-6));
        }
    };
    check_param(x, x0, [&] { return eval(x0, w0, b0); });
    check_param(w, w0, [&] { return eval(x0, w0, b0); });
    check_param(b, b0, [&] { return eval(x0, w0, b0); });
}

TEST_CASE("grad_check passes on a smooth composite") {
    Rng rng(25);
    Tape t;
    Node* a = t.leaf(random_tensor({2, 3}, rng));
    Node* b = t.leaf(random_tensor({3, 3}, rng));
    const std::vector<Node*> params = {a, b};
    const double err = ad::grad_check(
        [&](Tape& g) {
            Node* m = ad::tanh(g, ad::matmul(g, a, b));
            return ad::sum_all(g, ad::mul(g, m, m));
        },
        params, 1e-5);
    CHECK(err < 1e-4);
}

TEST_CASE("shape contracts reject mismatched operands") {
    Rng rng(26);
    Tape t;
    Node* a = t.leaf(random_tensor({2, 3}, rng));
    Node* b = t.leaf(random_tensor({3, 2}, rng));
    CHECK_THROWS_AS(ad::add(t, a, b), ContractError);
    CHECK_THROWS_AS(ad::mul(t, a, b), ContractError);
    CHECK_THROWS_AS(ad::matmul(t, a, a), ContractError);
    CHECK_THROWS_AS(ad::concat_rows(t, {a, b}), ContractError);
    CHECK_THROWS_AS(ad::concat_cols(t, {a, t.leaf(random_tensor({3, 3}, rng))}),
                    ContractError);
    CHECK_THROWS_AS(ad::select_row(t, a, 2), ContractError);
    CHECK_THROWS_AS(ad::repeat_rows(t, a, 3), ContractError);
}

TEST_CASE("tensors reject non-finite values") {
    CHECK_THROWS_AS(Tensor({2}, {1.0, std::nan("")}), DataError);
    CHECK_THROWS_AS(Tensor({1}, {std::numeric_limits<double>::infinity()}), DataError);
}
