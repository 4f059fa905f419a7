#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>

#include "doctest.h"
#include "mcted/autograd.hpp"
#include "mcted/rng.hpp"
#include "mcted/util.hpp"

using namespace mcted;

namespace {

Tensor random_tensor(int rows, int cols, Rng& rng, double scale = 1.0) {
    Tensor t(rows, cols);
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian(0.0, scale);
    return t;
}

// Rebuilds the graph from scratch on every call, so central differences see
// exactly the function the tape differentiates.
double max_fd_error(std::vector<Tensor>& params,
                    const std::function<Node*(Tape&, const std::vector<Node*>&)>& build,
                    int max_coords = 64) {
    Tape tape;
    std::vector<Node*> leaves;
    for (Tensor& p : params) leaves.push_back(tape.leaf(p, true));
    Node* loss = build(tape, leaves);
    tape.backward(loss);

    double worst = 0.0;
    Rng rng(1234);
    for (size_t i = 0; i < params.size(); ++i) {
        const auto loss_fn = [&]() {
            Tape t;
            std::vector<Node*> fresh;
            for (Tensor& p : params) fresh.push_back(t.leaf(p, false));
            return build(t, fresh)->value[0];
        };
        const Tensor analytic =
            leaves[i]->grad.defined() ? leaves[i]->grad : Tensor(params[i].shape());
        const FdResult r =
            finite_difference_check(params[i], analytic, loss_fn, 1e-4, max_coords, rng);
        REQUIRE(!r.nan_encountered);
        worst = std::max(worst, r.max_rel_err);
    }
    return worst;
}

}  // namespace

TEST_CASE("softmax of a constant row is uniform") {
    Tape tape;
    Node* x = tape.constant(Tensor::row({0.0, 0.0, 0.0}));
    Node* y = softmax_rows(x);
    CHECK(y->value[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(y->value[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(y->value[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax rows are non-negative and sum to one") {
    Rng rng(77);
    Tape tape;
    Node* x = tape.constant(random_tensor(6, 9, rng, 4.0));
    Node* y = softmax_rows(x);
    for (int i = 0; i < 6; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 9; ++j) {
            CHECK(y->value.at(i, j) >= 0.0);
            sum += y->value.at(i, j);
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("concat along the last axis adds up widths") {
    Tape tape;
    Node* a = tape.constant(Tensor(2, 3));
    Node* b = tape.constant(Tensor(2, 2));
    Node* c = concat_cols({a, b});
    CHECK(c->value.shape() == std::vector<int>{2, 5});
}

TEST_CASE("matmul of all-ones matrices") {
    Tape tape;
    Node* a = tape.constant(Tensor::full(2, 3, 1.0));
    Node* b = tape.constant(Tensor::full(3, 2, 1.0));
    Node* c = matmul(a, b);
    for (size_t i = 0; i < c->value.size(); ++i) CHECK(c->value[i] == 3.0);
}

TEST_CASE("shape mismatch names the op and both shapes") {
    Tape tape;
    Node* a = tape.constant(Tensor(2, 3));
    Node* b = tape.constant(Tensor(4, 2));
    CHECK_THROWS_WITH_AS(matmul(a, b), "matmul: [2,3] x [4,2]", dimension_error);
}

TEST_CASE("gradient of sum of squares") {
    Tape tape;
    Node* x = tape.leaf(Tensor::row({1.0, 2.0, 3.0}), true);
    Node* loss = sum_all(mul(x, x));
    tape.backward(loss);
    CHECK(x->grad[0] == doctest::Approx(2.0));
    CHECK(x->grad[1] == doctest::Approx(4.0));
    CHECK(x->grad[2] == doctest::Approx(6.0));
}

TEST_CASE("gradient of sum of softmax vanishes") {
    Rng rng(5);
    Tape tape;
    Node* x = tape.leaf(random_tensor(1, 7, rng), true);
    Node* loss = sum_all(softmax_rows(x));
    tape.backward(loss);
    for (size_t i = 0; i < x->grad.size(); ++i) CHECK(std::abs(x->grad[i]) < 1e-12);
}

TEST_CASE("backward twice accumulates exactly twice the gradient") {
    Tape tape;
    Node* x = tape.leaf(Tensor::row({1.0, -2.0, 0.5}), true);
    Node* loss = sum_all(mul(x, x));
    tape.backward(loss);
    const Tensor once = x->grad;
    tape.backward(loss);
    for (size_t i = 0; i < once.size(); ++i) {
        CHECK(x->grad[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-15));
    }
}

TEST_CASE("backward rejects non-scalar losses") {
    Tape tape;
    Node* x = tape.leaf(Tensor(2, 2), true);
    Node* y = tanh(x);
    CHECK_THROWS_AS(tape.backward(y), contract_error);
}

TEST_CASE("five-parameter composite graph matches central differences") {
    Rng rng(42);
    std::vector<Tensor> params = {random_tensor(3, 4, rng, 0.5), random_tensor(4, 4, rng, 0.5),
                                  random_tensor(3, 4, rng, 0.5), random_tensor(4, 2, rng, 0.5),
                                  random_tensor(3, 2, rng, 0.5)};
    const double err = max_fd_error(params, [](Tape&, const std::vector<Node*>& p) {
        Node* z = tanh(add(matmul(p[0], p[1]), p[2]));
        Node* s = sigmoid(matmul(z, p[3]));
        return sum_all(mul(s, p[4]));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("linear layer gradient matches central differences") {
    Rng rng(9);
    std::vector<Tensor> params = {random_tensor(5, 3, rng), random_tensor(3, 4, rng),
                                  random_tensor(1, 4, rng)};
    const double err = max_fd_error(params, [](Tape&, const std::vector<Node*>& p) {
        return sum_all(tanh(add_rowvec(matmul(p[0], p[1]), p[2])));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("zero-parameter group reports zero error") {
    Tensor empty(0, 3);
    Tensor grad(0, 3);
    Rng rng(1);
    const FdResult r = finite_difference_check(
        empty, grad, [] { return 0.0; }, 1e-4, 8, rng);
    CHECK(r.max_rel_err == 0.0);
    CHECK(r.worst_index == -1);
}

TEST_CASE("every supported op matches central differences") {
    Rng rng(2024);
    const auto check = [&](const char* what, std::vector<Tensor> params,
                           std::function<Node*(Tape&, const std::vector<Node*>&)> build) {
        INFO(what);
        const double err = max_fd_error(params, build);
        CHECK(err < 1e-6);
    };

    check("matmul", {random_tensor(3, 4, rng), random_tensor(4, 2, rng)},
          [](Tape&, const std::vector<Node*>& p) { return sum_all(matmul(p[0], p[1])); });
    check("add+mul", {random_tensor(3, 3, rng), random_tensor(3, 3, rng)},
          [](Tape&, const std::vector<Node*>& p) { return sum_all(mul(add(p[0], p[1]), p[0])); });
    check("add_rowvec", {random_tensor(4, 3, rng), random_tensor(1, 3, rng)},
          [](Tape&, const std::vector<Node*>& p) {
              return sum_all(tanh(add_rowvec(p[0], p[1])));
          });
    check("scale", {random_tensor(2, 5, rng)},
          [](Tape&, const std::vector<Node*>& p) { return sum_all(tanh(scale(p[0], -1.7))); });
    check("scale_by", {random_tensor(2, 3, rng), random_tensor(1, 1, rng)},
          [](Tape&, const std::vector<Node*>& p) { return sum_all(tanh(scale_by(p[0], p[1]))); });
    check("scale_rows", {random_tensor(4, 3, rng), random_tensor(4, 1, rng)},
          [](Tape&, const std::vector<Node*>& p) {
              return sum_all(tanh(scale_rows(p[0], p[1])));
          });
    {
        Rng local(7);
        Tensor denom(4, 1);
        for (size_t i = 0; i < denom.size(); ++i) denom[i] = 1.0 + local.uniform();
        check("div_rows", {random_tensor(4, 3, rng), denom},
              [](Tape&, const std::vector<Node*>& p) {
                  return sum_all(tanh(div_rows(p[0], p[1])));
              });
    }
    check("concat_cols+slice_cols", {random_tensor(3, 2, rng), random_tensor(3, 3, rng)},
          [](Tape&, const std::vector<Node*>& p) {
              Node* cat = concat_cols({p[0], p[1]});
              return sum_all(mul(slice_cols(cat, 1, 4), slice_cols(cat, 0, 3)));
          });
    check("concat_rows+slice_rows", {random_tensor(2, 3, rng), random_tensor(3, 3, rng)},
          [](Tape&, const std::vector<Node*>& p) {
              Node* cat = concat_rows({p[0], p[1]});
              return sum_all(tanh(slice_rows(cat, 1, 4)));
          });
    check("sigmoid", {random_tensor(3, 3, rng)},
          [](Tape&, const std::vector<Node*>& p) { return sum_all(sigmoid(p[0])); });
    check("softmax_rows", {random_tensor(3, 5, rng), random_tensor(3, 5, rng)},
          [](Tape&, const std::vector<Node*>& p) {
              return sum_all(mul(softmax_rows(p[0]), p[1]));
          });
    {
        Tensor a = random_tensor(3, 4, rng);
        for (size_t i = 0; i < a.size(); ++i) a[i] += a[i] >= 0.0 ? 0.5 : -0.5;
        check("l2norm_rows", {a},
              [](Tape&, const std::vector<Node*>& p) { return sum_all(l2norm_rows(p[0])); });
    }
    {
        Tensor a(2, 3);
        Rng local(8);
        for (size_t i = 0; i < a.size(); ++i) a[i] = 1.0 + local.uniform();
        check("recip", {a},
              [](Tape&, const std::vector<Node*>& p) { return sum_all(recip(p[0])); });
        check("log_floor", {a}, [](Tape&, const std::vector<Node*>& p) {
            return sum_all(log_floor(p[0], 1e-12));
        });
    }
    check("gather_rows", {random_tensor(5, 3, rng)},
          [](Tape&, const std::vector<Node*>& p) {
              return sum_all(tanh(gather_rows(p[0], {4, 0, 0, 2})));
          });
    check("rows_pick", {random_tensor(3, 4, rng)},
          [](Tape&, const std::vector<Node*>& p) {
              return sum_all(rows_pick(sigmoid(p[0]), {2, 0, 3}));
          });
    check("dropout", {random_tensor(4, 4, rng)}, [](Tape&, const std::vector<Node*>& p) {
        Rng mask_rng(99);  // same mask on every rebuild
        return sum_all(dropout(p[0], 0.4, mask_rng));
    });
}

TEST_CASE("l2norm_rows computes row norms") {
    Tape tape;
    Node* x = tape.constant(Tensor::row({3.0, 4.0}));
    Node* n = l2norm_rows(x);
    CHECK(n->value[0] == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("forward ops keep finite inputs finite") {
    Rng rng(31);
    Tape tape;
    Node* x = tape.constant(random_tensor(4, 6, rng, 50.0));
    CHECK(softmax_rows(x)->value.all_finite());
    CHECK(tanh(x)->value.all_finite());
    CHECK(sigmoid(x)->value.all_finite());
    CHECK(l2norm_rows(x)->value.all_finite());
}
