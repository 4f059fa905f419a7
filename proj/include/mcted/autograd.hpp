#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mcted/rng.hpp"
#include "mcted/tensor.hpp"

namespace mcted {

enum class OpKind {
    leaf,
    matmul,
    add,
    add_rowvec,
    mul,
    scale_const,
    scale_scalar,
    scale_rows,
    div_rows,
    concat_cols,
    concat_rows,
    slice_cols,
    slice_rows,
    tanh_fn,
    sigmoid_fn,
    softmax_rows,
    l2norm_rows,
    recip_fn,
    sum_all,
    gather_rows,
    rows_pick,
    log_floor,
    dropout_mask,
};

class Tape;

struct Node {
    OpKind kind = OpKind::leaf;
    Tensor value;
    Tensor grad;  // lazily allocated, same shape as value once populated
    bool requires_grad = false;
    std::vector<Node*> inputs;
    Tape* tape = nullptr;
    std::string name;  // leaves only, for diagnostics

    // op payloads
    double scalar = 0.0;        // scale_const factor / log_floor floor
    int begin = 0, end = 0;     // slice ranges
    std::vector<int> indices;   // gather_rows / rows_pick
    Tensor mask;                // dropout

    Tensor& ensure_grad();
};

// Owns the nodes of one compute graph. Graphs are built fresh per forward
// pass; parameters live outside and are bound in as trainable leaves.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Node* leaf(Tensor value, bool trainable = false, std::string name = {});
    Node* constant(Tensor value) { return leaf(std::move(value), false); }

    // Reverse traversal visits each reachable node exactly once. Intermediate
    // gradients are reset per call; leaf gradients accumulate across calls.
    void backward(Node* loss);

    size_t node_count() const { return nodes_.size(); }
    Node* make(OpKind kind, std::vector<Node*> inputs, Tensor value);

private:
    std::vector<std::unique_ptr<Node>> nodes_;
};

// --- forward op builders ---------------------------------------------------
Node* matmul(Node* a, Node* b);
Node* add(Node* a, Node* b);
Node* add_rowvec(Node* a, Node* bias);   // a: m x n, bias: 1 x n
Node* mul(Node* a, Node* b);
Node* scale(Node* a, double s);
Node* scale_by(Node* a, Node* s);        // s: 1 x 1
Node* scale_rows(Node* a, Node* s);      // s: m x 1, row i scaled by s[i]
Node* div_rows(Node* a, Node* d);        // d: m x 1, row i divided by d[i]
Node* concat_cols(const std::vector<Node*>& parts);
Node* concat_rows(const std::vector<Node*>& parts);
Node* slice_cols(Node* a, int begin, int end);
Node* slice_rows(Node* a, int begin, int end);
Node* tanh(Node* a);
Node* sigmoid(Node* a);
Node* softmax_rows(Node* a);
Node* l2norm_rows(Node* a);              // m x n -> m x 1
Node* recip(Node* a);
Node* sum_all(Node* a);                  // -> 1 x 1
Node* gather_rows(Node* table, std::vector<int> indices);
Node* rows_pick(Node* a, std::vector<int> indices);  // out[i] = a[i, idx[i]]
Node* log_floor(Node* a, double floor_value);
Node* dropout(Node* a, double rate, Rng& rng);       // inverted dropout, training mode

// Inverted-dropout mask with keep-scaling baked in; shared by the autograd op
// and the standalone functional form in the training module.
Tensor make_dropout_mask(int rows, int cols, double rate, Rng& rng);

// --- finite-difference oracle ----------------------------------------------
struct FdResult {
    double max_rel_err = 0.0;
    long long worst_index = -1;
    bool nan_encountered = false;
};

// Central differences on up to max_coords sampled coordinates of param.
// loss_fn must be deterministic (dropout off, adjacency snapshots fixed) and
// must read the current contents of param on every call.
FdResult finite_difference_check(Tensor& param, const Tensor& analytic_grad,
                                 const std::function<double()>& loss_fn, double epsilon,
                                 int max_coords, Rng& rng);

}  // namespace mcted
