#include "mcted/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "mcted/util.hpp"

namespace mcted {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw dimension_error(std::string(op) + ": " + a.shape_str() + " vs " + b.shape_str());
    }
}

bool any_requires_grad(const std::vector<Node*>& inputs) {
    for (const Node* n : inputs) {
        if (n->requires_grad) return true;
    }
    return false;
}

}  // namespace

Tensor& Node::ensure_grad() {
    if (!grad.defined()) {
        grad = Tensor(value.shape());
    }
    return grad;
}

Node* Tape::leaf(Tensor value, bool trainable, std::string name) {
    auto node = std::make_unique<Node>();
    node->kind = OpKind::leaf;
    node->value = std::move(value);
    node->requires_grad = trainable;
    node->tape = this;
    node->name = std::move(name);
    nodes_.push_back(std::move(node));
    return nodes_.back().get();
}

Node* Tape::make(OpKind kind, std::vector<Node*> inputs, Tensor value) {
    auto node = std::make_unique<Node>();
    node->kind = kind;
    node->requires_grad = any_requires_grad(inputs);
    node->inputs = std::move(inputs);
    node->value = std::move(value);
    node->tape = this;
    nodes_.push_back(std::move(node));
    return nodes_.back().get();
}

// --- op builders -------------------------------------------------------------

Node* matmul(Node* a, Node* b) {
    return a->tape->make(OpKind::matmul, {a, b}, matmul(a->value, b->value));
}

Node* add(Node* a, Node* b) {
    check_same_shape("add", a->value, b->value);
    Tensor out = a->value;
    add_scaled(out, b->value, 1.0);
    return a->tape->make(OpKind::add, {a, b}, std::move(out));
}

Node* add_rowvec(Node* a, Node* bias) {
    if (bias->value.rows() != 1 || bias->value.cols() != a->value.cols()) {
        throw dimension_error("add_rowvec: " + a->value.shape_str() + " + " +
                              bias->value.shape_str());
    }
    Tensor out = a->value;
    const int m = out.rows(), n = out.cols();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.at(i, j) += bias->value[j];
    }
    return a->tape->make(OpKind::add_rowvec, {a, bias}, std::move(out));
}

Node* mul(Node* a, Node* b) {
    check_same_shape("mul", a->value, b->value);
    Tensor out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
    return a->tape->make(OpKind::mul, {a, b}, std::move(out));
}

Node* scale(Node* a, double s) {
    Tensor out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= s;
    Node* n = a->tape->make(OpKind::scale_const, {a}, std::move(out));
    n->scalar = s;
    return n;
}

Node* scale_by(Node* a, Node* s) {
    if (s->value.size() != 1) {
        throw dimension_error("scale_by: scalar operand has shape " + s->value.shape_str());
    }
    Tensor out = a->value;
    const double v = s->value[0];
    for (size_t i = 0; i < out.size(); ++i) out[i] *= v;
    return a->tape->make(OpKind::scale_scalar, {a, s}, std::move(out));
}

Node* scale_rows(Node* a, Node* s) {
    if (s->value.cols() != 1 || s->value.rows() != a->value.rows()) {
        throw dimension_error("scale_rows: " + a->value.shape_str() + " by " +
                              s->value.shape_str());
    }
    Tensor out = a->value;
    const int m = out.rows(), n = out.cols();
    for (int i = 0; i < m; ++i) {
        const double v = s->value[i];
        for (int j = 0; j < n; ++j) out.at(i, j) *= v;
    }
    return a->tape->make(OpKind::scale_rows, {a, s}, std::move(out));
}

Node* div_rows(Node* a, Node* d) {
    if (d->value.cols() != 1 || d->value.rows() != a->value.rows()) {
        throw dimension_error("div_rows: " + a->value.shape_str() + " by " + d->value.shape_str());
    }
    Tensor out = a->value;
    const int m = out.rows(), n = out.cols();
    for (int i = 0; i < m; ++i) {
        const double v = d->value[i];
        for (int j = 0; j < n; ++j) out.at(i, j) /= v;
    }
    return a->tape->make(OpKind::div_rows, {a, d}, std::move(out));
}

Node* concat_cols(const std::vector<Node*>& parts) {
    if (parts.empty()) throw dimension_error("concat_cols: no operands");
    const int m = parts[0]->value.rows();
    int total = 0;
    for (const Node* p : parts) {
        if (p->value.rows() != m) {
            throw dimension_error("concat_cols: row mismatch " + parts[0]->value.shape_str() +
                                  " vs " + p->value.shape_str());
        }
        total += p->value.cols();
    }
    Tensor out(m, total);
    int offset = 0;
    for (const Node* p : parts) {
        const int n = p->value.cols();
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) out.at(i, offset + j) = p->value.at(i, j);
        }
        offset += n;
    }
    return parts[0]->tape->make(OpKind::concat_cols, parts, std::move(out));
}

Node* concat_rows(const std::vector<Node*>& parts) {
    if (parts.empty()) throw dimension_error("concat_rows: no operands");
    const int n = parts[0]->value.cols();
    int total = 0;
    for (const Node* p : parts) {
        if (p->value.cols() != n) {
            throw dimension_error("concat_rows: column mismatch " + parts[0]->value.shape_str() +
                                  " vs " + p->value.shape_str());
        }
        total += p->value.rows();
    }
    Tensor out(total, n);
    int offset = 0;
    for (const Node* p : parts) {
        const int m = p->value.rows();
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) out.at(offset + i, j) = p->value.at(i, j);
        }
        offset += m;
    }
    return parts[0]->tape->make(OpKind::concat_rows, parts, std::move(out));
}

Node* slice_cols(Node* a, int begin, int end) {
    if (begin < 0 || end > a->value.cols() || begin >= end) {
        throw dimension_error("slice_cols: [" + std::to_string(begin) + "," +
                              std::to_string(end) + ") of " + a->value.shape_str());
    }
    const int m = a->value.rows();
    Tensor out(m, end - begin);
    for (int i = 0; i < m; ++i) {
        for (int j = begin; j < end; ++j) out.at(i, j - begin) = a->value.at(i, j);
    }
    Node* n = a->tape->make(OpKind::slice_cols, {a}, std::move(out));
    n->begin = begin;
    n->end = end;
    return n;
}

Node* slice_rows(Node* a, int begin, int end) {
    if (begin < 0 || end > a->value.rows() || begin >= end) {
        throw dimension_error("slice_rows: [" + std::to_string(begin) + "," +
                              std::to_string(end) + ") of " + a->value.shape_str());
    }
    const int n = a->value.cols();
    Tensor out(end - begin, n);
    for (int i = begin; i < end; ++i) {
        for (int j = 0; j < n; ++j) out.at(i - begin, j) = a->value.at(i, j);
    }
    Node* node = a->tape->make(OpKind::slice_rows, {a}, std::move(out));
    node->begin = begin;
    node->end = end;
    return node;
}

Node* tanh(Node* a) {
    Tensor out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    return a->tape->make(OpKind::tanh_fn, {a}, std::move(out));
}

Node* sigmoid(Node* a) {
    Tensor out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    return a->tape->make(OpKind::sigmoid_fn, {a}, std::move(out));
}

Node* softmax_rows(Node* a) {
    Tensor out = a->value;
    const int m = out.rows(), n = out.cols();
    for (int i = 0; i < m; ++i) {
        double mx = out.at(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, out.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            const double e = std::exp(out.at(i, j) - mx);
            out.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < n; ++j) out.at(i, j) /= sum;
    }
    return a->tape->make(OpKind::softmax_rows, {a}, std::move(out));
}

Node* l2norm_rows(Node* a) {
    const int m = a->value.rows(), n = a->value.cols();
    Tensor out(m, 1);
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += a->value.at(i, j) * a->value.at(i, j);
        out[i] = std::sqrt(acc);
    }
    return a->tape->make(OpKind::l2norm_rows, {a}, std::move(out));
}

Node* recip(Node* a) {
    Tensor out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / out[i];
    return a->tape->make(OpKind::recip_fn, {a}, std::move(out));
}

Node* sum_all(Node* a) {
    double acc = 0.0;
    for (size_t i = 0; i < a->value.size(); ++i) acc += a->value[i];
    return a->tape->make(OpKind::sum_all, {a}, Tensor::scalar(acc));
}

Node* gather_rows(Node* table, std::vector<int> indices) {
    const int n = table->value.cols();
    Tensor out(static_cast<int>(indices.size()), n);
    for (size_t i = 0; i < indices.size(); ++i) {
        const int r = indices[i];
        if (r < 0 || r >= table->value.rows()) {
            throw dimension_error("gather_rows: index " + std::to_string(r) + " outside " +
                                  table->value.shape_str());
        }
        for (int j = 0; j < n; ++j) out.at(static_cast<int>(i), j) = table->value.at(r, j);
    }
    Node* node = table->tape->make(OpKind::gather_rows, {table}, std::move(out));
    node->indices = std::move(indices);
    return node;
}

Node* rows_pick(Node* a, std::vector<int> indices) {
    if (static_cast<int>(indices.size()) != a->value.rows()) {
        throw dimension_error("rows_pick: " + std::to_string(indices.size()) + " indices for " +
                              a->value.shape_str());
    }
    Tensor out(a->value.rows(), 1);
    for (int i = 0; i < a->value.rows(); ++i) {
        const int c = indices[static_cast<size_t>(i)];
        if (c < 0 || c >= a->value.cols()) {
            throw dimension_error("rows_pick: column " + std::to_string(c) + " outside " +
                                  a->value.shape_str());
        }
        out[i] = a->value.at(i, c);
    }
    Node* node = a->tape->make(OpKind::rows_pick, {a}, std::move(out));
    node->indices = std::move(indices);
    return node;
}

Node* log_floor(Node* a, double floor_value) {
    Tensor out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(out[i], floor_value));
    Node* node = a->tape->make(OpKind::log_floor, {a}, std::move(out));
    node->scalar = floor_value;
    return node;
}

Tensor make_dropout_mask(int rows, int cols, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw contract_error("dropout rate must be in [0,1): " + format_double(rate));
    }
    Tensor mask(rows, cols);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    }
    return mask;
}

Node* dropout(Node* a, double rate, Rng& rng) {
    Tensor mask = make_dropout_mask(a->value.rows(), a->value.cols(), rate, rng);
    Tensor out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    Node* node = a->tape->make(OpKind::dropout_mask, {a}, std::move(out));
    node->mask = std::move(mask);
    return node;
}

// --- backward ----------------------------------------------------------------

namespace {

void accumulate_into(Node* target, const Tensor& contribution) {
    if (!target->requires_grad) return;
    add_scaled(target->ensure_grad(), contribution, 1.0);
}

void backward_step(Node* n) {
    const Tensor& g = n->grad;
    switch (n->kind) {
        case OpKind::leaf:
            break;
        case OpKind::matmul: {
            Node* a = n->inputs[0];
            Node* b = n->inputs[1];
            if (a->requires_grad) add_scaled(a->ensure_grad(), matmul_nt(g, b->value), 1.0);
            if (b->requires_grad) add_scaled(b->ensure_grad(), matmul_tn(a->value, g), 1.0);
            break;
        }
        case OpKind::add:
            accumulate_into(n->inputs[0], g);
            accumulate_into(n->inputs[1], g);
            break;
        case OpKind::add_rowvec: {
            accumulate_into(n->inputs[0], g);
            Node* bias = n->inputs[1];
            if (bias->requires_grad) {
                Tensor& bg = bias->ensure_grad();
                for (int i = 0; i < g.rows(); ++i) {
                    for (int j = 0; j < g.cols(); ++j) bg[j] += g.at(i, j);
                }
            }
            break;
        }
        case OpKind::mul: {
            Node* a = n->inputs[0];
            Node* b = n->inputs[1];
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) ag[i] += g[i] * b->value[i];
            }
            if (b->requires_grad) {
                Tensor& bg = b->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) bg[i] += g[i] * a->value[i];
            }
            break;
        }
        case OpKind::scale_const: {
            Node* a = n->inputs[0];
            if (a->requires_grad) add_scaled(a->ensure_grad(), g, n->scalar);
            break;
        }
        case OpKind::scale_scalar: {
            Node* a = n->inputs[0];
            Node* s = n->inputs[1];
            if (a->requires_grad) add_scaled(a->ensure_grad(), g, s->value[0]);
            if (s->requires_grad) {
                double acc = 0.0;
                for (size_t i = 0; i < g.size(); ++i) acc += g[i] * a->value[i];
                s->ensure_grad()[0] += acc;
            }
            break;
        }
        case OpKind::scale_rows: {
            Node* a = n->inputs[0];
            Node* s = n->inputs[1];
            const int m = g.rows(), cols = g.cols();
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    const double v = s->value[i];
                    for (int j = 0; j < cols; ++j) ag.at(i, j) += g.at(i, j) * v;
                }
            }
            if (s->requires_grad) {
                Tensor& sg = s->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < cols; ++j) acc += g.at(i, j) * a->value.at(i, j);
                    sg[i] += acc;
                }
            }
            break;
        }
        case OpKind::div_rows: {
            Node* a = n->inputs[0];
            Node* d = n->inputs[1];
            const int m = g.rows(), cols = g.cols();
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    const double inv = 1.0 / d->value[i];
                    for (int j = 0; j < cols; ++j) ag.at(i, j) += g.at(i, j) * inv;
                }
            }
            if (d->requires_grad) {
                Tensor& dg = d->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < cols; ++j) acc += g.at(i, j) * n->value.at(i, j);
                    dg[i] -= acc / d->value[i];
                }
            }
            break;
        }
        case OpKind::concat_cols: {
            int offset = 0;
            for (Node* p : n->inputs) {
                const int w = p->value.cols();
                if (p->requires_grad) {
                    Tensor& pg = p->ensure_grad();
                    for (int i = 0; i < g.rows(); ++i) {
                        for (int j = 0; j < w; ++j) pg.at(i, j) += g.at(i, offset + j);
                    }
                }
                offset += w;
            }
            break;
        }
        case OpKind::concat_rows: {
            int offset = 0;
            for (Node* p : n->inputs) {
                const int h = p->value.rows();
                if (p->requires_grad) {
                    Tensor& pg = p->ensure_grad();
                    for (int i = 0; i < h; ++i) {
                        for (int j = 0; j < g.cols(); ++j) pg.at(i, j) += g.at(offset + i, j);
                    }
                }
                offset += h;
            }
            break;
        }
        case OpKind::slice_cols: {
            Node* a = n->inputs[0];
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                for (int i = 0; i < g.rows(); ++i) {
                    for (int j = 0; j < g.cols(); ++j) ag.at(i, n->begin + j) += g.at(i, j);
                }
            }
            break;
        }
        case OpKind::slice_rows: {
            Node* a = n->inputs[0];
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                for (int i = 0; i < g.rows(); ++i) {
                    for (int j = 0; j < g.cols(); ++j) ag.at(n->begin + i, j) += g.at(i, j);
                }
            }
            break;
        }
        case OpKind::tanh_fn: {
            Node* a = n->inputs[0];
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) {
                    const double y = n->value[i];
                    ag[i] += g[i] * (1.0 - y * y);
                }
            }
            break;
        }
        case OpKind::sigmoid_fn: {
            Node* a = n->inputs[0];
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) {
                    const double y = n->value[i];
                    ag[i] += g[i] * y * (1.0 - y);
                }
            }
            break;
        }
        case OpKind::softmax_rows: {
            Node* a = n->inputs[0];
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                const int m = g.rows(), cols = g.cols();
                for (int i = 0; i < m; ++i) {
                    double dot = 0.0;
                    for (int j = 0; j < cols; ++j) dot += g.at(i, j) * n->value.at(i, j);
                    for (int j = 0; j < cols; ++j) {
                        ag.at(i, j) += n->value.at(i, j) * (g.at(i, j) - dot);
                    }
                }
            }
            break;
        }
        case OpKind::l2norm_rows: {
            Node* a = n->inputs[0];
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                const int m = a->value.rows(), cols = a->value.cols();
                for (int i = 0; i < m; ++i) {
                    const double norm = n->value[i];
                    if (norm == 0.0) continue;
                    const double gi = g[i] / norm;
                    for (int j = 0; j < cols; ++j) ag.at(i, j) += gi * a->value.at(i, j);
                }
            }
            break;
        }
        case OpKind::recip_fn: {
            Node* a = n->inputs[0];
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) {
                    const double y = n->value[i];
                    ag[i] -= g[i] * y * y;
                }
            }
            break;
        }
        case OpKind::sum_all: {
            Node* a = n->inputs[0];
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                const double gv = g[0];
                for (size_t i = 0; i < ag.size(); ++i) ag[i] += gv;
            }
            break;
        }
        case OpKind::gather_rows: {
            Node* table = n->inputs[0];
            if (table->requires_grad) {
                Tensor& tg = table->ensure_grad();
                for (size_t i = 0; i < n->indices.size(); ++i) {
                    const int r = n->indices[i];
                    for (int j = 0; j < g.cols(); ++j) {
                        tg.at(r, j) += g.at(static_cast<int>(i), j);
                    }
                }
            }
            break;
        }
        case OpKind::rows_pick: {
            Node* a = n->inputs[0];
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                for (int i = 0; i < g.rows(); ++i) {
                    ag.at(i, n->indices[static_cast<size_t>(i)]) += g[i];
                }
            }
            break;
        }
        case OpKind::log_floor: {
            Node* a = n->inputs[0];
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) {
                    const double x = a->value[i];
                    if (x > n->scalar) ag[i] += g[i] / x;
                }
            }
            break;
        }
        case OpKind::dropout_mask: {
            Node* a = n->inputs[0];
            if (a->requires_grad) {
                Tensor& ag = a->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) ag[i] += g[i] * n->mask[i];
            }
            break;
        }
    }
}

}  // namespace

void Tape::backward(Node* loss) {
    if (loss->value.size() != 1) {
        throw contract_error("backward: loss must be scalar, got " + loss->value.shape_str());
    }

    // Iterative post-order DFS; the recorded order is a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss, 0);
    visited.insert(loss);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++];
            if (visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Fresh intermediate gradients per call; leaf gradients accumulate.
    for (Node* n : order) {
        if (n->kind != OpKind::leaf && n->grad.defined()) {
            n->grad.fill(0.0);
        }
    }
    if (loss->kind == OpKind::leaf) {
        loss->ensure_grad()[0] += 1.0;
        return;
    }
    loss->ensure_grad()[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->requires_grad || n->kind == OpKind::leaf) continue;
        if (!n->grad.defined()) continue;
        backward_step(n);
    }
}

FdResult finite_difference_check(Tensor& param, const Tensor& analytic_grad,
                                 const std::function<double()>& loss_fn, double epsilon,
                                 int max_coords, Rng& rng) {
    if (epsilon <= 0.0) throw contract_error("finite_difference_check: epsilon must be > 0");
    FdResult result;
    const long long total = static_cast<long long>(param.size());
    if (total == 0) return result;  // empty group: error 0 by convention

    std::vector<long long> coords;
    if (total <= max_coords) {
        coords.resize(static_cast<size_t>(total));
        for (long long i = 0; i < total; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
        std::unordered_set<long long> seen;
        while (static_cast<int>(coords.size()) < max_coords) {
            const long long c = static_cast<long long>(rng.next_u64() % static_cast<uint64_t>(total));
            if (seen.insert(c).second) coords.push_back(c);
        }
        std::sort(coords.begin(), coords.end());
    }

    for (const long long c : coords) {
        const size_t i = static_cast<size_t>(c);
        const double saved = param[i];
        param[i] = saved + epsilon;
        const double plus = loss_fn();
        param[i] = saved - epsilon;
        const double minus = loss_fn();
        param[i] = saved;
        const double central = (plus - minus) / (2.0 * epsilon);
        const double analytic = analytic_grad[i];
        if (!std::isfinite(central) || !std::isfinite(analytic)) {
            result.nan_encountered = true;
            result.worst_index = c;
            result.max_rel_err = std::numeric_limits<double>::infinity();
            return result;
        }
        const double rel = std::abs(analytic - central) / std::max(1.0, std::abs(central));
        if (rel > result.max_rel_err) {
            result.max_rel_err = rel;
            result.worst_index = c;
        }
    }
    return result;
}

}  // namespace mcted
