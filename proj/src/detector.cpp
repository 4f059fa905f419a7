#include "mcted/detector.hpp"

#include "mcted/util.hpp"

namespace mcted {

namespace {
constexpr double kLogFloor = 1e-12;
}

Node* fuse(const std::array<Node*, 3>& channels, const std::array<double, 3>& lambdas) {
    double mass = 0.0;
    Node* weighted = nullptr;
    for (size_t i = 0; i < 3; ++i) {
        if (lambdas[i] < 0.0) throw contract_error("fuse: negative weight");
        if (channels[i] == nullptr) {
            if (lambdas[i] != 0.0) throw contract_error("fuse: missing channel with nonzero weight");
            continue;
        }
        mass += lambdas[i];
        Node* term = scale(channels[i], lambdas[i]);
        weighted = weighted == nullptr ? term : add(weighted, term);
    }
    if (weighted == nullptr || mass <= 0.0) {
        throw contract_error("fuse: weight mass must be positive");
    }
    return scale(weighted, 1.0 / mass);
}

Node* fuse_learnable(const std::array<Node*, 3>& channels, Node* lambda_leaf) {
    if (lambda_leaf->value.rows() != 1 || lambda_leaf->value.cols() != 3) {
        throw dimension_error("fuse_learnable: lambda leaf " + lambda_leaf->value.shape_str());
    }
    Node* weighted = nullptr;
    Node* mass = nullptr;
    for (int i = 0; i < 3; ++i) {
        if (channels[static_cast<size_t>(i)] == nullptr) continue;
        Node* li = slice_cols(lambda_leaf, i, i + 1);
        Node* term = scale_by(channels[static_cast<size_t>(i)], li);
        weighted = weighted == nullptr ? term : add(weighted, term);
        mass = mass == nullptr ? li : add(mass, li);
    }
    if (weighted == nullptr) throw contract_error("fuse_learnable: no active channel");
    return scale_by(weighted, recip(mass));
}

Node* classify(Node* z, Node* weight, Node* bias) {
    return softmax_rows(add_rowvec(matmul(z, weight), bias));
}

Node* nll_loss(Node* probabilities, const std::vector<int>& gold_classes) {
    return scale(sum_all(log_floor(rows_pick(probabilities, gold_classes), kLogFloor)), -1.0);
}

int argmax_row(const Tensor& matrix, int row) {
    int best = 0;
    double best_value = matrix.at(row, 0);
    for (int j = 1; j < matrix.cols(); ++j) {
        if (matrix.at(row, j) > best_value) {
            best_value = matrix.at(row, j);
            best = j;
        }
    }
    return best;
}

}  // namespace mcted
