#pragma once

#include <array>
#include <vector>

#include "mcted/autograd.hpp"

namespace mcted {

struct FusionParameters {
    Tensor lambdas;  // 1 x 3, non-negative with positive sum
    bool learnable = false;
};

struct ClassifierParameters {
    Tensor weight;  // d_model x (|T|+1), the extra class is NONE
    Tensor bias;    // 1 x (|T|+1)
};

// Weighted sum of channel outputs normalized by the weight mass. Disabled
// channels are passed as nullptr and must carry weight 0.
Node* fuse(const std::array<Node*, 3>& channels, const std::array<double, 3>& lambdas);
// Same contract with the weights read from a 1x3 leaf so they can train.
Node* fuse_learnable(const std::array<Node*, 3>& channels, Node* lambda_leaf);

// Row-wise class distribution over token representations.
Node* classify(Node* z, Node* weight, Node* bias);

// Negative log-likelihood summed over tokens; probabilities are floored at
// 1e-12 before the log.
Node* nll_loss(Node* probabilities, const std::vector<int>& gold_classes);

// Lowest index wins ties, so predictions are stable across platforms.
int argmax_row(const Tensor& matrix, int row);

}  // namespace mcted
