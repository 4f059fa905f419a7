#pragma once

#include <vector>

#include "mcted/autograd.hpp"
#include "mcted/corpus.hpp"

namespace mcted {

// One direction of the recurrent encoder. Gates are packed [input, forget,
// cell, output] along the 4*d_hidden axis.
struct LstmCellParameters {
    Tensor w_input;      // d_word x 4*d_hidden
    Tensor w_recurrent;  // d_hidden x 4*d_hidden
    Tensor bias;         // 1 x 4*d_hidden
};

struct EncoderParameters {
    Tensor embedding;  // |V| x d_word
    LstmCellParameters forward_cell;
    LstmCellParameters backward_cell;
    int d_word = 0;
    int d_hidden = 0;

    int d_model() const { return 2 * d_hidden; }
};

struct BoundLstmCell {
    Node* w_input = nullptr;
    Node* w_recurrent = nullptr;
    Node* bias = nullptr;
};

struct BoundEncoder {
    Node* embedding = nullptr;
    BoundLstmCell forward_cell;
    BoundLstmCell backward_cell;
    int d_hidden = 0;
};

std::vector<int> token_indices(const ParsedSentence& sentence, const Vocabulary& vocab);

// Row i of the result is the embedding-table row of token i.
Node* embed(const std::vector<int>& indices, Node* embedding_table);

// Contextual representations: row i is concat(forward_state_i, backward_state_i),
// zero initial states, one recurrent layer per direction.
Node* encode(Node* x, const BoundEncoder& encoder);

}  // namespace mcted
