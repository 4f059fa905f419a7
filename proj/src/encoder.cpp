#include "mcted/encoder.hpp"

namespace mcted {

std::vector<int> token_indices(const ParsedSentence& sentence, const Vocabulary& vocab) {
    std::vector<int> indices;
    indices.reserve(sentence.tokens.size());
    for (const std::string& token : sentence.tokens) {
        indices.push_back(vocab.index_of(token));
    }
    return indices;
}

Node* embed(const std::vector<int>& indices, Node* embedding_table) {
    return gather_rows(embedding_table, indices);
}

namespace {

std::vector<Node*> recurrent_states(Node* x, const BoundLstmCell& cell, int d_hidden,
                                    bool reverse) {
    const int n = x->value.rows();
    Tape& tape = *x->tape;
    Node* h = tape.constant(Tensor(1, d_hidden));
    Node* c = tape.constant(Tensor(1, d_hidden));
    std::vector<Node*> states(static_cast<size_t>(n), nullptr);
    for (int step = 0; step < n; ++step) {
        const int t = reverse ? n - 1 - step : step;
        Node* xt = slice_rows(x, t, t + 1);
        Node* gates =
            add_rowvec(add(matmul(xt, cell.w_input), matmul(h, cell.w_recurrent)), cell.bias);
        Node* input_gate = sigmoid(slice_cols(gates, 0, d_hidden));
        Node* forget_gate = sigmoid(slice_cols(gates, d_hidden, 2 * d_hidden));
        Node* cell_update = tanh(slice_cols(gates, 2 * d_hidden, 3 * d_hidden));
        Node* output_gate = sigmoid(slice_cols(gates, 3 * d_hidden, 4 * d_hidden));
        c = add(mul(forget_gate, c), mul(input_gate, cell_update));
        h = mul(output_gate, tanh(c));
        states[static_cast<size_t>(t)] = h;
    }
    return states;
}

}  // namespace

Node* encode(Node* x, const BoundEncoder& encoder) {
    const std::vector<Node*> forward = recurrent_states(x, encoder.forward_cell,
                                                        encoder.d_hidden, false);
    const std::vector<Node*> backward = recurrent_states(x, encoder.backward_cell,
                                                         encoder.d_hidden, true);
    std::vector<Node*> rows;
    rows.reserve(forward.size());
    for (size_t i = 0; i < forward.size(); ++i) {
        rows.push_back(concat_cols({forward[i], backward[i]}));
    }
    if (rows.size() == 1) return rows[0];
    return concat_rows(rows);
}

}  // namespace mcted
