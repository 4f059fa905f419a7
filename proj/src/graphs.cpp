#include "mcted/graphs.hpp"

#include <cmath>

#include "mcted/util.hpp"

namespace mcted {

TypedGraph build_syntactic_graph(const ParsedSentence& sentence,
                                 const TypeInventories& inventories) {
    TypedGraph graph;
    graph.n = sentence.size();
    graph.node_types.reserve(static_cast<size_t>(graph.n));
    for (const std::string& pos : sentence.pos_tags) {
        graph.node_types.push_back(inventories.word_type_index(pos));
    }
    for (const ParsedArc& arc : sentence.arcs) {
        const int base = inventories.base_relation_index(arc.relation);
        graph.edges.push_back(TypedEdge{arc.head, arc.dependent, base});
        graph.edges.push_back(
            TypedEdge{arc.dependent, arc.head, inventories.inverse_relation_index(base)});
    }
    for (int i = 0; i < graph.n; ++i) {
        graph.edges.push_back(TypedEdge{i, i, inventories.self_loop_index()});
    }
    return graph;
}

namespace {

// 0/1 matrices routing node rows to edge slots and edge messages to their
// destination nodes. Dense is fine at sentence scale.
struct EdgeIncidence {
    Node* src_gather = nullptr;   // |E| x n, picks the source row of each edge
    Node* dst_gather = nullptr;   // |E| x n, picks the destination row
    Node* dst_scatter = nullptr;  // n x |E|, sums edge rows into their destination
};

EdgeIncidence make_incidence(Tape& tape, const TypedGraph& graph) {
    const int ne = static_cast<int>(graph.edges.size());
    Tensor src(ne, graph.n);
    Tensor dst(ne, graph.n);
    Tensor scatter(graph.n, ne);
    for (int e = 0; e < ne; ++e) {
        const TypedEdge& edge = graph.edges[static_cast<size_t>(e)];
        src.at(e, edge.src) = 1.0;
        dst.at(e, edge.dst) = 1.0;
        scatter.at(edge.dst, e) = 1.0;
    }
    return EdgeIncidence{tape.constant(std::move(src)), tape.constant(std::move(dst)),
                         tape.constant(std::move(scatter))};
}

// Row-normalized uniform adjacency (self-loops are already edges).
Tensor uniform_propagation(const TypedGraph& graph) {
    Tensor p(graph.n, graph.n);
    std::vector<double> degree(static_cast<size_t>(graph.n), 0.0);
    for (const TypedEdge& e : graph.edges) {
        p.at(e.dst, e.src) += 1.0;
        degree[static_cast<size_t>(e.dst)] += 1.0;
    }
    for (int i = 0; i < graph.n; ++i) {
        for (int j = 0; j < graph.n; ++j) p.at(i, j) /= degree[static_cast<size_t>(i)];
    }
    return p;
}

}  // namespace

RelationChannelOutput relation_channel_forward(Node* h0, const TypedGraph& graph,
                                               const BoundRelationChannel& channel,
                                               bool untyped) {
    Tape& tape = *h0->tape;
    if (static_cast<int>(graph.node_types.size()) != h0->value.rows()) {
        throw dimension_error("relation_channel_forward: graph has " +
                              std::to_string(graph.node_types.size()) + " nodes, features " +
                              h0->value.shape_str());
    }

    if (untyped) {
        Node* p = tape.constant(uniform_propagation(graph));
        Node* h = h0;
        for (Node* w : channel.layer_transforms) {
            h = tanh(matmul(matmul(p, h), w));
        }
        return RelationChannelOutput{h, nullptr, nullptr};
    }

    const EdgeIncidence inc = make_incidence(tape, graph);
    std::vector<int> edge_types;
    edge_types.reserve(graph.edges.size());
    for (const TypedEdge& e : graph.edges) edge_types.push_back(e.relation);

    Node* edge_state = gather_rows(channel.relation_table, edge_types);
    Node* initial_edges = edge_state;
    Node* h = h0;
    for (Node* w : channel.layer_transforms) {
        Node* scores = sigmoid(matmul(edge_state, channel.edge_score));  // |E| x 1
        Node* messages = scale_rows(matmul(inc.src_gather, h), scores);
        Node* pooled = matmul(inc.dst_scatter, messages);    // n x d
        Node* score_mass = matmul(inc.dst_scatter, scores);  // n x 1
        h = tanh(matmul(div_rows(pooled, score_mass), w));
        Node* src_states = matmul(inc.src_gather, h);
        Node* dst_states = matmul(inc.dst_gather, h);
        edge_state = matmul(concat_cols({edge_state, src_states, dst_states}),
                            channel.edge_update);
    }
    return RelationChannelOutput{h, edge_state, initial_edges};
}

WordChannelOutput word_channel_forward(Node* h0, const TypedGraph& graph,
                                       const BoundWordChannel& channel) {
    Tape& tape = *h0->tape;
    const int d_model = h0->value.cols();
    Node* type_state = gather_rows(channel.type_table, graph.node_types);
    Node* p = tape.constant(uniform_propagation(graph));
    Node* x = concat_cols({h0, type_state});
    for (Node* w : channel.layer_transforms) {
        x = tanh(matmul(matmul(p, x), w));
    }
    return WordChannelOutput{slice_cols(x, 0, d_model),
                             slice_cols(x, d_model, x->value.cols()), type_state};
}

Tensor semantic_adjacency(const Tensor& h, double threshold) {
    const int n = h.rows(), d = h.cols();
    std::vector<double> norms(static_cast<size_t>(n), 0.0);
    bool warned = false;
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += h.at(i, k) * h.at(i, k);
        norms[static_cast<size_t>(i)] = std::sqrt(acc);
        if (norms[static_cast<size_t>(i)] == 0.0 && !warned) {
            log_info("semantic_adjacency: zero-norm row " + std::to_string(i) +
                     ", treating its similarities as 0");
            warned = true;
        }
    }
    Tensor alpha(n, n);
    for (int i = 0; i < n; ++i) {
        alpha.at(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            double value = 0.0;
            if (norms[static_cast<size_t>(i)] > 0.0 && norms[static_cast<size_t>(j)] > 0.0) {
                double dot = 0.0;
                for (int k = 0; k < d; ++k) dot += h.at(i, k) * h.at(j, k);
                const double cosine = dot / (norms[static_cast<size_t>(i)] *
                                             norms[static_cast<size_t>(j)]);
                value = cosine >= threshold ? cosine : 0.0;
            }
            alpha.at(i, j) = value;
            alpha.at(j, i) = value;
        }
    }
    return alpha;
}

Node* semantic_channel_forward(Node* h0, const Tensor& adjacency,
                               const BoundSemanticChannel& channel) {
    Tape& tape = *h0->tape;
    const int n = adjacency.rows();
    if (adjacency.cols() != n || n != h0->value.rows()) {
        throw dimension_error("semantic_channel_forward: adjacency " + adjacency.shape_str() +
                              " vs features " + h0->value.shape_str());
    }
    Tensor p = adjacency;
    for (int i = 0; i < n; ++i) {
        double mass = 0.0;
        for (int j = 0; j < n; ++j) mass += p.at(i, j);
        for (int j = 0; j < n; ++j) p.at(i, j) /= mass;  // diagonal is 1, so mass >= 1
    }
    Node* propagation = tape.constant(std::move(p));
    Node* h = h0;
    for (Node* w : channel.layer_transforms) {
        h = tanh(matmul(matmul(propagation, h), w));
    }
    return h;
}

}  // namespace mcted
