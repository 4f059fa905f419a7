#pragma once

#include <vector>

#include "mcted/autograd.hpp"
#include "mcted/corpus.hpp"

namespace mcted {

struct TypedEdge {
    int src = 0;
    int dst = 0;
    int relation = 0;  // index into the full relation inventory
};

// Per-sentence message-passing graph: every raw arc keeps its direction and
// gains an inverse-typed reverse edge; every node gets a self-loop. Messages
// flow src -> dst.
struct TypedGraph {
    int n = 0;
    std::vector<TypedEdge> edges;
    std::vector<int> node_types;  // word-type index per node
};

TypedGraph build_syntactic_graph(const ParsedSentence& sentence, const TypeInventories& inventories);

struct RelationChannelParameters {
    Tensor relation_table;  // |R| x d_r, learnable type vectors
    Tensor edge_update;     // (2*d_model + d_r) x d_r
    Tensor edge_score;      // d_r x 1, scores an edge vector down to a scalar
    std::vector<Tensor> layer_transforms;  // L of d_model x d_model
};

struct WordChannelParameters {
    Tensor type_table;  // |A| x d_w, learnable type vectors
    std::vector<Tensor> layer_transforms;  // L of (d_model+d_w) x (d_model+d_w)
};

struct SemanticChannelParameters {
    std::vector<Tensor> layer_transforms;  // L of d_model x d_model
    double threshold = 0.15;
};

struct BoundRelationChannel {
    Node* relation_table = nullptr;
    Node* edge_update = nullptr;
    Node* edge_score = nullptr;
    std::vector<Node*> layer_transforms;
};

struct BoundWordChannel {
    Node* type_table = nullptr;
    std::vector<Node*> layer_transforms;
};

struct BoundSemanticChannel {
    std::vector<Node*> layer_transforms;
};

struct RelationChannelOutput {
    Node* nodes = nullptr;          // N x d_model
    Node* edges = nullptr;          // |edges| x d_r (null in untyped mode)
    Node* initial_edges = nullptr;  // the layer-0 gather from the type table
};

// Edge vectors start as gathered relation-type rows; per layer, each edge is
// scored down to a scalar sigmoid weight, nodes aggregate score-weighted
// neighbor messages normalized by the incoming score mass, and edge vectors
// are refreshed from [edge || h_src || h_dst]. untyped drops the whole edge
// machinery and aggregates with uniform weights (the homogeneous ablation).
RelationChannelOutput relation_channel_forward(Node* h0, const TypedGraph& graph,
                                               const BoundRelationChannel& channel,
                                               bool untyped = false);

struct WordChannelOutput {
    Node* nodes = nullptr;          // N x d_model
    Node* types = nullptr;          // N x d_w
    Node* initial_types = nullptr;  // the layer-0 gather from the type table
};

// Node features ride together with their gathered word-type vectors through
// uniformly-weighted aggregation; the node half feeds fusion, the type half
// trains the type table.
WordChannelOutput word_channel_forward(Node* h0, const TypedGraph& graph,
                                       const BoundWordChannel& channel);

// Cosine-similarity adjacency with threshold cut, forced unit diagonal,
// symmetric. Rows with zero norm get zero similarity to everything.
Tensor semantic_adjacency(const Tensor& h, double threshold);

// L rounds of normalized aggregation over a fixed adjacency snapshot;
// gradients flow through node features and transforms only.
Node* semantic_channel_forward(Node* h0, const Tensor& adjacency,
                               const BoundSemanticChannel& channel);

}  // namespace mcted
