#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcted/corpus.hpp"
#include "mcted/detector.hpp"
#include "mcted/encoder.hpp"
#include "mcted/graphs.hpp"

namespace mcted {

struct Hyperparameters {
    double learning_rate = 0.15;
    double l2_coefficient = 0.001;
    int epochs = 100;
    int batch_size = 10;
    int layers = 2;
    int d_word = 100;
    int d_model = 150;  // must be even: two recurrent directions of d_model/2
    int d_r = 25;
    int d_w = 25;
    double dropout_rate = 0.60;
    double rho_sem = 0.15;
    double lambda1 = 2.0;
    double lambda2 = 1.0;
    double lambda3 = 2.0;
    bool lambdas_learnable = false;
    int patience = 100;
    uint64_t seed = 7;
    int min_count = 1;
    double train_ratio = 0.8;
    double valid_ratio = 0.1;
    double test_ratio = 0.1;

    void validate() const;

    // Scaled-down preset for the bundled generator: the defaults above suit
    // corpus-scale runs, these suit quick desk experiments.
    static Hyperparameters synthetic_defaults();
};

// Flat key=value text, keys matching the field names above; '#' comments.
Hyperparameters parse_config(const std::string& text);
Hyperparameters load_config_file(const std::string& path);
std::string serialize_config(const Hyperparameters& hp);

// Channel subsets and module freezes used by the ablation harness. G1 is the
// relation-type channel, G2 the word-type channel, G3 the semantic channel.
struct VariantSpec {
    std::string name = "G1+G2+G3";
    bool use_relation = true;
    bool use_word = true;
    bool use_semantic = true;
    bool freeze_relation_table = false;
    bool freeze_word_table = false;
    bool untyped_topology = false;

    static VariantSpec from_name(const std::string& name);
};

struct ModelParameters {
    EncoderParameters encoder;
    RelationChannelParameters relation;
    WordChannelParameters word;
    SemanticChannelParameters semantic;
    FusionParameters fusion;
    ClassifierParameters classifier;
};

struct Model {
    Hyperparameters hp;
    Vocabulary vocab;
    TypeInventories inventories;
    std::vector<std::string> labels;  // index 0 is NONE
    ModelParameters params;

    int label_index(const std::string& label) const;  // throws validation_error
};

// NONE first, remaining labels sorted.
std::vector<std::string> collect_labels(const std::vector<ParsedSentence>& corpus);

// Gaussian(0, 0.1) init for every learnable tensor; fusion weights start at
// the configured lambda values.
Model init_model(const Hyperparameters& hp, Vocabulary vocab, TypeInventories inventories,
                 std::vector<std::string> labels);

struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    bool trainable = true;
};

// Every parameter tensor in a fixed order (checkpoints, Adam state and
// gradient checks all share it). Variant freezes flip `trainable`.
std::vector<ParamRef> parameter_refs(ModelParameters& params, bool lambdas_learnable,
                                     const VariantSpec& variant = {});

struct BoundModel {
    BoundEncoder encoder;
    BoundRelationChannel relation;
    BoundWordChannel word;
    BoundSemanticChannel semantic;
    Node* classifier_weight = nullptr;
    Node* classifier_bias = nullptr;
    Node* lambdas = nullptr;  // bound only when fusion weights are learnable
    std::vector<std::pair<std::string, Node*>> leaves;  // parallel to parameter_refs
};

BoundModel bind_model(Tape& tape, Model& model, const VariantSpec& variant = {});

struct ForwardOptions {
    bool training = false;
    uint64_t dropout_seed = 0;
    // Freezes the semantic graph for deterministic loss evaluations
    // (finite-difference checks); normally it is rebuilt from the current
    // encoder output on every pass.
    const Tensor* semantic_adjacency_override = nullptr;
    VariantSpec variant;
};

struct SentenceForward {
    Node* h0 = nullptr;
    Node* fused = nullptr;
    Node* probabilities = nullptr;
    Node* loss = nullptr;  // null when built without gold labels
};

SentenceForward model_forward(const BoundModel& bound, const Model& model,
                              const ParsedSentence& sentence, const ForwardOptions& options,
                              bool with_loss);

struct Prediction {
    std::vector<std::string> labels;
    Tensor distributions;  // N x (|T|+1)
};

// Full pipeline in evaluation mode: dropout off, adjacency rebuilt, argmax
// with lowest-index tie-break.
Prediction predict(const ParsedSentence& sentence, Model& model,
                   const VariantSpec& variant = {});

// Versioned binary container with vocab, inventories, labels, config and all
// parameter tensors; round-trips bit-exactly.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace mcted
