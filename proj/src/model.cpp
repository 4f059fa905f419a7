#include "mcted/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "mcted/rng.hpp"
#include "mcted/util.hpp"

namespace mcted {

void Hyperparameters::validate() const {
    if (learning_rate <= 0.0) throw config_error("learning_rate must be > 0");
    if (l2_coefficient < 0.0) throw config_error("l2_coefficient must be >= 0");
    if (epochs < 1) throw config_error("epochs must be >= 1");
    if (batch_size < 1) throw config_error("batch_size must be >= 1");
    if (layers < 1) throw config_error("layers must be >= 1");
    if (d_word < 1 || d_r < 1 || d_w < 1) throw config_error("dimensions must be >= 1");
    if (d_model < 2 || d_model % 2 != 0) {
        throw config_error("d_model must be even and >= 2, got " + std::to_string(d_model));
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw config_error("dropout_rate must be in [0,1)");
    }
    if (rho_sem < 0.0 || rho_sem > 1.0) throw config_error("rho_sem must be in [0,1]");
    if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0 || lambda1 + lambda2 + lambda3 <= 0.0) {
        throw config_error("lambda weights must be non-negative with positive sum");
    }
    if (patience < 1) throw config_error("patience must be >= 1");
    if (min_count < 1) throw config_error("min_count must be >= 1");
    const double ratio_sum = train_ratio + valid_ratio + test_ratio;
    if (train_ratio < 0.0 || valid_ratio < 0.0 || test_ratio < 0.0 ||
        std::abs(ratio_sum - 1.0) > 1e-9) {
        throw config_error("split ratios must be non-negative and sum to 1");
    }
}

Hyperparameters Hyperparameters::synthetic_defaults() {
    Hyperparameters hp;
    hp.learning_rate = 0.02;
    hp.epochs = 80;
    hp.batch_size = 10;
    hp.d_word = 32;
    hp.d_model = 40;
    hp.d_r = 10;
    hp.d_w = 10;
    hp.dropout_rate = 0.05;
    hp.rho_sem = 0.15;
    hp.patience = 20;
    return hp;
}

Hyperparameters parse_config(const std::string& text) {
    Hyperparameters hp;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        // strip whitespace
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t");
        line = line.substr(first, last - first + 1);
        if (line.empty() || line[0] == '#') continue;

        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error("config line " + std::to_string(line_no) + ": expected key=value");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto trim = [](std::string& s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        trim(key);
        trim(value);
        if (key.empty() || value.empty()) {
            throw config_error("config line " + std::to_string(line_no) + ": empty key or value");
        }

        const auto as_double = [&] {
            try {
                size_t pos = 0;
                const double v = std::stod(value, &pos);
                if (pos != value.size()) throw std::invalid_argument(value);
                return v;
            } catch (const std::exception&) {
                throw config_error("config line " + std::to_string(line_no) + ": bad number '" +
                                   value + "' for " + key);
            }
        };
        const auto as_int = [&] {
            const double v = as_double();
            if (v != std::floor(v)) {
                throw config_error("config line " + std::to_string(line_no) + ": " + key +
                                   " must be an integer");
            }
            return static_cast<int>(v);
        };
        const auto as_bool = [&] {
            if (value == "true" || value == "1") return true;
            if (value == "false" || value == "0") return false;
            throw config_error("config line " + std::to_string(line_no) + ": " + key +
                               " must be true/false");
        };

        if (key == "learning_rate") hp.learning_rate = as_double();
        else if (key == "l2_coefficient") hp.l2_coefficient = as_double();
        else if (key == "epochs") hp.epochs = as_int();
        else if (key == "batch_size") hp.batch_size = as_int();
        else if (key == "layers") hp.layers = as_int();
        else if (key == "d_word") hp.d_word = as_int();
        else if (key == "d_model") hp.d_model = as_int();
        else if (key == "d_r") hp.d_r = as_int();
        else if (key == "d_w") hp.d_w = as_int();
        else if (key == "dropout_rate") hp.dropout_rate = as_double();
        else if (key == "rho_sem") hp.rho_sem = as_double();
        else if (key == "lambda1") hp.lambda1 = as_double();
        else if (key == "lambda2") hp.lambda2 = as_double();
        else if (key == "lambda3") hp.lambda3 = as_double();
        else if (key == "lambdas_learnable") hp.lambdas_learnable = as_bool();
        else if (key == "patience") hp.patience = as_int();
        else if (key == "seed") hp.seed = static_cast<uint64_t>(as_double());
        else if (key == "min_count") hp.min_count = as_int();
        else if (key == "train_ratio") hp.train_ratio = as_double();
        else if (key == "valid_ratio") hp.valid_ratio = as_double();
        else if (key == "test_ratio") hp.test_ratio = as_double();
        else throw config_error("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    hp.validate();
    return hp;
}

Hyperparameters load_config_file(const std::string& path) {
    return parse_config(read_text_file(path));
}

std::string serialize_config(const Hyperparameters& hp) {
    std::ostringstream out;
    out << "learning_rate=" << format_double(hp.learning_rate) << "\n";
    out << "l2_coefficient=" << format_double(hp.l2_coefficient) << "\n";
    out << "epochs=" << hp.epochs << "\n";
    out << "batch_size=" << hp.batch_size << "\n";
    out << "layers=" << hp.layers << "\n";
    out << "d_word=" << hp.d_word << "\n";
    out << "d_model=" << hp.d_model << "\n";
    out << "d_r=" << hp.d_r << "\n";
    out << "d_w=" << hp.d_w << "\n";
    out << "dropout_rate=" << format_double(hp.dropout_rate) << "\n";
    out << "rho_sem=" << format_double(hp.rho_sem) << "\n";
    out << "lambda1=" << format_double(hp.lambda1) << "\n";
    out << "lambda2=" << format_double(hp.lambda2) << "\n";
    out << "lambda3=" << format_double(hp.lambda3) << "\n";
    out << "lambdas_learnable=" << (hp.lambdas_learnable ? "true" : "false") << "\n";
    out << "patience=" << hp.patience << "\n";
    out << "seed=" << hp.seed << "\n";
    out << "min_count=" << hp.min_count << "\n";
    out << "train_ratio=" << format_double(hp.train_ratio) << "\n";
    out << "valid_ratio=" << format_double(hp.valid_ratio) << "\n";
    out << "test_ratio=" << format_double(hp.test_ratio) << "\n";
    return out.str();
}

VariantSpec VariantSpec::from_name(const std::string& name) {
    VariantSpec v;
    v.name = name;
    if (name == "G1+G2+G3" || name == "full") {
        return v;
    }
    if (name == "G1") {
        v.use_word = v.use_semantic = false;
    } else if (name == "G2") {
        v.use_relation = v.use_semantic = false;
    } else if (name == "G3") {
        v.use_relation = v.use_word = false;
    } else if (name == "G1+G2") {
        v.use_semantic = false;
    } else if (name == "G1+G3") {
        v.use_word = false;
    } else if (name == "G2+G3") {
        v.use_relation = false;
    } else if (name == "freeze-R") {
        v.freeze_relation_table = true;
    } else if (name == "freeze-A") {
        v.freeze_word_table = true;
    } else if (name == "homogeneous") {
        v.untyped_topology = true;
        v.use_word = false;
    } else {
        throw validation_error("unknown variant: " + name);
    }
    return v;
}

int Model::label_index(const std::string& label) const {
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return static_cast<int>(i);
    }
    throw validation_error("label not in model label set: " + label);
}

std::vector<std::string> collect_labels(const std::vector<ParsedSentence>& corpus) {
    std::set<std::string> events;
    for (const ParsedSentence& s : corpus) {
        for (const std::string& label : s.labels) {
            if (label != kNoneLabel) events.insert(label);
        }
    }
    std::vector<std::string> labels = {kNoneLabel};
    labels.insert(labels.end(), events.begin(), events.end());
    return labels;
}

namespace {

Tensor gaussian_tensor(int rows, int cols, Rng& rng, double stddev = 0.1) {
    Tensor t(rows, cols);
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian(0.0, stddev);
    return t;
}

}  // namespace

Model init_model(const Hyperparameters& hp, Vocabulary vocab, TypeInventories inventories,
                 std::vector<std::string> labels) {
    hp.validate();
    if (labels.empty() || labels[0] != kNoneLabel) {
        throw contract_error("init_model: label set must start with NONE");
    }
    Model model;
    model.hp = hp;
    model.vocab = std::move(vocab);
    model.inventories = std::move(inventories);
    model.labels = std::move(labels);

    Rng rng(derive_seed(hp.seed, "init"));
    const int d_hidden = hp.d_model / 2;
    const int classes = static_cast<int>(model.labels.size());

    EncoderParameters& enc = model.params.encoder;
    enc.d_word = hp.d_word;
    enc.d_hidden = d_hidden;
    // Unit-scale word vectors, the magnitude pretrained embeddings arrive
    // at; weight matrices stay at 0.1.
    enc.embedding = gaussian_tensor(model.vocab.size(), hp.d_word, rng, 1.0);
    for (LstmCellParameters* cell : {&enc.forward_cell, &enc.backward_cell}) {
        cell->w_input = gaussian_tensor(hp.d_word, 4 * d_hidden, rng);
        cell->w_recurrent = gaussian_tensor(d_hidden, 4 * d_hidden, rng);
        cell->bias = gaussian_tensor(1, 4 * d_hidden, rng);
    }

    // Type tables and the edge-scoring vector start wider than the rest:
    // edge scores are sigmoids of table-vector dot products, and an O(1)
    // spread at init gives distinct relation types distinct mixing weights
    // from the first step.
    RelationChannelParameters& rel = model.params.relation;
    rel.relation_table =
        gaussian_tensor(model.inventories.relation_type_count(), hp.d_r, rng, 0.5);
    rel.edge_update = gaussian_tensor(2 * hp.d_model + hp.d_r, hp.d_r, rng);
    rel.edge_score = gaussian_tensor(hp.d_r, 1, rng, 1.0);
    for (int l = 0; l < hp.layers; ++l) {
        rel.layer_transforms.push_back(gaussian_tensor(hp.d_model, hp.d_model, rng));
    }

    WordChannelParameters& word = model.params.word;
    word.type_table = gaussian_tensor(model.inventories.word_type_count(), hp.d_w, rng, 0.5);
    for (int l = 0; l < hp.layers; ++l) {
        word.layer_transforms.push_back(
            gaussian_tensor(hp.d_model + hp.d_w, hp.d_model + hp.d_w, rng));
    }

    SemanticChannelParameters& sem = model.params.semantic;
    sem.threshold = hp.rho_sem;
    for (int l = 0; l < hp.layers; ++l) {
        sem.layer_transforms.push_back(gaussian_tensor(hp.d_model, hp.d_model, rng));
    }

    model.params.fusion.lambdas = Tensor::row({hp.lambda1, hp.lambda2, hp.lambda3});
    model.params.fusion.learnable = hp.lambdas_learnable;

    model.params.classifier.weight = gaussian_tensor(hp.d_model, classes, rng);
    model.params.classifier.bias = gaussian_tensor(1, classes, rng);
    return model;
}

std::vector<ParamRef> parameter_refs(ModelParameters& params, bool lambdas_learnable,
                                     const VariantSpec& variant) {
    std::vector<ParamRef> refs;
    const auto push = [&](std::string name, Tensor& t, bool trainable = true) {
        refs.push_back(ParamRef{std::move(name), &t, trainable});
    };
    push("embedding", params.encoder.embedding);
    push("encoder_fwd_w_input", params.encoder.forward_cell.w_input);
    push("encoder_fwd_w_recurrent", params.encoder.forward_cell.w_recurrent);
    push("encoder_fwd_bias", params.encoder.forward_cell.bias);
    push("encoder_bwd_w_input", params.encoder.backward_cell.w_input);
    push("encoder_bwd_w_recurrent", params.encoder.backward_cell.w_recurrent);
    push("encoder_bwd_bias", params.encoder.backward_cell.bias);
    push("relation_type_table", params.relation.relation_table, !variant.freeze_relation_table);
    push("relation_edge_update", params.relation.edge_update);
    push("relation_edge_score", params.relation.edge_score);
    for (size_t l = 0; l < params.relation.layer_transforms.size(); ++l) {
        push("relation_layer_" + std::to_string(l), params.relation.layer_transforms[l]);
    }
    push("word_type_table", params.word.type_table, !variant.freeze_word_table);
    for (size_t l = 0; l < params.word.layer_transforms.size(); ++l) {
        push("word_layer_" + std::to_string(l), params.word.layer_transforms[l]);
    }
    for (size_t l = 0; l < params.semantic.layer_transforms.size(); ++l) {
        push("semantic_layer_" + std::to_string(l), params.semantic.layer_transforms[l]);
    }
    push("classifier_weight", params.classifier.weight);
    push("classifier_bias", params.classifier.bias);
    push("fusion_lambdas", params.fusion.lambdas, lambdas_learnable);
    return refs;
}

BoundModel bind_model(Tape& tape, Model& model, const VariantSpec& variant) {
    BoundModel bound;
    const std::vector<ParamRef> refs =
        parameter_refs(model.params, model.params.fusion.learnable, variant);
    std::vector<Node*> leaves;
    for (const ParamRef& ref : refs) {
        Node* leaf = tape.leaf(*ref.value, ref.trainable, ref.name);
        leaves.push_back(leaf);
        bound.leaves.emplace_back(ref.name, leaf);
    }

    size_t i = 0;
    const auto next = [&] { return leaves[i++]; };
    bound.encoder.embedding = next();
    bound.encoder.forward_cell = BoundLstmCell{next(), next(), next()};
    bound.encoder.backward_cell = BoundLstmCell{next(), next(), next()};
    bound.encoder.d_hidden = model.params.encoder.d_hidden;
    bound.relation.relation_table = next();
    bound.relation.edge_update = next();
    bound.relation.edge_score = next();
    for (size_t l = 0; l < model.params.relation.layer_transforms.size(); ++l) {
        bound.relation.layer_transforms.push_back(next());
    }
    bound.word.type_table = next();
    for (size_t l = 0; l < model.params.word.layer_transforms.size(); ++l) {
        bound.word.layer_transforms.push_back(next());
    }
    for (size_t l = 0; l < model.params.semantic.layer_transforms.size(); ++l) {
        bound.semantic.layer_transforms.push_back(next());
    }
    bound.classifier_weight = next();
    bound.classifier_bias = next();
    bound.lambdas = next();
    return bound;
}

SentenceForward model_forward(const BoundModel& bound, const Model& model,
                              const ParsedSentence& sentence, const ForwardOptions& options,
                              bool with_loss) {
    const Hyperparameters& hp = model.hp;
    const VariantSpec& variant = options.variant;

    SentenceForward out;
    Node* x = embed(token_indices(sentence, model.vocab), bound.encoder.embedding);
    Node* h0 = encode(x, bound.encoder);
    out.h0 = h0;

    // The semantic graph is built from the raw encoder output; dropout noise
    // stays out of the adjacency.
    Tensor adjacency;
    if (variant.use_semantic) {
        adjacency = options.semantic_adjacency_override != nullptr
                        ? *options.semantic_adjacency_override
                        : semantic_adjacency(h0->value, hp.rho_sem);
    }

    Rng dropout_rng(derive_seed(options.dropout_seed, "dropout-mask"));
    if (options.training && hp.dropout_rate > 0.0) {
        h0 = dropout(h0, hp.dropout_rate, dropout_rng);
    }

    TypedGraph graph;
    if (variant.use_relation || variant.use_word) {
        graph = build_syntactic_graph(sentence, model.inventories);
    }

    std::array<Node*, 3> channels{nullptr, nullptr, nullptr};
    if (variant.use_relation) {
        channels[0] = relation_channel_forward(h0, graph, bound.relation,
                                               variant.untyped_topology).nodes;
    }
    if (variant.use_word) {
        channels[1] = word_channel_forward(h0, graph, bound.word).nodes;
    }
    if (variant.use_semantic) {
        channels[2] = semantic_channel_forward(h0, adjacency, bound.semantic);
    }

    Node* z = nullptr;
    if (model.params.fusion.learnable) {
        z = fuse_learnable(channels, bound.lambdas);
    } else {
        const Tensor& lambdas = model.params.fusion.lambdas;
        z = fuse(channels, {variant.use_relation ? lambdas[0] : 0.0,
                            variant.use_word ? lambdas[1] : 0.0,
                            variant.use_semantic ? lambdas[2] : 0.0});
    }
    if (options.training && hp.dropout_rate > 0.0) {
        z = dropout(z, hp.dropout_rate, dropout_rng);
    }
    out.fused = z;
    out.probabilities = classify(z, bound.classifier_weight, bound.classifier_bias);

    if (with_loss) {
        std::vector<int> gold;
        gold.reserve(sentence.labels.size());
        for (const std::string& label : sentence.labels) {
            gold.push_back(model.label_index(label));
        }
        out.loss = nll_loss(out.probabilities, gold);
    }
    return out;
}

Prediction predict(const ParsedSentence& sentence, Model& model, const VariantSpec& variant) {
    Tape tape;
    BoundModel bound = bind_model(tape, model, variant);
    ForwardOptions options;
    options.variant = variant;
    const SentenceForward forward = model_forward(bound, model, sentence, options, false);

    Prediction prediction;
    prediction.distributions = forward.probabilities->value;
    for (int i = 0; i < sentence.size(); ++i) {
        prediction.labels.push_back(
            model.labels[static_cast<size_t>(argmax_row(prediction.distributions, i))]);
    }
    return prediction;
}

}  // namespace mcted
