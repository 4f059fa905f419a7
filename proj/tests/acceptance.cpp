// Acceptance suite: every criterion prints one PASS/FAIL line; the process
// exits with the number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

#include "mcted/cli.hpp"
#include "mcted/corpus.hpp"
#include "mcted/model.hpp"
#include "mcted/rng.hpp"
#include "mcted/synthetic.hpp"
#include "mcted/training.hpp"
#include "mcted/util.hpp"

using namespace mcted;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void criterion(int number, const std::string& name, const std::function<bool(std::string&)>& body) {
    const auto start = Clock::now();
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
        ok = false;
    }
    const double elapsed = seconds_since(start);
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << number << " (" << name << ", "
              << format_double(elapsed) << "s)" << (detail.empty() ? "" : ": " + detail) << "\n";
    std::cout.flush();
    if (!ok) ++failures;
}

Hyperparameters bench_hp() {
    Hyperparameters hp = Hyperparameters::synthetic_defaults();
    hp.d_word = 32;
    hp.d_model = 40;
    hp.d_r = 10;
    hp.d_w = 10;
    hp.layers = 2;
    hp.learning_rate = 0.02;
    hp.dropout_rate = 0.05;
    hp.batch_size = 10;
    hp.epochs = 80;
    hp.patience = 20;
    return hp;
}

Tensor random_tensor(int rows, int cols, Rng& rng, double scale = 0.5) {
    Tensor t(rows, cols);
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian(0.0, scale);
    return t;
}

// --- criterion 1: gradient correctness over all parameter groups ----------

bool check_gradients(std::string& detail) {
    const auto start = Clock::now();
    std::ostringstream out, err;
    const int code = run_cli({"grad-check", "--tokens", "5", "--seed", "3"}, out, err);
    const double elapsed = seconds_since(start);
    if (code != 0) {
        detail = "grad-check exited " + std::to_string(code) + ": " + err.str();
        return false;
    }
    if (out.str().find("\"ok\":false") != std::string::npos) {
        detail = "a parameter group exceeded 1e-3: " + out.str();
        return false;
    }
    if (out.str().find("\"group\":\"embedding\"") == std::string::npos ||
        out.str().find("\"group\":\"relation_type_table\"") == std::string::npos ||
        out.str().find("\"group\":\"word_type_table\"") == std::string::npos ||
        out.str().find("\"group\":\"classifier_weight\"") == std::string::npos) {
        detail = "expected parameter groups missing from the report";
        return false;
    }
    if (elapsed >= 60.0) {
        detail = "runtime " + format_double(elapsed) + "s over the 60s budget";
        return false;
    }
    return true;
}

// --- criterion 2: oracle equivalence ---------------------------------------

Tensor cosine_oracle(const Tensor& h, double threshold) {
    const int n = h.rows(), d = h.cols();
    Tensor alpha(n, n);
    std::vector<double> norms(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += h.at(i, k) * h.at(i, k);
        norms[static_cast<size_t>(i)] = std::sqrt(acc);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) {
                alpha.at(i, j) = 1.0;
            } else if (norms[static_cast<size_t>(i)] == 0.0 ||
                       norms[static_cast<size_t>(j)] == 0.0) {
                alpha.at(i, j) = 0.0;
            } else {
                double dot = 0.0;
                for (int k = 0; k < d; ++k) dot += h.at(i, k) * h.at(j, k);
                const double c =
                    dot / (norms[static_cast<size_t>(i)] * norms[static_cast<size_t>(j)]);
                alpha.at(i, j) = c >= threshold ? c : 0.0;
            }
        }
    }
    return alpha;
}

bool check_oracles(std::string& detail) {
    Rng rng(20260808);
    for (int trial = 0; trial < 100; ++trial) {
        const Tensor h = random_tensor(8, 5, rng, 1.0);
        const double threshold = rng.uniform() * 0.5;
        const Tensor impl = semantic_adjacency(h, threshold);
        const Tensor oracle = cosine_oracle(h, threshold);
        if (std::memcmp(impl.data(), oracle.data(), impl.size() * sizeof(double)) != 0) {
            detail = "cosine adjacency mismatch on trial " + std::to_string(trial);
            return false;
        }
    }

    // two-node trace, one raw arc 0->1 typed "r"
    ParsedSentence s;
    s.tokens = {"x", "y"};
    s.pos_tags = {"NN", "VB"};
    s.labels = {"NONE", "NONE"};
    s.arcs = {{0, 1, "r"}};
    const TypeInventories inv = TypeInventories::build({s});
    const TypedGraph g = build_syntactic_graph(s, inv);

    const int d = 2, d_r = 2;
    const Tensor table = random_tensor(3, d_r, rng);
    const Tensor w_update = random_tensor(2 * d + d_r, d_r, rng);
    const Tensor u = random_tensor(d_r, 1, rng);
    const Tensor w1 = random_tensor(d, d, rng);
    const Tensor h0 = random_tensor(2, d, rng);

    Tape tape;
    BoundRelationChannel rel;
    rel.relation_table = tape.leaf(table, false);
    rel.edge_update = tape.leaf(w_update, false);
    rel.edge_score = tape.leaf(u, false);
    rel.layer_transforms = {tape.leaf(w1, false)};
    const RelationChannelOutput out = relation_channel_forward(tape.constant(h0), g, rel);

    const int ne = static_cast<int>(g.edges.size());
    std::vector<double> score(static_cast<size_t>(ne));
    for (int e = 0; e < ne; ++e) {
        double z = 0.0;
        for (int j = 0; j < d_r; ++j) z += table.at(g.edges[static_cast<size_t>(e)].relation, j) * u.at(j, 0);
        score[static_cast<size_t>(e)] = 1.0 / (1.0 + std::exp(-z));
    }
    double agg[2][2] = {{0, 0}, {0, 0}};
    double mass[2] = {0, 0};
    for (int e = 0; e < ne; ++e) {
        const TypedEdge& te = g.edges[static_cast<size_t>(e)];
        mass[te.dst] += score[static_cast<size_t>(e)];
        for (int j = 0; j < d; ++j) agg[te.dst][j] += score[static_cast<size_t>(e)] * h0.at(te.src, j);
    }
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < d; ++j) {
            double z = 0.0;
            for (int k = 0; k < d; ++k) z += (agg[i][k] / mass[i]) * w1.at(k, j);
            if (std::abs(out.nodes->value.at(i, j) - std::tanh(z)) >= 1e-12) {
                detail = "relation channel trace mismatch at (" + std::to_string(i) + "," +
                         std::to_string(j) + ")";
                return false;
            }
        }
    }

    // word channel trace on the same graph
    const int d_w = 2;
    const Tensor word_table = random_tensor(inv.word_type_count(), d_w, rng);
    const Tensor ww = random_tensor(d + d_w, d + d_w, rng);
    BoundWordChannel word;
    word.type_table = tape.leaf(word_table, false);
    word.layer_transforms = {tape.leaf(ww, false)};
    const WordChannelOutput wout = word_channel_forward(tape.constant(h0), g, word);

    double x0[2][4];
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < d; ++j) x0[i][j] = h0.at(i, j);
        for (int j = 0; j < d_w; ++j) x0[i][d + j] = word_table.at(g.node_types[static_cast<size_t>(i)], j);
    }
    double wagg[2][4] = {{0, 0, 0, 0}, {0, 0, 0, 0}};
    double degree[2] = {0, 0};
    for (const TypedEdge& e : g.edges) {
        degree[e.dst] += 1.0;
        for (int j = 0; j < d + d_w; ++j) wagg[e.dst][j] += x0[e.src][j];
    }
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < d + d_w; ++j) {
            double z = 0.0;
            for (int k = 0; k < d + d_w; ++k) z += (wagg[i][k] / degree[i]) * ww.at(k, j);
            const double want = std::tanh(z);
            const double got = j < d ? wout.nodes->value.at(i, j) : wout.types->value.at(i, j - d);
            if (std::abs(got - want) >= 1e-12) {
                detail = "word channel trace mismatch at (" + std::to_string(i) + "," +
                         std::to_string(j) + ")";
                return false;
            }
        }
    }
    return true;
}

// --- criterion 3: equation-level contracts ----------------------------------

bool check_contracts(std::string& detail) {
    Rng rng(5150);
    {
        Tape tape;
        Node* probs = softmax_rows(tape.constant(random_tensor(12, 9, rng, 3.0)));
        for (int i = 0; i < 12; ++i) {
            double sum = 0.0;
            for (int j = 0; j < 9; ++j) sum += probs->value.at(i, j);
            if (std::abs(sum - 1.0) >= 1e-9) {
                detail = "softmax row " + std::to_string(i) + " sums to " + format_double(sum);
                return false;
            }
        }
    }
    {
        GeneratorConfig config;
        config.sentence_count = 5;
        const auto corpus = generate_synthetic(config, 7);
        Hyperparameters hp;  // corpus-scale defaults: d_model 150, d_r 25
        const Model model = init_model(hp, Vocabulary::build(corpus, 1),
                                       TypeInventories::build(corpus), collect_labels(corpus));
        if (model.params.relation.edge_update.shape() != std::vector<int>{325, 25}) {
            detail = "edge-update matrix is " + model.params.relation.edge_update.shape_str() +
                     ", expected [325,25]";
            return false;
        }
    }
    {
        ParsedSentence s;
        s.tokens = {"a", "b", "c"};
        s.pos_tags = {"NN", "NN", "NN"};
        s.labels = {"NONE", "NONE", "NONE"};
        s.arcs = {{0, 1, "obj"}, {0, 2, "obj"}};
        const TypeInventories inv = TypeInventories::build({s});
        const TypedGraph g = build_syntactic_graph(s, inv);
        Tape tape;
        BoundRelationChannel rel;
        rel.relation_table = tape.leaf(random_tensor(inv.relation_type_count(), 4, rng), false);
        rel.edge_update = tape.leaf(random_tensor(2 * 6 + 4, 4, rng), false);
        rel.edge_score = tape.leaf(random_tensor(4, 1, rng), false);
        rel.layer_transforms = {tape.leaf(random_tensor(6, 6, rng), false)};
        const RelationChannelOutput out =
            relation_channel_forward(tape.constant(random_tensor(3, 6, rng)), g, rel);
        for (int j = 0; j < 4; ++j) {
            if (out.initial_edges->value.at(0, j) != out.initial_edges->value.at(2, j)) {
                detail = "same-type edges differ in their initial rows";
                return false;
            }
        }
    }
    {
        const Tensor hr = random_tensor(5, 4, rng);
        const Tensor hw = random_tensor(5, 4, rng);
        const Tensor hs = random_tensor(5, 4, rng);
        Tape tape;
        Node* z = fuse({tape.constant(hr), tape.constant(hw), tape.constant(hs)}, {2.0, 1.0, 2.0});
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 4; ++j) {
                const double want = (2.0 * hr.at(i, j) + hw.at(i, j) + 2.0 * hs.at(i, j)) / 5.0;
                if (std::abs(z->value.at(i, j) - want) >= 1e-15) {
                    detail = "fusion deviates from (2Hr+Hw+2Hs)/5";
                    return false;
                }
            }
        }
    }
    return true;
}

// --- criterion 4: overfit ----------------------------------------------------

bool check_overfit(std::string& detail) {
    const auto start = Clock::now();
    GeneratorConfig config;
    config.sentence_count = 20;
    const auto corpus = generate_synthetic(config, 7);
    CorpusSplit split;
    split.train = corpus;
    split.valid = corpus;
    split.test = corpus;

    Hyperparameters hp = bench_hp();
    hp.learning_rate = 0.02;
    hp.dropout_rate = 0.05;
    hp.epochs = 300;
    hp.patience = 300;
    hp.seed = 7;

    TrainResult result = train(hp, split);
    const EvalReport report = evaluate(result.model, split.train);
    const double elapsed = seconds_since(start);
    detail = "train F1 " + format_double(report.f1_cls) + " after " +
             std::to_string(result.history.stop_epoch) + " epochs in " + format_double(elapsed) +
             "s";
    if (report.f1_cls < 0.99) return false;
    if (elapsed >= 120.0) return false;
    return true;
}

// --- criterion 5: generalization and ablation direction ----------------------

bool check_generalization(std::string& detail) {
    const auto start = Clock::now();
    GeneratorConfig config;
    config.sentence_count = 1000;
    const auto corpus = generate_synthetic(config, 7);
    const CorpusSplit split = split_corpus(corpus, {0.8, 0.1, 0.1}, 7);
    if (split.train.size() != 800 || split.valid.size() != 100 || split.test.size() != 100) {
        detail = "unexpected split sizes";
        return false;
    }

    const std::vector<std::string> variants = {"G1+G2+G3", "G1", "G2", "G3", "freeze-R"};
    const std::vector<uint64_t> seeds = {7, 8, 9};
    std::map<std::string, double> mean_f1;
    std::ostringstream summary;
    for (const std::string& name : variants) {
        const VariantSpec variant = VariantSpec::from_name(name);
        double total = 0.0;
        for (const uint64_t seed : seeds) {
            Hyperparameters hp = bench_hp();
            hp.seed = seed;
            TrainResult result = train(hp, split, variant);
            const EvalReport report = evaluate(result.model, split.test, variant);
            total += report.f1_cls;
        }
        mean_f1[name] = total / static_cast<double>(seeds.size());
        summary << name << "=" << format_double(mean_f1[name]) << " ";
    }
    const double elapsed = seconds_since(start);
    detail = summary.str() + "in " + format_double(elapsed) + "s";

    const double full = mean_f1["G1+G2+G3"];
    if (full < 0.85) return false;
    for (const std::string& single : {"G1", "G2", "G3"}) {
        if (full < mean_f1[single] + 0.01) return false;
    }
    if (mean_f1["freeze-R"] > full) return false;
    if (elapsed >= 1800.0) return false;
    return true;
}

// --- criterion 6: determinism -------------------------------------------------

bool check_determinism(std::string& detail) {
    const std::string data = "acc_det_corpus.tsv";
    const std::string config = "acc_det_config.cfg";
    std::ostringstream out, err;
    if (run_cli({"gen-data", "--out", data, "--seed", "3", "--sentences", "60"}, out, err) != 0) {
        detail = "gen-data failed";
        return false;
    }
    Hyperparameters hp = bench_hp();
    hp.epochs = 3;
    write_text_file(config, serialize_config(hp));

    const auto run_once = [&](const std::string& prefix) {
        std::ostringstream o, e;
        return run_cli({"train", "--config", config, "--data", data, "--seed", "7", "--out",
                        prefix},
                       o, e);
    };
    if (run_once("acc_det_a") != 0 || run_once("acc_det_b") != 0) {
        detail = "training run failed";
        return false;
    }
    const bool metrics_equal =
        read_text_file("acc_det_a.metrics.jsonl") == read_text_file("acc_det_b.metrics.jsonl");
    const bool ckpt_equal = read_text_file("acc_det_a.ckpt") == read_text_file("acc_det_b.ckpt");
    for (const char* f : {"acc_det_corpus.tsv", "acc_det_config.cfg", "acc_det_a.metrics.jsonl",
                          "acc_det_b.metrics.jsonl", "acc_det_a.ckpt", "acc_det_b.ckpt"}) {
        std::remove(f);
    }
    if (!metrics_equal) detail = "metrics streams differ";
    if (!ckpt_equal) detail += std::string(detail.empty() ? "" : "; ") + "checkpoints differ";
    return metrics_equal && ckpt_equal;
}

// --- criterion 7: early stopping ----------------------------------------------

bool check_early_stopping(std::string& detail) {
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        GeneratorConfig config;
        config.sentence_count = 14;
        const auto corpus = generate_synthetic(config, seed);
        CorpusSplit split;
        split.train.assign(corpus.begin(), corpus.begin() + 10);
        split.valid.assign(corpus.begin() + 10, corpus.end());
        split.test = split.valid;

        Hyperparameters hp = bench_hp();
        hp.d_word = 8;
        hp.d_model = 10;
        hp.d_r = 4;
        hp.d_w = 4;
        hp.learning_rate = 1e-300;  // engineered plateau
        hp.dropout_rate = 0.0;
        hp.epochs = 30;
        hp.patience = 5;
        hp.seed = seed;
        const TrainResult result = train(hp, split);
        const int gap = result.history.stop_epoch - result.history.best_epoch;
        if (gap > 5) {
            detail = "seed " + std::to_string(seed) + " stopped " + std::to_string(gap) +
                     " epochs after the best";
            return false;
        }
    }
    return true;
}

// --- criterion 8: format closure ------------------------------------------------

bool check_format_closure(std::string& detail) {
    const std::string data = "acc_fc_corpus.tsv";
    const std::string config = "acc_fc_config.cfg";
    std::ostringstream out, err;
    bool ok = true;
    if (run_cli({"gen-data", "--out", data, "--seed", "5", "--sentences", "40"}, out, err) != 0) {
        detail = "gen-data failed";
        ok = false;
    }
    Hyperparameters hp = bench_hp();
    hp.epochs = 2;
    write_text_file(config, serialize_config(hp));
    if (ok && run_cli({"train", "--config", config, "--data", data, "--seed", "5", "--out",
                       "acc_fc_model"},
                      out, err) != 0) {
        detail = "train failed: " + err.str();
        ok = false;
    }
    if (ok && run_cli({"predict", "--model", "acc_fc_model.ckpt", "--data", data, "--out",
                       "acc_fc_pred.tsv"},
                      out, err) != 0) {
        detail = "predict failed: " + err.str();
        ok = false;
    }
    if (ok) {
        try {
            const auto predictions = load_sentence_file("acc_fc_pred.tsv");
            const auto input = load_sentence_file(data);
            if (predictions.size() != input.size()) {
                detail = "prediction sentence count mismatch";
                ok = false;
            }
        } catch (const std::exception& e) {
            detail = std::string("prediction output failed to parse: ") + e.what();
            ok = false;
        }
    }
    if (ok) {
        Model model = load_model("acc_fc_model.ckpt");
        save_model(model, "acc_fc_model2.ckpt");
        if (read_text_file("acc_fc_model.ckpt") != read_text_file("acc_fc_model2.ckpt")) {
            detail = "checkpoint save/load round trip is not bit-exact";
            ok = false;
        }
    }
    for (const char* f : {"acc_fc_corpus.tsv", "acc_fc_config.cfg", "acc_fc_model.ckpt",
                          "acc_fc_model.metrics.jsonl", "acc_fc_pred.tsv", "acc_fc_model2.ckpt"}) {
        std::remove(f);
    }
    return ok;
}

}  // namespace

int main() {
    criterion(1, "gradient correctness", check_gradients);
    criterion(2, "oracle equivalence", check_oracles);
    criterion(3, "equation-level contracts", check_contracts);
    criterion(4, "overfit", check_overfit);
    criterion(5, "generalization and ablation direction", check_generalization);
    criterion(6, "determinism", check_determinism);
    criterion(7, "early stopping", check_early_stopping);
    criterion(8, "format closure", check_format_closure);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
              << "\n";
    return failures;
}
