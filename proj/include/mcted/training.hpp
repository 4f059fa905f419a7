#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mcted/model.hpp"

namespace mcted {

struct AdamState {
    int step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

struct AdamParam {
    std::string name;
    Tensor* value = nullptr;
    const Tensor* gradient = nullptr;  // null means skip (frozen / unused)
};

// Bias-corrected Adam (beta1 0.9, beta2 0.999, eps 1e-8) with an L2 term
// l2 * theta added to each gradient. State slots are allocated on first use
// and must keep the same parameter order across steps.
void adam_step(const std::vector<AdamParam>& params, AdamState& state, double learning_rate,
               double l2_coefficient);

// Inverted dropout. Training mode scales kept entries by 1/(1-rate); eval
// mode is the identity.
Tensor apply_dropout(const Tensor& input, double rate, uint64_t seed, bool training);

struct ClassCount {
    std::string label;
    long long gold = 0;
    long long predicted = 0;
    long long correct = 0;
};

struct EvalReport {
    double p_id = 0.0, r_id = 0.0, f1_id = 0.0;
    double p_cls = 0.0, r_cls = 0.0, f1_cls = 0.0;
    double loss = 0.0;
    std::vector<ClassCount> classes;

    std::string to_json() const;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> valid_loss;
    std::vector<double> valid_f1;
    int best_epoch = -1;  // 1-based
    int stop_epoch = 0;
    std::string stop_reason;  // "early_stop" | "epoch_limit" | "diverged"
};

struct TrainResult {
    Model model;
    TrainHistory history;
};

// One JSON object per line; writes go through a single sink so concurrent
// harness variants cannot interleave partial lines.
class MetricsSink {
public:
    explicit MetricsSink(std::ostream* stream) : stream_(stream) {}
    void write(const std::string& run_id, int epoch, const std::string& split, double loss,
               const EvalReport& report);

private:
    std::ostream* stream_;
};

// Token-level scoring. Identification counts a hit when both gold and
// prediction are non-NONE; classification requires the exact label. Zero
// denominators give zero precision/recall.
EvalReport evaluate(Model& model, const std::vector<ParsedSentence>& sentences,
                    const VariantSpec& variant = {});

// The same scoring applied to pre-computed label assignments.
EvalReport score_predictions(const std::vector<std::vector<std::string>>& gold,
                             const std::vector<std::vector<std::string>>& predicted,
                             double loss = 0.0);

// Mini-batch training with per-epoch validation, parameter snapshots at the
// best validation loss and patience-based early stopping. When
// pretrained_embeddings text is given, it seeds the embedding table before
// the first epoch.
TrainResult train(const Hyperparameters& hp, const CorpusSplit& split,
                  const VariantSpec& variant = {}, MetricsSink* sink = nullptr,
                  const std::string& run_id = "train",
                  const std::string* pretrained_embeddings = nullptr);

// Each variant trains from scratch on the same split and seed and is
// evaluated on the test set.
std::map<std::string, EvalReport> ablate(const Hyperparameters& hp, const CorpusSplit& split,
                                         const std::vector<std::string>& variants,
                                         MetricsSink* sink = nullptr);

// axis is one of label_rate | layers | d_model | rho_sem.
std::map<std::string, EvalReport> sweep(const Hyperparameters& hp, const CorpusSplit& split,
                                        const std::string& axis,
                                        const std::vector<double>& values,
                                        MetricsSink* sink = nullptr);

}  // namespace mcted
