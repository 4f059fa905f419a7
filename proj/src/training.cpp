#include "mcted/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "mcted/rng.hpp"
#include "mcted/util.hpp"

namespace mcted {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEpsilon = 1e-8;
}  // namespace

void adam_step(const std::vector<AdamParam>& params, AdamState& state, double learning_rate,
               double l2_coefficient) {
    if (state.first_moment.empty()) {
        state.first_moment.resize(params.size());
        state.second_moment.resize(params.size());
    }
    if (state.first_moment.size() != params.size()) {
        throw contract_error("adam_step: parameter list size changed between steps");
    }
    ++state.step;
    const double bias1 = 1.0 - std::pow(kBeta1, state.step);
    const double bias2 = 1.0 - std::pow(kBeta2, state.step);

    for (size_t p = 0; p < params.size(); ++p) {
        const AdamParam& param = params[p];
        if (param.gradient == nullptr) continue;
        Tensor& value = *param.value;
        const Tensor& grad = *param.gradient;
        if (!grad.same_shape(value)) {
            throw dimension_error("adam_step: gradient " + grad.shape_str() + " for parameter " +
                                  param.name + " " + value.shape_str());
        }
        if (!grad.all_finite()) {
            throw contract_error("adam_step: NaN gradient in parameter group " + param.name);
        }
        Tensor& m = state.first_moment[p];
        Tensor& v = state.second_moment[p];
        if (!m.defined()) {
            m = Tensor(value.shape());
            v = Tensor(value.shape());
        }
        for (size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i] + l2_coefficient * value[i];
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            value[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + kEpsilon);
        }
    }
}

Tensor apply_dropout(const Tensor& input, double rate, uint64_t seed, bool training) {
    if (!training || rate == 0.0) return input;
    Rng rng(derive_seed(seed, "dropout-mask"));
    const Tensor mask = make_dropout_mask(input.rows(), input.cols(), rate, rng);
    Tensor out = input;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return out;
}

namespace {

struct ScoreCounts {
    long long id_tp = 0, pred_nonnone = 0, gold_nonnone = 0, cls_tp = 0;
    std::map<std::string, ClassCount> per_class;

    void add(const std::string& gold, const std::string& predicted) {
        if (gold != kNoneLabel) {
            ++gold_nonnone;
            ++per_class[gold].gold;
        }
        if (predicted != kNoneLabel) {
            ++pred_nonnone;
            ++per_class[predicted].predicted;
        }
        if (gold != kNoneLabel && predicted != kNoneLabel) ++id_tp;
        if (gold != kNoneLabel && predicted == gold) {
            ++cls_tp;
            ++per_class[gold].correct;
        }
    }
};

double safe_ratio(long long numerator, long long denominator) {
    return denominator > 0 ? static_cast<double>(numerator) / static_cast<double>(denominator)
                           : 0.0;
}

double f1_from(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

EvalReport report_from(const ScoreCounts& counts, double loss) {
    EvalReport report;
    report.p_id = safe_ratio(counts.id_tp, counts.pred_nonnone);
    report.r_id = safe_ratio(counts.id_tp, counts.gold_nonnone);
    report.f1_id = f1_from(report.p_id, report.r_id);
    report.p_cls = safe_ratio(counts.cls_tp, counts.pred_nonnone);
    report.r_cls = safe_ratio(counts.cls_tp, counts.gold_nonnone);
    report.f1_cls = f1_from(report.p_cls, report.r_cls);
    report.loss = loss;
    for (const auto& [label, cc] : counts.per_class) {
        ClassCount entry = cc;
        entry.label = label;
        report.classes.push_back(std::move(entry));
    }
    return report;
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

}  // namespace

std::string EvalReport::to_json() const {
    std::ostringstream out;
    out << "{\"p_id\":" << format_double(p_id) << ",\"r_id\":" << format_double(r_id)
        << ",\"f1_id\":" << format_double(f1_id) << ",\"p_cls\":" << format_double(p_cls)
        << ",\"r_cls\":" << format_double(r_cls) << ",\"f1_cls\":" << format_double(f1_cls)
        << ",\"loss\":" << format_double(loss) << ",\"classes\":[";
    for (size_t i = 0; i < classes.size(); ++i) {
        if (i > 0) out << ",";
        out << "{\"label\":\"" << json_escape(classes[i].label)
            << "\",\"gold\":" << classes[i].gold << ",\"predicted\":" << classes[i].predicted
            << ",\"correct\":" << classes[i].correct << "}";
    }
    out << "]}";
    return out.str();
}

void MetricsSink::write(const std::string& run_id, int epoch, const std::string& split,
                        double loss, const EvalReport& report) {
    if (stream_ == nullptr) return;
    *stream_ << "{\"run_id\":\"" << json_escape(run_id) << "\",\"epoch\":" << epoch
             << ",\"split\":\"" << json_escape(split) << "\",\"loss\":" << format_double(loss)
             << ",\"p_id\":" << format_double(report.p_id)
             << ",\"r_id\":" << format_double(report.r_id)
             << ",\"f1_id\":" << format_double(report.f1_id)
             << ",\"p_cls\":" << format_double(report.p_cls)
             << ",\"r_cls\":" << format_double(report.r_cls)
             << ",\"f1_cls\":" << format_double(report.f1_cls) << "}\n";
}

EvalReport score_predictions(const std::vector<std::vector<std::string>>& gold,
                             const std::vector<std::vector<std::string>>& predicted,
                             double loss) {
    if (gold.size() != predicted.size()) {
        throw contract_error("score_predictions: sentence count mismatch");
    }
    ScoreCounts counts;
    for (size_t s = 0; s < gold.size(); ++s) {
        if (gold[s].size() != predicted[s].size()) {
            throw contract_error("score_predictions: token count mismatch in sentence " +
                                 std::to_string(s));
        }
        for (size_t i = 0; i < gold[s].size(); ++i) counts.add(gold[s][i], predicted[s][i]);
    }
    return report_from(counts, loss);
}

EvalReport evaluate(Model& model, const std::vector<ParsedSentence>& sentences,
                    const VariantSpec& variant) {
    ScoreCounts counts;
    double loss = 0.0;
    for (const ParsedSentence& sentence : sentences) {
        Tape tape;
        const BoundModel bound = bind_model(tape, model, variant);
        ForwardOptions options;
        options.variant = variant;
        const SentenceForward forward = model_forward(bound, model, sentence, options, true);
        loss += forward.loss->value[0];
        const Tensor& probs = forward.probabilities->value;
        for (int i = 0; i < sentence.size(); ++i) {
            const std::string& predicted =
                model.labels[static_cast<size_t>(argmax_row(probs, i))];
            counts.add(sentence.labels[static_cast<size_t>(i)], predicted);
        }
    }
    return report_from(counts, loss);
}

TrainResult train(const Hyperparameters& hp, const CorpusSplit& split, const VariantSpec& variant,
                  MetricsSink* sink, const std::string& run_id,
                  const std::string* pretrained_embeddings) {
    hp.validate();
    if (split.train.empty() || split.valid.empty()) {
        throw validation_error("train: train and valid sets must be non-empty");
    }

    const Vocabulary vocab = Vocabulary::build(split.train, hp.min_count);
    const TypeInventories inventories = TypeInventories::build(split.train);
    // The event-type inventory is data-schema information shared by all three
    // parts; vocabulary and syntactic type inventories stay train-only.
    std::vector<ParsedSentence> all_parts = split.train;
    all_parts.insert(all_parts.end(), split.valid.begin(), split.valid.end());
    all_parts.insert(all_parts.end(), split.test.begin(), split.test.end());
    Model model = init_model(hp, vocab, inventories, collect_labels(all_parts));
    if (pretrained_embeddings != nullptr) {
        model.params.encoder.embedding =
            load_pretrained_embeddings(*pretrained_embeddings, vocab, hp.d_word, hp.seed);
    }

    AdamState adam;
    TrainHistory history;
    ModelParameters best_params = model.params;
    double best_valid_loss = std::numeric_limits<double>::infinity();
    int stall = 0;
    long long sentence_counter = 0;
    const uint64_t shuffle_master = derive_seed(hp.seed, "shuffle");
    const uint64_t dropout_master = derive_seed(hp.seed, "dropout");
    history.stop_reason = "epoch_limit";

    const int train_size = static_cast<int>(split.train.size());
    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        history.stop_epoch = epoch;
        std::vector<int> order(static_cast<size_t>(train_size));
        for (int i = 0; i < train_size; ++i) order[static_cast<size_t>(i)] = i;
        Rng shuffle_rng(derive_seed(shuffle_master, "epoch", static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        bool diverged = false;
        ScoreCounts train_counts;
        for (int start = 0; start < train_size && !diverged; start += hp.batch_size) {
            const int stop = std::min(train_size, start + hp.batch_size);
            Tape tape;
            const BoundModel bound = bind_model(tape, model, variant);
            Node* batch_loss = nullptr;
            for (int b = start; b < stop; ++b) {
                const ParsedSentence& sentence =
                    split.train[static_cast<size_t>(order[static_cast<size_t>(b)])];
                ForwardOptions options;
                options.training = true;
                options.variant = variant;
                options.dropout_seed =
                    derive_seed(dropout_master, "sentence", static_cast<uint64_t>(sentence_counter++));
                const SentenceForward forward =
                    model_forward(bound, model, sentence, options, true);
                const Tensor& probs = forward.probabilities->value;
                for (int i = 0; i < sentence.size(); ++i) {
                    train_counts.add(sentence.labels[static_cast<size_t>(i)],
                                     model.labels[static_cast<size_t>(argmax_row(probs, i))]);
                }
                batch_loss = batch_loss == nullptr ? forward.loss : add(batch_loss, forward.loss);
            }
            const double loss_value = batch_loss->value[0];
            if (!std::isfinite(loss_value)) {
                diverged = true;
                break;
            }
            epoch_loss += loss_value;
            tape.backward(batch_loss);

            std::vector<ParamRef> refs =
                parameter_refs(model.params, model.params.fusion.learnable, variant);
            std::vector<AdamParam> adam_params;
            adam_params.reserve(refs.size());
            for (size_t i = 0; i < refs.size(); ++i) {
                const Node* leaf = bound.leaves[i].second;
                const bool update = refs[i].trainable && leaf->grad.defined();
                adam_params.push_back(
                    AdamParam{refs[i].name, refs[i].value, update ? &leaf->grad : nullptr});
            }
            adam_step(adam_params, adam, hp.learning_rate, hp.l2_coefficient);
        }

        if (diverged) {
            history.stop_reason = "diverged";
            log_info(run_id + ": training loss diverged at epoch " + std::to_string(epoch));
            break;
        }

        history.train_loss.push_back(epoch_loss);
        const EvalReport valid_report = evaluate(model, split.valid, variant);
        history.valid_loss.push_back(valid_report.loss);
        history.valid_f1.push_back(valid_report.f1_cls);
        if (sink != nullptr) {
            sink->write(run_id, epoch, "train", epoch_loss, report_from(train_counts, epoch_loss));
            sink->write(run_id, epoch, "valid", valid_report.loss, valid_report);
        }
        log_debug(run_id + " epoch " + std::to_string(epoch) + " train_loss " +
                  format_double(epoch_loss) + " valid_loss " + format_double(valid_report.loss) +
                  " valid_f1 " + format_double(valid_report.f1_cls));

        if (valid_report.loss < best_valid_loss) {
            best_valid_loss = valid_report.loss;
            history.best_epoch = epoch;
            best_params = model.params;
            stall = 0;
        } else {
            ++stall;
            if (stall >= hp.patience) {
                history.stop_reason = "early_stop";
                break;
            }
        }
    }

    if (history.best_epoch > 0) {
        model.params = best_params;
    }
    return TrainResult{std::move(model), std::move(history)};
}

std::map<std::string, EvalReport> ablate(const Hyperparameters& hp, const CorpusSplit& split,
                                         const std::vector<std::string>& variants,
                                         MetricsSink* sink) {
    if (variants.empty()) throw contract_error("ablate: no variants given");
    std::map<std::string, EvalReport> reports;
    for (const std::string& name : variants) {
        const VariantSpec variant = VariantSpec::from_name(name);
        TrainResult result = train(hp, split, variant, sink, "ablate-" + name);
        EvalReport report = evaluate(result.model, split.test, variant);
        if (sink != nullptr) {
            sink->write("ablate-" + name, result.history.best_epoch, "test", report.loss, report);
        }
        reports[name] = std::move(report);
    }
    return reports;
}

std::map<std::string, EvalReport> sweep(const Hyperparameters& hp, const CorpusSplit& split,
                                        const std::string& axis, const std::vector<double>& values,
                                        MetricsSink* sink) {
    if (values.empty()) throw contract_error("sweep: no values given");
    std::map<std::string, EvalReport> reports;
    for (const double value : values) {
        Hyperparameters run_hp = hp;
        CorpusSplit run_split = split;
        if (axis == "label_rate") {
            if (value <= 0.0 || value > 1.0) {
                throw contract_error("sweep: label_rate must be in (0,1]");
            }
            std::vector<int> order(split.train.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            Rng rng(derive_seed(hp.seed, "label-rate"));
            rng.shuffle(order);
            const int keep = std::max(
                1, static_cast<int>(std::ceil(value * static_cast<double>(split.train.size()))));
            order.resize(static_cast<size_t>(keep));
            // the kept subset preserves corpus order, so rate 1.0 reproduces
            // the plain training run exactly
            std::sort(order.begin(), order.end());
            run_split.train.clear();
            for (const int idx : order) {
                run_split.train.push_back(split.train[static_cast<size_t>(idx)]);
            }
        } else if (axis == "layers") {
            run_hp.layers = static_cast<int>(value);
        } else if (axis == "d_model") {
            run_hp.d_model = static_cast<int>(value);
        } else if (axis == "rho_sem") {
            run_hp.rho_sem = value;
        } else {
            throw validation_error("sweep: unknown axis " + axis);
        }
        const std::string key = format_double_short(value);
        const std::string run_id = "sweep-" + axis + "-" + key;
        TrainResult result = train(run_hp, run_split, VariantSpec{}, sink, run_id);
        EvalReport report = evaluate(result.model, run_split.test);
        if (sink != nullptr) {
            sink->write(run_id, result.history.best_epoch, "test", report.loss, report);
        }
        reports[key] = std::move(report);
    }
    return reports;
}

}  // namespace mcted
