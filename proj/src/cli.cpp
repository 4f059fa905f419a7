#include "mcted/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "mcted/corpus.hpp"
#include "mcted/model.hpp"
#include "mcted/rng.hpp"
#include "mcted/synthetic.hpp"
#include "mcted/training.hpp"
#include "mcted/util.hpp"

namespace mcted {

namespace {

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> parts;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

// "{\"a\":1}" + extra fields in front -> "{\"variant\":\"x\",\"a\":1}"
std::string prepend_json_field(const std::string& object, const std::string& key,
                               const std::string& value) {
    return "{\"" + key + "\":\"" + value + "\"," + object.substr(1);
}

struct CommonFlags {
    std::string config;
    std::string data;
    std::string embeddings;
    std::string out;
    std::string model_path;
    std::string variant = "G1+G2+G3";
    std::optional<uint64_t> seed;
};

Hyperparameters resolve_config(const CommonFlags& flags) {
    Hyperparameters hp =
        flags.config.empty() ? Hyperparameters{} : load_config_file(flags.config);
    if (flags.seed.has_value()) hp.seed = *flags.seed;
    hp.validate();
    return hp;
}

// Deterministic random sentence plus the matching model, used by grad-check.
struct GradCheckSetup {
    ParsedSentence sentence;
    Model model;
};

GradCheckSetup make_grad_check_setup(int tokens, uint64_t seed) {
    if (tokens < 2) throw contract_error("grad-check needs at least 2 tokens");
    Rng rng(derive_seed(seed, "grad-check"));
    const std::vector<std::string> words = {"feeder", "breaker", "trip",   "measure",
                                            "crew",   "relay",   "surge",  "monitor"};
    const std::vector<std::string> pos = {"NN", "VB", "JJ"};
    const std::vector<std::string> relations = {"nsubj", "obj", "amod"};
    const std::vector<std::string> events = {"alpha", "beta"};

    ParsedSentence sentence;
    for (int i = 0; i < tokens; ++i) {
        sentence.tokens.push_back(rng.pick(words));
        sentence.pos_tags.push_back(rng.pick(pos));
        sentence.labels.push_back(kNoneLabel);
        if (i > 0) {
            sentence.arcs.push_back(ParsedArc{rng.uniform_int(i), i, rng.pick(relations)});
        }
    }
    sentence.labels[0] = events[0];
    sentence.labels[static_cast<size_t>(tokens - 1)] = events[1];
    sentence.validate();

    Hyperparameters hp;
    hp.d_word = 8;
    hp.d_model = 10;
    hp.d_r = 6;
    hp.d_w = 5;
    hp.layers = 2;
    hp.dropout_rate = 0.0;
    hp.rho_sem = 0.15;
    hp.seed = seed;

    const std::vector<ParsedSentence> corpus{sentence};
    Model model = init_model(hp, Vocabulary::build(corpus, 1), TypeInventories::build(corpus),
                             collect_labels(corpus));
    return GradCheckSetup{std::move(sentence), std::move(model)};
}

int cmd_gen_data(const std::string& out_path, uint64_t seed, const GeneratorConfig& config) {
    const std::vector<ParsedSentence> corpus = generate_synthetic(config, seed);
    write_text_file(out_path, serialize_sentences(corpus));
    log_info("wrote " + std::to_string(corpus.size()) + " sentences to " + out_path);
    return 0;
}

int cmd_train(const CommonFlags& flags, std::ostream& out) {
    const Hyperparameters hp = resolve_config(flags);
    const VariantSpec variant = VariantSpec::from_name(flags.variant);
    const std::vector<ParsedSentence> corpus = load_sentence_file(flags.data);
    const CorpusSplit split =
        split_corpus(corpus, {hp.train_ratio, hp.valid_ratio, hp.test_ratio}, hp.seed);

    std::optional<std::string> pretrained;
    if (!flags.embeddings.empty()) pretrained = read_text_file(flags.embeddings);

    const std::string prefix = flags.out.empty() ? std::string("model") : flags.out;
    std::ofstream metrics_stream(prefix + ".metrics.jsonl", std::ios::binary);
    if (!metrics_stream) throw io_error("cannot open metrics stream: " + prefix + ".metrics.jsonl");
    MetricsSink sink(&metrics_stream);

    const std::string run_id = "train-seed" + std::to_string(hp.seed);
    TrainResult result = train(hp, split, variant, &sink, run_id,
                               pretrained.has_value() ? &*pretrained : nullptr);

    EvalReport test_report;
    if (!split.test.empty()) {
        test_report = evaluate(result.model, split.test, variant);
        sink.write(run_id, result.history.best_epoch, "test", test_report.loss, test_report);
    }
    save_model(result.model, prefix + ".ckpt");

    out << "{\"run_id\":\"" << run_id << "\",\"stop_epoch\":" << result.history.stop_epoch
        << ",\"best_epoch\":" << result.history.best_epoch << ",\"stop_reason\":\""
        << result.history.stop_reason << "\",\"test\":" << test_report.to_json() << "}\n";
    return 0;
}

int cmd_eval(const CommonFlags& flags, std::ostream& out) {
    Model model = load_model(flags.model_path);
    const VariantSpec variant = VariantSpec::from_name(flags.variant);
    const std::vector<ParsedSentence> sentences = load_sentence_file(flags.data);
    const EvalReport report = evaluate(model, sentences, variant);
    out << report.to_json() << "\n";
    return 0;
}

int cmd_predict(const CommonFlags& flags, std::ostream& out) {
    Model model = load_model(flags.model_path);
    const VariantSpec variant = VariantSpec::from_name(flags.variant);
    std::vector<ParsedSentence> sentences = load_sentence_file(flags.data);
    for (ParsedSentence& sentence : sentences) {
        sentence.labels = predict(sentence, model, variant).labels;
    }
    const std::string text = serialize_sentences(sentences);
    if (flags.out.empty()) {
        out << text;
    } else {
        write_text_file(flags.out, text);
    }
    return 0;
}

int cmd_grad_check(int tokens, uint64_t seed, double tolerance, std::ostream& out) {
    GradCheckSetup setup = make_grad_check_setup(tokens, seed);
    Model& model = setup.model;

    // Freeze the semantic graph at the unperturbed parameters so every loss
    // evaluation differentiates the same function.
    Tensor snapshot;
    {
        Tape tape;
        const BoundModel bound = bind_model(tape, model);
        const SentenceForward fwd =
            model_forward(bound, model, setup.sentence, ForwardOptions{}, false);
        snapshot = semantic_adjacency(fwd.h0->value, model.hp.rho_sem);
    }
    ForwardOptions options;
    options.semantic_adjacency_override = &snapshot;

    Tape tape;
    const BoundModel bound = bind_model(tape, model);
    const SentenceForward forward = model_forward(bound, model, setup.sentence, options, true);
    tape.backward(forward.loss);

    const auto loss_fn = [&]() {
        Tape t;
        const BoundModel b = bind_model(t, model);
        return model_forward(b, model, setup.sentence, options, true).loss->value[0];
    };

    Rng coord_rng(derive_seed(seed, "grad-check-coords"));
    const std::vector<ParamRef> refs =
        parameter_refs(model.params, model.params.fusion.learnable);
    bool all_ok = true;
    for (size_t i = 0; i < refs.size(); ++i) {
        if (!refs[i].trainable) continue;
        const Node* leaf = bound.leaves[i].second;
        Tensor analytic = leaf->grad.defined() ? leaf->grad : Tensor(refs[i].value->shape());
        const FdResult result = finite_difference_check(*refs[i].value, analytic, loss_fn, 1e-4,
                                                        8, coord_rng);
        const bool ok = !result.nan_encountered && result.max_rel_err < tolerance;
        all_ok = all_ok && ok;
        out << "{\"group\":\"" << refs[i].name
            << "\",\"max_rel_err\":" << format_double(result.max_rel_err)
            << ",\"ok\":" << (ok ? "true" : "false") << "}\n";
    }
    if (!all_ok) {
        throw validation_error("gradient check exceeded tolerance " + format_double(tolerance));
    }
    return 0;
}

int cmd_ablate(const CommonFlags& flags, const std::string& variants_csv, std::ostream& out) {
    const Hyperparameters hp = resolve_config(flags);
    const std::vector<std::string> variants = split_commas(variants_csv);
    const std::vector<ParsedSentence> corpus = load_sentence_file(flags.data);
    const CorpusSplit split =
        split_corpus(corpus, {hp.train_ratio, hp.valid_ratio, hp.test_ratio}, hp.seed);

    std::ofstream metrics_stream;
    std::optional<MetricsSink> sink;
    if (!flags.out.empty()) {
        metrics_stream.open(flags.out, std::ios::binary);
        if (!metrics_stream) throw io_error("cannot open metrics stream: " + flags.out);
        sink.emplace(&metrics_stream);
    }

    const auto reports = ablate(hp, split, variants, sink.has_value() ? &*sink : nullptr);
    for (const std::string& name : variants) {
        out << prepend_json_field(reports.at(name).to_json(), "variant", name) << "\n";
    }
    return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::string& axis, const std::string& values_csv,
              std::ostream& out) {
    const Hyperparameters hp = resolve_config(flags);
    std::vector<double> values;
    for (const std::string& item : split_commas(values_csv)) {
        try {
            values.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw config_error("sweep: bad value '" + item + "'");
        }
    }
    const std::vector<ParsedSentence> corpus = load_sentence_file(flags.data);
    const CorpusSplit split =
        split_corpus(corpus, {hp.train_ratio, hp.valid_ratio, hp.test_ratio}, hp.seed);

    std::ofstream metrics_stream;
    std::optional<MetricsSink> sink;
    if (!flags.out.empty()) {
        metrics_stream.open(flags.out, std::ios::binary);
        if (!metrics_stream) throw io_error("cannot open metrics stream: " + flags.out);
        sink.emplace(&metrics_stream);
    }

    const auto reports = sweep(hp, split, axis, values, sink.has_value() ? &*sink : nullptr);
    for (const double value : values) {
        const std::string key = format_double_short(value);
        out << prepend_json_field(reports.at(key).to_json(), "value", key) << "\n";
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"multi-channel graph event detector"};
    app.require_subcommand(1);

    CommonFlags flags;
    uint64_t seed_flag = 0;

    // gen-data
    GeneratorConfig gen_config;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic annotated corpus");
    std::string gen_out;
    uint64_t gen_seed = 7;
    gen->add_option("--out", gen_out, "output sentence file")->required();
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--sentences", gen_config.sentence_count, "number of sentences");
    gen->add_option("--min-len", gen_config.min_length, "minimum sentence length");
    gen->add_option("--max-len", gen_config.max_length, "maximum sentence length");
    gen->add_option("--noise-rate", gen_config.noise_rate, "fill rate for modifier noise");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model on a sentence file");
    train_cmd->add_option("--config", flags.config, "key=value config file");
    train_cmd->add_option("--data", flags.data, "sentence file")->required();
    train_cmd->add_option("--embeddings", flags.embeddings, "pretrained embedding file");
    train_cmd->add_option("--out", flags.out, "output prefix for .ckpt and .metrics.jsonl");
    train_cmd->add_option("--seed", seed_flag, "master seed (overrides config)");
    train_cmd->add_option("--variant", flags.variant, "channel variant to train");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a sentence file");
    eval_cmd->add_option("--model", flags.model_path, "checkpoint path")->required();
    eval_cmd->add_option("--data", flags.data, "sentence file")->required();
    eval_cmd->add_option("--variant", flags.variant, "channel variant");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "label a sentence file");
    predict_cmd->add_option("--model", flags.model_path, "checkpoint path")->required();
    predict_cmd->add_option("--data", flags.data, "sentence file")->required();
    predict_cmd->add_option("--out", flags.out, "output path (stdout when omitted)");
    predict_cmd->add_option("--variant", flags.variant, "channel variant");

    // grad-check
    auto* grad_cmd = app.add_subcommand("grad-check", "verify gradients against central differences");
    int gc_tokens = 5;
    uint64_t gc_seed = 3;
    double gc_tolerance = 1e-3;
    grad_cmd->add_option("--tokens", gc_tokens, "sentence length");
    grad_cmd->add_option("--seed", gc_seed, "setup seed");
    grad_cmd->add_option("--tolerance", gc_tolerance, "max relative error allowed");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "train and score channel variants");
    std::string variants_csv;
    ablate_cmd->add_option("--config", flags.config, "key=value config file");
    ablate_cmd->add_option("--data", flags.data, "sentence file")->required();
    ablate_cmd->add_option("--seed", seed_flag, "master seed (overrides config)");
    ablate_cmd->add_option("--variants", variants_csv, "comma-separated variant names")->required();
    ablate_cmd->add_option("--out", flags.out, "metrics stream path");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "parameter study along one axis");
    std::string axis, values_csv;
    sweep_cmd->add_option("--config", flags.config, "key=value config file");
    sweep_cmd->add_option("--data", flags.data, "sentence file")->required();
    sweep_cmd->add_option("--seed", seed_flag, "master seed (overrides config)");
    sweep_cmd->add_option("--axis", axis, "label_rate|layers|d_model|rho_sem")->required();
    sweep_cmd->add_option("--values", values_csv, "comma-separated values")->required();
    sweep_cmd->add_option("--out", flags.out, "metrics stream path");

    std::vector<std::string> argv_copy = args;
    try {
        std::vector<const char*> argv;
        argv.push_back("mcted");
        for (const std::string& a : argv_copy) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    const auto seed_given = [&](CLI::App* cmd) {
        return cmd->count("--seed") > 0;
    };

    try {
        if (app.got_subcommand(gen)) {
            return cmd_gen_data(gen_out, gen_seed, gen_config);
        }
        if (app.got_subcommand(train_cmd)) {
            if (seed_given(train_cmd)) flags.seed = seed_flag;
            return cmd_train(flags, out);
        }
        if (app.got_subcommand(eval_cmd)) {
            return cmd_eval(flags, out);
        }
        if (app.got_subcommand(predict_cmd)) {
            return cmd_predict(flags, out);
        }
        if (app.got_subcommand(grad_cmd)) {
            return cmd_grad_check(gc_tokens, gc_seed, gc_tolerance, out);
        }
        if (app.got_subcommand(ablate_cmd)) {
            if (seed_given(ablate_cmd)) flags.seed = seed_flag;
            return cmd_ablate(flags, variants_csv, out);
        }
        if (app.got_subcommand(sweep_cmd)) {
            if (seed_given(sweep_cmd)) flags.seed = seed_flag;
            return cmd_sweep(flags, axis, values_csv, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << "usage error: no command\n";
    return 2;
}

}  // namespace mcted
