#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mcted/rng.hpp"
#include "mcted/synthetic.hpp"
#include "mcted/training.hpp"
#include "mcted/util.hpp"

using namespace mcted;

namespace {

Hyperparameters tiny_hp() {
    Hyperparameters hp = Hyperparameters::synthetic_defaults();
    hp.d_word = 8;
    hp.d_model = 10;
    hp.d_r = 5;
    hp.d_w = 5;
    hp.epochs = 4;
    hp.patience = 4;
    hp.dropout_rate = 0.1;
    return hp;
}

CorpusSplit tiny_split(int n_train, int n_valid, uint64_t seed) {
    GeneratorConfig config;
    config.sentence_count = n_train + n_valid;
    const auto corpus = generate_synthetic(config, seed);
    CorpusSplit split;
    split.seed = seed;
    split.train.assign(corpus.begin(), corpus.begin() + n_train);
    split.valid.assign(corpus.begin() + n_train, corpus.end());
    split.test = split.valid;
    return split;
}

}  // namespace

TEST_CASE("adam leaves parameters alone under zero gradients") {
    Tensor theta = Tensor::row({1.0, -2.0, 3.0});
    const Tensor before = theta;
    Tensor grad(1, 3);
    AdamState state;
    for (int step = 0; step < 10; ++step) {
        adam_step({AdamParam{"theta", &theta, &grad}}, state, 0.1, 0.0);
    }
    CHECK(theta == before);
}

TEST_CASE("adam minimizes a one-dimensional quadratic") {
    Tensor theta = Tensor::scalar(3.0);
    AdamState state;
    for (int step = 0; step < 500; ++step) {
        Tensor grad = Tensor::scalar(theta[0]);  // d/dx of x^2/2
        adam_step({AdamParam{"theta", &theta, &grad}}, state, 0.05, 0.0);
        if (std::abs(theta[0]) < 1e-3) break;
    }
    CHECK(std::abs(theta[0]) < 1e-3);
}

TEST_CASE("adam with vanishing learning rate is a no-op") {
    Rng rng(3);
    Tensor theta(4, 4);
    for (size_t i = 0; i < theta.size(); ++i) theta[i] = rng.gaussian(0.0, 1.0);
    const Tensor before = theta;
    AdamState state;
    for (int step = 0; step < 25; ++step) {
        Tensor grad(4, 4);
        for (size_t i = 0; i < grad.size(); ++i) grad[i] = rng.gaussian(0.0, 1.0);
        adam_step({AdamParam{"theta", &theta, &grad}}, state, 1e-300, 0.001);
    }
    for (size_t i = 0; i < theta.size(); ++i) {
        CHECK(std::abs(theta[i] - before[i]) < 1e-12);
    }
}

TEST_CASE("adam aborts on NaN gradients naming the group") {
    Tensor theta = Tensor::scalar(1.0);
    Tensor grad = Tensor::scalar(std::nan(""));
    AdamState state;
    CHECK_THROWS_WITH_AS(adam_step({AdamParam{"encoder_fwd_bias", &theta, &grad}}, state, 0.1, 0.0),
                         doctest::Contains("encoder_fwd_bias"), contract_error);
}

TEST_CASE("dropout is the identity in eval mode and at rate zero") {
    Rng rng(5);
    Tensor x(4, 6);
    for (size_t i = 0; i < x.size(); ++i) x[i] = rng.gaussian(0.0, 1.0);
    CHECK(apply_dropout(x, 0.6, 1, false) == x);
    CHECK(apply_dropout(x, 0.0, 1, true) == x);
    CHECK(apply_dropout(x, 0.0, 1, false) == x);
}

TEST_CASE("dropout keeps the expected value") {
    const double rate = 0.6;
    Tensor x = Tensor::full(1, 8, 1.0);
    double total = 0.0;
    long long count = 0;
    for (uint64_t seed = 0; seed < 10000; ++seed) {
        const Tensor dropped = apply_dropout(x, rate, seed, true);
        for (size_t i = 0; i < dropped.size(); ++i) {
            const double keep_scale = 1.0 / (1.0 - rate);
            CHECK((dropped[i] == 0.0 || dropped[i] == doctest::Approx(keep_scale)));
            total += dropped[i];
            ++count;
        }
    }
    const double mean = total / static_cast<double>(count);
    CHECK(std::abs(mean - 1.0) < 0.01);
}

TEST_CASE("scoring: all predictions correct") {
    const EvalReport r = score_predictions({{"happen", "NONE", "defect"}},
                                           {{"happen", "NONE", "defect"}});
    CHECK(r.p_id == 1.0);
    CHECK(r.r_id == 1.0);
    CHECK(r.f1_id == 1.0);
    CHECK(r.p_cls == 1.0);
    CHECK(r.r_cls == 1.0);
    CHECK(r.f1_cls == 1.0);
}

TEST_CASE("scoring: all-NONE predictions against gold triggers") {
    const EvalReport r = score_predictions({{"happen", "NONE"}}, {{"NONE", "NONE"}});
    CHECK(r.r_cls == 0.0);
    CHECK(r.p_cls == 0.0);  // zero-denominator convention
    CHECK(r.f1_cls == 0.0);
}

TEST_CASE("scoring: hand-counted six-token case") {
    // two gold triggers; prediction hits one and raises one false alarm
    const std::vector<std::string> gold = {"happen", "NONE", "defect", "NONE", "NONE", "NONE"};
    const std::vector<std::string> pred = {"happen", "NONE", "NONE", "operate", "NONE", "NONE"};
    const EvalReport r = score_predictions({gold}, {pred});
    CHECK(r.p_cls == doctest::Approx(0.5));
    CHECK(r.r_cls == doctest::Approx(0.5));
    CHECK(r.f1_cls == doctest::Approx(0.5));
    CHECK(r.p_id == doctest::Approx(0.5));
    CHECK(r.r_id == doctest::Approx(0.5));
}

TEST_CASE("plateau stops after exactly patience epochs") {
    Hyperparameters hp = tiny_hp();
    hp.learning_rate = 1e-300;  // updates vanish in double precision
    hp.dropout_rate = 0.0;
    hp.epochs = 50;
    hp.patience = 1;
    const TrainResult result = train(hp, tiny_split(12, 4, 3));
    CHECK(result.history.stop_reason == "early_stop");
    CHECK(result.history.best_epoch == 1);
    CHECK(result.history.stop_epoch == 2);
}

TEST_CASE("stop epoch never trails the best epoch by more than patience") {
    for (const int patience : {1, 3, 5}) {
        Hyperparameters hp = tiny_hp();
        hp.epochs = 12;
        hp.patience = patience;
        hp.seed = static_cast<uint64_t>(100 + patience);
        const TrainResult result = train(hp, tiny_split(14, 5, 9));
        CHECK(result.history.stop_epoch - result.history.best_epoch <= patience);
        CHECK(result.history.best_epoch >= 1);
        const double best = *std::min_element(result.history.valid_loss.begin(),
                                              result.history.valid_loss.end());
        CHECK(result.history.valid_loss[static_cast<size_t>(result.history.best_epoch - 1)] ==
              best);
    }
}

TEST_CASE("training is deterministic given the seed") {
    Hyperparameters hp = tiny_hp();
    hp.epochs = 3;
    const CorpusSplit split = tiny_split(12, 4, 21);

    std::ostringstream stream_a, stream_b;
    MetricsSink sink_a(&stream_a), sink_b(&stream_b);
    const TrainResult a = train(hp, split, VariantSpec{}, &sink_a, "run");
    const TrainResult b = train(hp, split, VariantSpec{}, &sink_b, "run");
    CHECK(a.history.train_loss == b.history.train_loss);
    CHECK(a.history.valid_loss == b.history.valid_loss);
    CHECK(stream_a.str() == stream_b.str());
    CHECK(!stream_a.str().empty());

    const auto refs_a = parameter_refs(const_cast<ModelParameters&>(a.model.params), false);
    const auto refs_b = parameter_refs(const_cast<ModelParameters&>(b.model.params), false);
    for (size_t i = 0; i < refs_a.size(); ++i) CHECK(*refs_a[i].value == *refs_b[i].value);
}

TEST_CASE("metrics stream lines carry the fixed key set") {
    std::ostringstream stream;
    MetricsSink sink(&stream);
    EvalReport report;
    report.p_id = 0.5;
    sink.write("run-1", 3, "valid", 1.25, report);
    const std::string line = stream.str();
    CHECK(line.find("{\"run_id\":\"run-1\",\"epoch\":3,\"split\":\"valid\",\"loss\":1.25,") == 0);
    CHECK(line.find("\"p_id\":0.5") != std::string::npos);
    CHECK(line.find("\"f1_cls\":0") != std::string::npos);
    CHECK(line.back() == '\n');
}

TEST_CASE("evaluate is pure") {
    Hyperparameters hp = tiny_hp();
    hp.epochs = 2;
    const CorpusSplit split = tiny_split(10, 4, 33);
    TrainResult result = train(hp, split);
    const EvalReport a = evaluate(result.model, split.valid);
    const EvalReport b = evaluate(result.model, split.valid);
    CHECK(a.loss == b.loss);
    CHECK(a.f1_cls == b.f1_cls);
    CHECK(a.p_id == b.p_id);
}

TEST_CASE("single-batch overfit: windowed loss decreases and train F1 saturates") {
    Hyperparameters hp = Hyperparameters::synthetic_defaults();
    hp.epochs = 150;
    hp.patience = 150;
    GeneratorConfig config;
    config.sentence_count = 20;
    const auto corpus = generate_synthetic(config, 7);
    CorpusSplit split;
    split.train = corpus;
    split.valid = corpus;
    split.test = corpus;
    TrainResult result = train(hp, split);
    REQUIRE(result.history.train_loss.size() == 150);

    // mean over each 50-epoch block decreases until the loss hits its floor
    std::vector<double> block_means;
    for (size_t start = 0; start + 50 <= 150; start += 50) {
        double total = 0.0;
        for (size_t i = start; i < start + 50; ++i) total += result.history.train_loss[i];
        block_means.push_back(total / 50.0);
    }
    for (size_t k = 1; k < block_means.size(); ++k) {
        const bool decreased = block_means[k] < block_means[k - 1];
        const bool floored = block_means[k] < 0.01 * block_means[0];
        CHECK((decreased || floored));
    }

    const EvalReport report = evaluate(result.model, split.train);
    CHECK(report.f1_cls >= 0.99);
}

TEST_CASE("NaN inputs abort training with the history preserved") {
    Hyperparameters hp = tiny_hp();
    const std::string poisoned = "bulletin nan nan nan nan nan nan nan nan\n";
    const TrainResult result =
        train(hp, tiny_split(8, 3, 55), VariantSpec{}, nullptr, "poisoned", &poisoned);
    CHECK(result.history.stop_reason == "diverged");
    CHECK(result.history.stop_epoch == 1);
    CHECK(result.history.train_loss.empty());
}

TEST_CASE("ablate maps variants to lambda masks and scores each") {
    Hyperparameters hp = tiny_hp();
    hp.epochs = 2;
    const CorpusSplit split = tiny_split(10, 4, 77);
    const auto reports = ablate(hp, split, {"G1", "G2+G3"});
    CHECK(reports.size() == 2);
    CHECK(reports.count("G1") == 1);
    CHECK(reports.count("G2+G3") == 1);
    CHECK_THROWS_AS(ablate(hp, split, {"nope"}), validation_error);
    CHECK_THROWS_AS(ablate(hp, split, {}), contract_error);
}

TEST_CASE("module-freeze and homogeneous variants train") {
    Hyperparameters hp = tiny_hp();
    hp.epochs = 2;
    const CorpusSplit split = tiny_split(10, 4, 78);
    const auto reports = ablate(hp, split, {"freeze-R", "freeze-A", "homogeneous"});
    CHECK(reports.size() == 3);

    // frozen tables stay at their initial values
    const VariantSpec freeze_r = VariantSpec::from_name("freeze-R");
    TrainResult frozen = train(hp, split, freeze_r);
    Hyperparameters fresh_hp = hp;
    Model fresh = init_model(fresh_hp, Vocabulary::build(split.train, hp.min_count),
                             TypeInventories::build(split.train), frozen.model.labels);
    CHECK(frozen.model.params.relation.relation_table == fresh.params.relation.relation_table);
    CHECK(!(frozen.model.params.word.type_table == fresh.params.word.type_table));
}

TEST_CASE("label_rate 1.0 reproduces the plain training run") {
    Hyperparameters hp = tiny_hp();
    hp.epochs = 2;
    const CorpusSplit split = tiny_split(10, 4, 88);
    const TrainResult plain = train(hp, split);
    const auto swept = sweep(hp, split, "label_rate", {1.0});
    const EvalReport plain_report = evaluate(const_cast<TrainResult&>(plain).model, split.test);
    const EvalReport& swept_report = swept.at("1");
    CHECK(plain_report.loss == swept_report.loss);
    CHECK(plain_report.f1_cls == swept_report.f1_cls);
}

TEST_CASE("sweep validates its axis and values") {
    Hyperparameters hp = tiny_hp();
    const CorpusSplit split = tiny_split(8, 3, 91);
    CHECK_THROWS_AS(sweep(hp, split, "layers", {}), contract_error);
    CHECK_THROWS_AS(sweep(hp, split, "bogus", {1.0}), validation_error);
    CHECK_THROWS_AS(sweep(hp, split, "label_rate", {0.0}), contract_error);
}

TEST_CASE("sweep over layers runs each value") {
    Hyperparameters hp = tiny_hp();
    hp.epochs = 1;
    const CorpusSplit split = tiny_split(8, 3, 92);
    const auto reports = sweep(hp, split, "layers", {1.0, 2.0});
    CHECK(reports.size() == 2);
    CHECK(reports.count("1") == 1);
    CHECK(reports.count("2") == 1);
}
