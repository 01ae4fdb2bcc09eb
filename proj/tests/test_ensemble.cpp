#include <doctest.h>

#include <cmath>

#include "lcn/ensemble.hpp"
#include "lcn/verify.hpp"

using namespace lcn;

namespace {

// y(x) = step(x0) + step(x1): two axis-aligned steps, the classic target a
// single small constant-output model cannot fit alone.
Dataset two_step_regression(std::uint64_t seed, int n) {
    Rng rng(seed);
    Dataset data;
    data.task = Task::Regression;
    data.features = Matrix(n, 2);
    data.labels = Matrix(n, 1);
    for (int r = 0; r < n; ++r) {
        const double a = rng.uniform(-1.0, 1.0);
        const double b = rng.uniform(-1.0, 1.0);
        data.features.at(r, 0) = a;
        data.features.at(r, 1) = b;
        data.labels.at(r, 0) = (a > 0.0 ? 1.0 : 0.0) + (b > 0.2 ? 1.0 : 0.0);
    }
    data.split.assign(n, Split::Train);
    for (int r = 0; r < n / 10; ++r) data.split[r] = Split::Val;
    data.feature_names = {"a", "b"};
    data.label_names = {"y"};
    return data;
}

ElcnConfig small_config(int e, std::uint64_t seed) {
    ElcnConfig cfg = ElcnConfig::defaults_for(Task::Regression);
    cfg.ensemble_size = e;
    cfg.spec.depth = 3;
    cfg.stage.epochs = 8;
    cfg.stage.batch_size = 64;
    cfg.stage.learning_rate = 0.02;
    cfg.stage.dropconnect_prob = 0.0;
    cfg.stage.seed = seed;
    return cfg;
}

ElcnModel negated_pair(std::uint64_t seed) {
    ElcnModel model;
    model.base_variant = Variant::Lcn;
    model.input_dim = 3;
    model.output_dim = 2;
    LcnParameters a = random_network(seed, 3, 3, 2, HeadKind::FullyConnected, {4});
    LcnParameters b = a;
    auto& fc = std::get<FullyConnectedHead>(b.head);
    AffineLayer& last = fc.layers.back();
    for (double& v : last.weight.data()) v = -v;
    for (double& v : last.bias) v = -v;
    model.components = {std::move(a), std::move(b)};
    return model;
}

}  // namespace

TEST_CASE("elcn_predict sums component outputs") {
    const LcnParameters single = random_network(5, 3, 4, 2, HeadKind::FullyConnected, {3});
    ElcnModel one;
    one.base_variant = Variant::Lcn;
    one.input_dim = 4;
    one.output_dim = 2;
    one.components = {single};
    Rng rng(6);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> x(4);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        CHECK(elcn_predict(one, x) == predict(single, x));
    }

    // Heads negated copies of each other cancel exactly.
    const ElcnModel pair = negated_pair(7);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> x(3);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        for (double v : elcn_predict(pair, x)) CHECK(v == 0.0);
    }

    // Three components equal the brute-force sum.
    ElcnModel three;
    three.base_variant = Variant::Lcn;
    three.input_dim = 3;
    three.output_dim = 1;
    for (std::uint64_t s : {11u, 12u, 13u})
        three.components.push_back(random_network(s, 2, 3, 1, HeadKind::FullyConnected));
    for (int i = 0; i < 50; ++i) {
        std::vector<double> x(3);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        double expected = 0.0;
        for (const LcnParameters& c : three.components) expected += predict(c, x)[0];
        CHECK(elcn_predict(three, x)[0] == doctest::Approx(expected).epsilon(1e-15));
    }
}

TEST_CASE("stage one equals a single-model run with the same seed and optimizer") {
    const Dataset data = two_step_regression(21, 300);
    const ElcnConfig cfg = small_config(1, 77);
    const auto [model, stats] = elcn_train_collect(data, cfg);
    REQUIRE(model.components.size() == 1);

    Rng init(77);
    LcnParameters params = initialize_model(cfg.spec, 2, 1, init);
    TrainConfig single = cfg.stage;
    single.seed = 77;
    TrainOptions opts;
    opts.keep_best_by_train_loss = true;
    opts.checkpoint_lambda = params.eval_lambda();
    const TrainResult direct = train_with_options(std::move(params), data, single, opts);

    CHECK(model.components[0].layer_weights == direct.params.layer_weights);
    CHECK(model.components[0].layer_biases == direct.params.layer_biases);
    const auto& ha = std::get<FullyConnectedHead>(model.components[0].head);
    const auto& hb = std::get<FullyConnectedHead>(direct.params.head);
    for (size_t l = 0; l < ha.layers.size(); ++l) {
        CHECK(ha.layers[l].weight == hb.layers[l].weight);
        CHECK(ha.layers[l].bias == hb.layers[l].bias);
    }
}

TEST_CASE("zero-initialized heads start each stage at the previous loss") {
    const Dataset data = two_step_regression(31, 400);
    const auto [model, stats] = elcn_train_collect(data, small_config(4, 9));
    REQUIRE(stats.stages.size() == 4);
    for (size_t e = 1; e < stats.stages.size(); ++e) {
        CHECK(stats.stages[e].initial_train_loss ==
              doctest::Approx(stats.stages[e - 1].final_train_loss).epsilon(1e-12));
    }
}

TEST_CASE("stage losses never worsen and the ensemble improves") {
    const Dataset data = two_step_regression(41, 600);
    const auto [model, stats] = elcn_train_collect(data, small_config(6, 3));
    for (size_t e = 1; e < stats.stages.size(); ++e)
        CHECK(stats.stages[e].final_train_loss <=
              stats.stages[e - 1].final_train_loss + 1e-9);
    CHECK(stats.stages.back().final_train_loss < stats.stages.front().final_train_loss);
    CHECK(stats.peak_resident_components == 1);
}

TEST_CASE("offset cache equals the recomputed component sum exactly") {
    const Dataset data = two_step_regression(51, 200);
    const auto [model, stats] = elcn_train_collect(data, small_config(3, 13));
    REQUIRE(model.components.size() == 3);

    // Recompute the frozen sum in stage order and compare against what the
    // final stage saw: its initial loss must equal the loss of these sums.
    Matrix offsets(data.size(), 1, 0.0);
    std::vector<int> all(data.size());
    for (int i = 0; i < data.size(); ++i) all[i] = i;
    for (size_t e = 0; e + 1 < model.components.size(); ++e) {
        const Matrix p = predict_rows(model.components[e], data.features, all,
                                      model.components[e].eval_lambda());
        for (int r = 0; r < data.size(); ++r) offsets.at(r, 0) += p.at(r, 0);
    }
    const std::vector<int> train_rows = data.rows_in(Split::Train);
    double sum = 0.0;
    for (int r : train_rows)
        sum += loss_value(offsets.row_span(r), data.labels.row_span(r),
                          LossKind::MeanSquaredError);
    const double recomputed = sum / static_cast<double>(train_rows.size());
    CHECK(recomputed == stats.stages[2].initial_train_loss);
}

TEST_CASE("prefix property: a smaller ensemble is a prefix of a larger one") {
    const Dataset data = two_step_regression(61, 200);
    const auto [small, s1] = elcn_train_collect(data, small_config(2, 5));
    const auto [large, s2] = elcn_train_collect(data, small_config(4, 5));
    for (int e = 0; e < 2; ++e) {
        CHECK(small.components[e].layer_weights == large.components[e].layer_weights);
        CHECK(small.components[e].layer_biases == large.components[e].layer_biases);
    }
    CHECK(s1.stages[1].final_train_loss == s2.stages[1].final_train_loss);
}

TEST_CASE("a diverging stage reports its index") {
    const Dataset data = two_step_regression(81, 150);
    ElcnConfig cfg = small_config(3, 7);
    cfg.stage.learning_rate = 1e200;  // AMSGrad steps track lr, so force overflow outright
    try {
        elcn_train_collect(data, cfg);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.what()).find("ensemble stage 1") != std::string::npos);
    }
}

TEST_CASE("ensemble rejects lln bases and bad sizes") {
    const Dataset data = two_step_regression(71, 100);
    ElcnConfig cfg = small_config(0, 1);
    CHECK_THROWS_AS(elcn_train_collect(data, cfg), Error);
    cfg = small_config(2, 1);
    cfg.spec.variant = Variant::Lln;
    CHECK_THROWS_AS(elcn_train_collect(data, cfg), Error);
}
