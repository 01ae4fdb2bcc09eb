#include "lcn/ensemble.hpp"

#include <cmath>

namespace lcn {

void ElcnModel::validate() const {
    if (components.empty()) throw Error("ensemble has no components");
    for (const LcnParameters& c : components) {
        c.validate();
        if (c.input_dim != input_dim || c.output_dim != output_dim)
            throw Error("ensemble components must share input and output dims");
    }
}

std::vector<double> elcn_predict(const ElcnModel& model, std::span<const double> x) {
    model.validate();
    std::vector<double> sum(model.output_dim, 0.0);
    for (const LcnParameters& c : model.components) {
        const std::vector<double> p = predict(c, x);
        for (int j = 0; j < model.output_dim; ++j) sum[j] += p[j];
    }
    return sum;
}

ElcnConfig ElcnConfig::defaults_for(Task task) {
    ElcnConfig cfg;
    cfg.spec.depth = 12;
    cfg.spec.variant = Variant::Alcn;
    cfg.spec.head = HeadKind::FullyConnected;
    cfg.stage.optimizer = OptimizerKind::AmsGrad;
    cfg.stage.epochs = 30;
    cfg.stage.batch_size = 256;
    cfg.stage.lr_decay_every = 30;  // no step within a stage
    cfg.stage.lr_decay_factor = 1.0;
    cfg.stage.anneal = AnnealSchedule{AnnealKind::Constant, 0.0};
    if (task == Task::Classification) {
        cfg.stage.learning_rate = 0.01;
        cfg.stage.loss = LossKind::CrossEntropy;
        cfg.stage.dropconnect_prob = 0.75;
    } else {
        cfg.stage.learning_rate = 1e-4;
        cfg.stage.loss = LossKind::MeanSquaredError;
        cfg.stage.dropconnect_prob = 0.25;
    }
    return cfg;
}

namespace {

void zero_final_head_layer(LcnParameters& params) {
    auto& fc = std::get<FullyConnectedHead>(params.head);
    AffineLayer& last = fc.layers.back();
    std::fill(last.weight.data().begin(), last.weight.data().end(), 0.0);
    std::fill(last.bias.begin(), last.bias.end(), 0.0);
}

// Loss of the frozen ensemble alone. Accumulation order matches
// dataset_loss so the stage bookkeeping compares bit-for-bit.
double offsets_loss(const Matrix& offsets, const Matrix& labels, std::span<const int> rows,
                    LossKind loss) {
    double sum = 0.0;
    for (int row : rows) sum += loss_value(offsets.row_span(row), labels.row_span(row), loss);
    return sum / static_cast<double>(rows.size());
}

}  // namespace

ElcnTrainStats elcn_train(const Dataset& data, const ElcnConfig& config,
                          const ComponentSink& sink) {
    if (config.ensemble_size < 1) throw Error("ensemble size must be >= 1");
    if (config.spec.variant == Variant::Lln)
        throw Error("ensemble base models must be lcn or alcn");
    if (config.spec.head != HeadKind::FullyConnected)
        throw Error("ensemble components need a fully-connected head");
    config.stage.validate();
    data.validate();

    const std::vector<int> train_rows = data.rows_in(Split::Train);
    if (train_rows.empty()) throw DataError("train split is empty");
    std::vector<int> all_rows(data.size());
    for (int i = 0; i < data.size(); ++i) all_rows[i] = i;

    // Cached outputs of every frozen component, summed in stage order.
    Matrix offsets(data.size(), data.label_dim(), 0.0);

    ElcnTrainStats stats;
    for (int stage = 1; stage <= config.ensemble_size; ++stage) {
        const std::uint64_t stage_seed = config.stage.seed + static_cast<std::uint64_t>(stage - 1);
        Rng init_rng(stage_seed);
        LcnParameters component =
            initialize_model(config.spec, data.input_dim(), data.label_dim(), init_rng);
        if (stage >= 2) zero_final_head_layer(component);
        const double eval_lambda = component.eval_lambda();

        StageLog log;
        log.stage = stage;
        log.initial_train_loss = dataset_loss(
            component, BatchView{&data.features, &data.labels, &offsets, train_rows},
            eval_lambda, config.stage.loss);

        TrainConfig stage_cfg = config.stage;
        stage_cfg.seed = stage_seed;

        TrainOptions options;
        options.offsets = &offsets;
        options.keep_best_by_train_loss = true;
        options.checkpoint_lambda = eval_lambda;

        TrainResult result;
        try {
            result = train_with_options(std::move(component), data, stage_cfg, options);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " in ensemble stage " +
                                      std::to_string(stage),
                                  e.epoch, e.batch);
        }
        log.epochs = std::move(result.log);

        // Freeze the component into the offset cache, then hand it off.
        const Matrix preds =
            predict_rows(result.params, data.features, all_rows, eval_lambda);
        for (int r = 0; r < data.size(); ++r)
            for (int j = 0; j < data.label_dim(); ++j) offsets.at(r, j) += preds.at(r, j);

        log.final_train_loss =
            offsets_loss(offsets, data.labels, train_rows, config.stage.loss);
        stats.stages.push_back(std::move(log));
        sink(stage, std::move(result.params));
    }
    stats.peak_resident_components = 1;
    return stats;
}

std::pair<ElcnModel, ElcnTrainStats> elcn_train_collect(const Dataset& data,
                                                        const ElcnConfig& config) {
    ElcnModel model;
    model.base_variant = config.spec.variant;
    model.input_dim = data.input_dim();
    model.output_dim = data.label_dim();
    ElcnTrainStats stats = elcn_train(data, config, [&](int, LcnParameters&& c) {
        model.components.push_back(std::move(c));
    });
    return {std::move(model), stats};
}

}  // namespace lcn
