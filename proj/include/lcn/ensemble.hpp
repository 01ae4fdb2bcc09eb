// ELCN: additive ensembles of Lcn/Alcn base models trained stage by stage.
// Each stage freezes everything trained so far, caches its summed outputs as
// a per-row offset, and optimizes a single fresh component against that
// offset, so only one component is ever resident during training.
#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "lcn/train.hpp"

namespace lcn {

struct ElcnModel {
    Variant base_variant = Variant::Alcn;
    int input_dim = 0;
    int output_dim = 0;
    std::vector<LcnParameters> components;

    void validate() const;
};

// Elementwise sum of component outputs. Classification sums pre-link logits;
// apply the logistic link after summing.
std::vector<double> elcn_predict(const ElcnModel& model, std::span<const double> x);

struct ElcnConfig {
    ModelSpec spec;            // layout of every component
    TrainConfig stage;         // per-stage schedule; optimizer defaults to AMSGrad
    int ensemble_size = 1;     // E

    // AMSGrad, batch 256, 30 epochs per stage, lr 0.01 for
    // classification / 1e-4 for regression, DropConnect 0.75 / 0.25,
    // depth 12.
    static ElcnConfig defaults_for(Task task);
};

struct StageLog {
    int stage = 0;
    // Full-train-set loss with the fresh zero-head component in place; for
    // stages >= 2 this equals the previous stage's final loss exactly.
    double initial_train_loss = 0.0;
    // Full-train-set loss of the grown ensemble (after the within-stage
    // best-checkpoint rule), i.e. the loss implied by the updated offsets.
    double final_train_loss = 0.0;
    std::vector<EpochLog> epochs;
};

struct ElcnTrainStats {
    std::vector<StageLog> stages;
    // Components simultaneously held by the trainer; the boosting loop owns
    // only the in-training one.
    int peak_resident_components = 1;
};

// Receives each finished component in stage order; ownership transfers so
// the trainer keeps nothing after the call.
using ComponentSink = std::function<void(int stage, LcnParameters&& component)>;

// Stage seeds are derived as config.stage.seed + (stage - 1), so stage 1
// reproduces a single-model run with the same seed, and any prefix of a
// larger ensemble is bit-identical to training the smaller one.
ElcnTrainStats elcn_train(const Dataset& data, const ElcnConfig& config,
                          const ComponentSink& sink);

// Convenience wrapper that gathers the components into a model.
std::pair<ElcnModel, ElcnTrainStats> elcn_train_collect(const Dataset& data,
                                                        const ElcnConfig& config);

}  // namespace lcn
