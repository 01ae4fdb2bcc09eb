// Training: losses, exact reverse-mode gradients through the Jacobian
// feature map and head, DropConnect, the annealing schedule, and the
// mini-batch SGD loop. Gradients treat every hard indicator I[z >= 0] as
// locally constant (the ReLU sub-gradient convention) while differentiating
// through all smooth factors; the annealed softplus term is what carries
// learning signal into dead regions.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lcn/data.hpp"
#include "lcn/network.hpp"

namespace lcn {

enum class LossKind { CrossEntropy, MeanSquaredError };
const char* to_string(LossKind k);
LossKind loss_from_string(const std::string& s);

enum class AnnealKind { LinearToRelu, Constant };

struct AnnealSchedule {
    AnnealKind kind = AnnealKind::LinearToRelu;
    double value = 1.0;  // used by Constant

    // LinearToRelu: lambda_t = epoch / total_epochs (epochs are 1-based).
    double lambda_for_epoch(int epoch, int total_epochs) const;
};

enum class OptimizerKind { Sgd, AmsGrad };

struct AmsGradSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 64;
    double learning_rate = 0.1;
    int lr_decay_every = 10;       // epochs between learning-rate steps
    double lr_decay_factor = 0.1;  // multiplier applied at each step
    AnnealSchedule anneal;
    double dropconnect_prob = 0.0;
    LossKind loss = LossKind::CrossEntropy;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Sgd;
    AmsGradSettings amsgrad;

    void validate() const;
    double lr_for_epoch(int epoch) const;

    // Classification: 30 epochs at lr 0.1 stepped x0.1 every 10 epochs;
    // regression: 60 epochs at 1e-4 stepped every 30. Batch size 64.
    static TrainConfig defaults_for(Task task);
};

// Per-parameter accumulators mirroring LcnParameters shape-for-shape.
struct GradientBundle {
    std::vector<std::vector<double>> layer_weights;
    std::vector<double> layer_biases;
    std::vector<AffineLayer> head;  // FC layers, or a single layer for LinearHead

    static GradientBundle zeros_like(const LcnParameters& params);
};

// Every trainable scalar in a fixed order: per layer its weight row then its
// bias, then head layers (weights row-major, then bias). The two overloads
// enumerate matching positions, which is what ties optimizer state, gradient
// bundles, and the finite-difference oracle to the same indexing.
std::vector<double*> parameter_pointers(LcnParameters& params);
std::vector<double*> gradient_pointers(GradientBundle& grads);
size_t parameter_count(const LcnParameters& params);

// DropConnect: per-entry Bernoulli keep masks over the backbone weight rows,
// with retained entries scaled by 1/(1-p) so the masked weights are unbiased.
// Masks are resampled per mini-batch; evaluation applies no mask.
struct DropMasks {
    std::vector<std::vector<std::uint8_t>> keep;
    double scale = 1.0;
};
DropMasks dropconnect_mask(const LcnParameters& shape, double prob, Rng& rng);

// Mean-over-outputs loss for one sample. CrossEntropy treats each output as
// an independent logit against a {0,1} target (multi-label binary), computed
// in the stable logits form. Throws DivergenceError on non-finite input.
double loss_value(std::span<const double> pred, std::span<const double> label, LossKind kind);

// Rows of a dataset (plus optional frozen-ensemble offsets added to the
// prediction before the loss).
struct BatchView {
    const Matrix* features = nullptr;
    const Matrix* labels = nullptr;
    const Matrix* offsets = nullptr;  // nullable, same row indexing
    std::span<const int> rows;
};

struct BackwardResult {
    double loss = 0.0;  // mean over the batch
    GradientBundle grads;
};

// Exact gradient of the mean batch loss with respect to every parameter of
// the (optionally masked) network. Table heads are not differentiable and
// are rejected.
BackwardResult backward(const LcnParameters& params, const BatchView& batch, double lambda,
                        LossKind loss, const DropMasks* masks = nullptr);

// Mean loss over the given rows at a fixed lambda, no masks. Used for
// validation-style bookkeeping and the ensemble's stage accounting.
double dataset_loss(const LcnParameters& params, const BatchView& batch, double lambda,
                    LossKind loss);

// Read-only prediction fan-out; rows are written independently so the result
// is identical for any thread count.
Matrix predict_rows(const LcnParameters& params, const Matrix& features,
                    std::span<const int> rows, double lambda, int threads = 1);

struct EpochLog {
    int epoch = 0;
    double lambda = 1.0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_metric = 0.0;  // mean AUC (classification) or RMSE (regression); NaN if unavailable
};

struct TrainResult {
    LcnParameters params;
    std::vector<EpochLog> log;
};

struct TrainOptions {
    const Matrix* offsets = nullptr;  // frozen-ensemble outputs per dataset row
    // When set, the returned parameters are the epoch snapshot (including the
    // initial state) with the lowest full-train-set loss measured at
    // checkpoint_lambda. The boosting loop relies on this for its stagewise
    // non-worsening guarantee.
    bool keep_best_by_train_loss = false;
    double checkpoint_lambda = 1.0;
};

// Mini-batch SGD with per-epoch annealing and stepped learning rate.
// Deterministic for a fixed seed on one thread. Divergence aborts with the
// epoch/batch location.
TrainResult train_with_options(LcnParameters params, const Dataset& data,
                               const TrainConfig& config, const TrainOptions& options);

inline TrainResult train(LcnParameters params, const Dataset& data, const TrainConfig& config) {
    return train_with_options(std::move(params), data, config, TrainOptions{});
}

void write_metrics_csv(const std::vector<EpochLog>& log, const std::string& path);

}  // namespace lcn
