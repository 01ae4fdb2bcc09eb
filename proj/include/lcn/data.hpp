// Tabular data ingestion and the evaluation metrics (AUC with tie credit,
// subset AUC, RMSE).
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lcn/common.hpp"

namespace lcn {

enum class Task { Classification, Regression };
enum class Split { Train, Val, Test };

const char* to_string(Task t);
Task task_from_string(const std::string& s);

struct Dataset {
    Matrix features;  // N x D
    Matrix labels;    // N x L
    Task task = Task::Classification;
    std::vector<Split> split;  // per row
    std::vector<std::string> feature_names;
    std::vector<std::string> label_names;

    int size() const { return features.rows(); }
    int input_dim() const { return features.cols(); }
    int label_dim() const { return labels.cols(); }
    std::vector<int> rows_in(Split s) const;
    // Single-label view sharing no storage; used for one-model-per-label
    // training.
    Dataset select_label(int label) const;
    void validate() const;
};

// Split source: either a CSV column holding train/val/test tags, or ratios
// plus a shuffle seed.
struct SplitColumn {
    std::string name;
};
struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
    std::uint64_t seed = 0;
};
using SplitSpec = std::variant<SplitColumn, SplitRatios>;

// Parses a headered CSV with '.' decimals. Label columns are picked out by
// name; everything else (minus a split column, when named) becomes a
// feature. Rows with missing or non-numeric cells are rejected with their
// location. When task is not given it is inferred: all-binary labels mean
// classification.
Dataset load_csv(const std::string& path, const std::vector<std::string>& label_columns,
                 const SplitSpec& split, std::optional<Task> task = std::nullopt);

// Parses every column not listed in `exclude` as a feature. For scoring
// files that carry no labels.
Matrix load_feature_csv(const std::string& path, const std::vector<std::string>& exclude,
                        std::vector<std::string>* names = nullptr);

void write_csv(const Dataset& data, const std::string& path);

// Optional per-feature z-scoring, fitted on the train split and recorded in
// the model file so inference re-applies it.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;  // entries are >= tiny; constant columns keep 1

    static Standardizer fit(const Matrix& features, std::span<const int> rows);
    void apply(std::span<double> row) const;
    Matrix transformed(const Matrix& features) const;
    bool operator==(const Standardizer&) const = default;
};

// Pairwise AUC with 0.5 credit for score ties, computed by sort-based
// ranking in O(N log N). Throws UndefinedMetric when labels are one class.
double auc(std::span<const double> scores, std::span<const double> labels);

// Generalization that scores only the rows in `subset`, pairing them
// against every row. With subset = all rows this reduces to auc().
// Throws UndefinedMetric when no label-discordant pair touches the subset.
double subset_auc(std::span<const double> scores, std::span<const double> labels,
                  std::span<const int> subset);

double rmse(std::span<const double> predictions, std::span<const double> targets);

}  // namespace lcn
