#include "lcn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace lcn {

const char* to_string(Task t) { return t == Task::Classification ? "classification" : "regression"; }

Task task_from_string(const std::string& s) {
    if (s == "classification") return Task::Classification;
    if (s == "regression") return Task::Regression;
    throw Error("unknown task '" + s + "' (expected classification|regression)");
}

std::vector<int> Dataset::rows_in(Split s) const {
    std::vector<int> rows;
    for (int i = 0; i < size(); ++i)
        if (split[i] == s) rows.push_back(i);
    return rows;
}

Dataset Dataset::select_label(int label) const {
    if (label < 0 || label >= label_dim()) throw Error("label index out of range");
    Dataset out;
    out.features = features;
    out.labels = Matrix(size(), 1);
    for (int i = 0; i < size(); ++i) out.labels.at(i, 0) = labels.at(i, label);
    out.task = task;
    out.split = split;
    out.feature_names = feature_names;
    out.label_names = {label_names.empty() ? std::string("label") : label_names[label]};
    return out;
}

void Dataset::validate() const {
    if (size() == 0) throw DataError("dataset is empty");
    if (static_cast<int>(split.size()) != size()) throw DataError("split must cover every row");
    check_finite(features.data(), "features");
    check_finite(labels.data(), "labels");
    if (task == Task::Classification) {
        for (double v : labels.data())
            if (v != 0.0 && v != 1.0)
                throw DataError("classification labels must be in {0,1}");
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

double parse_cell(const std::string& cell, int row, const std::string& column) {
    auto fail = [&](const char* why) {
        throw DataError("row " + std::to_string(row) + ", column '" + column + "': " + why +
                        " ('" + cell + "')");
    };
    if (cell.empty()) fail("missing value");
    const char* begin = cell.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + cell.size()) fail("not a number");
    if (!std::isfinite(v)) fail("non-finite value");
    return v;
}

Split split_from_tag(const std::string& tag, int row) {
    if (tag == "train") return Split::Train;
    if (tag == "val" || tag == "validation") return Split::Val;
    if (tag == "test") return Split::Test;
    throw DataError("row " + std::to_string(row) + ": unknown split tag '" + tag +
                    "' (expected train|val|test)");
}

std::vector<Split> ratio_split(int n, const SplitRatios& r) {
    if (r.train < 0.0 || r.val < 0.0 || r.test < 0.0)
        throw DataError("split ratios must be non-negative");
    const double total = r.train + r.val + r.test;
    if (!(total > 0.0)) throw DataError("split ratios must sum to a positive value");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(r.seed);
    rng.shuffle(order);
    // Cumulative rounding so the cut sizes track the ratios exactly.
    const int n_train = static_cast<int>(std::floor(n * (r.train / total) + 0.5));
    const int n_train_val = static_cast<int>(std::floor(n * ((r.train + r.val) / total) + 0.5));
    std::vector<Split> split(n, Split::Test);
    for (int i = 0; i < n; ++i) {
        if (i < n_train)
            split[order[i]] = Split::Train;
        else if (i < n_train_val)
            split[order[i]] = Split::Val;
    }
    return split;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::vector<std::string>& label_columns,
                 const SplitSpec& split, std::optional<Task> task) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
    const std::vector<std::string> header = split_csv_line(line);

    auto column_index = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw DataError("column '" + name + "' not found in '" + path + "'");
        return static_cast<int>(it - header.begin());
    };

    if (label_columns.empty()) throw DataError("at least one label column is required");
    std::vector<int> label_idx;
    for (const std::string& name : label_columns) label_idx.push_back(column_index(name));

    int split_idx = -1;
    if (const auto* col = std::get_if<SplitColumn>(&split)) split_idx = column_index(col->name);

    std::vector<int> feature_idx;
    std::vector<std::string> feature_names;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
        if (c == split_idx) continue;
        if (std::find(label_idx.begin(), label_idx.end(), c) != label_idx.end()) continue;
        feature_idx.push_back(c);
        feature_names.push_back(header[c]);
    }
    if (feature_idx.empty()) throw DataError("no feature columns left in '" + path + "'");

    std::vector<double> feat_data;
    std::vector<double> label_data;
    std::vector<Split> tags;
    int n = 0;
    int row = 1;  // header is row 0
    while (std::getline(in, line)) {
        if (line.empty()) {
            ++row;
            continue;
        }
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        for (int c : feature_idx) feat_data.push_back(parse_cell(cells[c], row, header[c]));
        for (int c : label_idx) label_data.push_back(parse_cell(cells[c], row, header[c]));
        if (split_idx >= 0) tags.push_back(split_from_tag(cells[split_idx], row));
        ++n;
        ++row;
    }
    if (n == 0) throw DataError("'" + path + "' has no data rows");

    Dataset data;
    data.features = Matrix(n, static_cast<int>(feature_idx.size()));
    data.features.data() = std::move(feat_data);
    data.labels = Matrix(n, static_cast<int>(label_idx.size()));
    data.labels.data() = std::move(label_data);
    data.feature_names = std::move(feature_names);
    data.label_names = label_columns;
    data.split = split_idx >= 0 ? std::move(tags) : ratio_split(n, std::get<SplitRatios>(split));

    if (task) {
        data.task = *task;
    } else {
        bool binary = true;
        for (double v : data.labels.data())
            if (v != 0.0 && v != 1.0) binary = false;
        data.task = binary ? Task::Classification : Task::Regression;
    }
    data.validate();
    if (data.rows_in(Split::Train).empty()) throw DataError("train split is empty");
    return data;
}

Matrix load_feature_csv(const std::string& path, const std::vector<std::string>& exclude,
                        std::vector<std::string>* names) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
    const std::vector<std::string> header = split_csv_line(line);
    std::vector<int> keep;
    for (int c = 0; c < static_cast<int>(header.size()); ++c)
        if (std::find(exclude.begin(), exclude.end(), header[c]) == exclude.end())
            keep.push_back(c);
    if (keep.empty()) throw DataError("no feature columns left in '" + path + "'");
    if (names) {
        names->clear();
        for (int c : keep) names->push_back(header[c]);
    }

    std::vector<double> data;
    int n = 0;
    int row = 1;
    while (std::getline(in, line)) {
        if (line.empty()) {
            ++row;
            continue;
        }
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        for (int c : keep) data.push_back(parse_cell(cells[c], row, header[c]));
        ++n;
        ++row;
    }
    if (n == 0) throw DataError("'" + path + "' has no data rows");
    Matrix m(n, static_cast<int>(keep.size()));
    m.data() = std::move(data);
    return m;
}

void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.precision(17);
    for (size_t i = 0; i < data.feature_names.size(); ++i) {
        if (i) out << ',';
        out << data.feature_names[i];
    }
    for (const std::string& name : data.label_names) out << ',' << name;
    out << ",split\n";
    static const char* tag[] = {"train", "val", "test"};
    for (int r = 0; r < data.size(); ++r) {
        for (int c = 0; c < data.input_dim(); ++c) {
            if (c) out << ',';
            out << data.features.at(r, c);
        }
        for (int c = 0; c < data.label_dim(); ++c) out << ',' << data.labels.at(r, c);
        out << ',' << tag[static_cast<int>(data.split[r])] << '\n';
    }
}

Standardizer Standardizer::fit(const Matrix& features, std::span<const int> rows) {
    if (rows.empty()) throw DataError("cannot fit a standardizer on zero rows");
    const int d = features.cols();
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.stddev.assign(d, 0.0);
    for (int r : rows)
        for (int c = 0; c < d; ++c) s.mean[c] += features.at(r, c);
    for (int c = 0; c < d; ++c) s.mean[c] /= static_cast<double>(rows.size());
    for (int r : rows)
        for (int c = 0; c < d; ++c) {
            const double dv = features.at(r, c) - s.mean[c];
            s.stddev[c] += dv * dv;
        }
    for (int c = 0; c < d; ++c) {
        s.stddev[c] = std::sqrt(s.stddev[c] / static_cast<double>(rows.size()));
        if (s.stddev[c] < 1e-12) s.stddev[c] = 1.0;
    }
    return s;
}

void Standardizer::apply(std::span<double> row) const {
    for (size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean[c]) / stddev[c];
}

Matrix Standardizer::transformed(const Matrix& features) const {
    Matrix out = features;
    for (int r = 0; r < out.rows(); ++r) apply(out.row_span(r));
    return out;
}

double auc(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size()) throw Error("auc: length mismatch");
    const int n = static_cast<int>(scores.size());
    long positives = 0;
    for (double y : labels) {
        if (y != 0.0 && y != 1.0) throw Error("auc: labels must be binary");
        if (y == 1.0) ++positives;
    }
    const long negatives = n - positives;
    if (positives == 0 || negatives == 0)
        throw UndefinedMetric("auc undefined: labels contain a single class");
    check_finite(scores, "auc scores");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return scores[a] < scores[b]; });

    // Average ranks across tie groups; the Wilcoxon identity then gives the
    // same dyadic rational as the pairwise definition with 0.5 tie credit.
    double positive_rank_sum = 0.0;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (int k = i; k < j; ++k)
            if (labels[order[k]] == 1.0) positive_rank_sum += avg_rank;
        i = j;
    }
    const double numerator =
        positive_rank_sum - 0.5 * static_cast<double>(positives) * (positives + 1);
    return numerator / (static_cast<double>(positives) * static_cast<double>(negatives));
}

double subset_auc(std::span<const double> scores, std::span<const double> labels,
                  std::span<const int> subset) {
    if (scores.size() != labels.size()) throw Error("subset_auc: length mismatch");
    if (subset.empty()) throw UndefinedMetric("subset_auc undefined: empty subset");
    check_finite(scores, "subset_auc scores");
    const int n = static_cast<int>(scores.size());
    double num = 0.0;
    double den = 0.0;
    for (int i : subset) {
        if (i < 0 || i >= n) throw Error("subset_auc: index out of range");
        for (int j = 0; j < n; ++j) {
            if (labels[i] > labels[j]) {
                den += 1.0;
                if (scores[i] > scores[j])
                    num += 1.0;
                else if (scores[i] == scores[j])
                    num += 0.5;
            } else if (labels[i] < labels[j]) {
                den += 1.0;
                if (scores[i] < scores[j])
                    num += 1.0;
                else if (scores[i] == scores[j])
                    num += 0.5;
            }
        }
    }
    if (den == 0.0)
        throw UndefinedMetric("subset_auc undefined: no label-discordant pair touches the subset");
    return num / den;
}

double rmse(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size() || predictions.empty())
        throw Error("rmse: need equal nonzero lengths");
    double acc = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(predictions.size()));
}

}  // namespace lcn
