#include "lcn/cli.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcn/ensemble.hpp"
#include "lcn/serialize.hpp"
#include "lcn/verify.hpp"

namespace lcn::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct DataArgs {
    std::string path;
    std::vector<std::string> labels;
    std::string split_column;
    std::vector<double> ratios{0.8, 0.1, 0.1};
    std::uint64_t split_seed = 0;
    std::string task = "auto";
};

void add_data_flags(CLI::App* cmd, DataArgs& args, bool labels_required) {
    cmd->add_option("--data", args.path, "input CSV (header row, '.' decimals)")->required();
    auto* labels = cmd->add_option("--labels", args.labels, "label column names");
    if (labels_required) labels->required();
    cmd->add_option("--split-column", args.split_column,
                    "CSV column holding train/val/test tags");
    cmd->add_option("--split-ratios", args.ratios, "train val test ratios")->expected(3);
    cmd->add_option("--split-seed", args.split_seed, "shuffle seed for ratio splits");
    cmd->add_option("--task", args.task, "classification|regression|auto")
        ->check(CLI::IsMember({"classification", "regression", "auto"}));
}

Dataset load_dataset(const DataArgs& args) {
    SplitSpec split;
    if (!args.split_column.empty()) {
        split = SplitColumn{args.split_column};
    } else {
        split = SplitRatios{args.ratios[0], args.ratios[1], args.ratios[2], args.split_seed};
    }
    std::optional<Task> task;
    if (args.task != "auto") task = task_from_string(args.task);
    return load_csv(args.path, args.labels, split, task);
}

struct TrainArgs {
    DataArgs data;
    std::string out;
    std::string metrics_out;
    int depth = 6;
    std::string variant = "lcn";
    double dropconnect = std::numeric_limits<double>::quiet_NaN();
    int epochs = -1;
    double lr = -1.0;
    int batch_size = -1;
    int lr_decay_every = -1;
    double lr_decay_factor = -1.0;
    std::string loss = "auto";
    std::string anneal = "auto";  // auto | linear | constant:<v>
    std::uint64_t seed = 0;
    std::vector<int> head_hidden;
    std::string head_activation = "relu";
    bool standardize = false;
    int ensemble_size = 1;  // train-ensemble only
    int threads = 1;
};

void add_train_flags(CLI::App* cmd, TrainArgs& args) {
    add_data_flags(cmd, args.data, true);
    cmd->add_option("--out", args.out, "model file to write")->required();
    cmd->add_option("--metrics-out", args.metrics_out,
                    "per-epoch metrics CSV (default: <out>.metrics.csv)");
    cmd->add_option("--depth", args.depth, "number of hidden neurons M")
        ->check(CLI::Range(2, 20))
        ->capture_default_str();
    cmd->add_option("--variant", args.variant, "lcn|alcn|lln")
        ->check(CLI::IsMember({"lcn", "alcn", "lln"}))
        ->capture_default_str();
    cmd->add_option("--dropconnect", args.dropconnect, "DropConnect probability in [0,1)")
        ->check(CLI::Range(0.0, 0.999));
    cmd->add_option("--epochs", args.epochs, "training epochs (default per task)");
    cmd->add_option("--lr", args.lr, "initial learning rate (default per task)");
    cmd->add_option("--batch-size", args.batch_size, "mini-batch size (default 64)");
    cmd->add_option("--lr-decay-every", args.lr_decay_every,
                    "epochs between learning-rate steps (default per task)");
    cmd->add_option("--lr-decay-factor", args.lr_decay_factor,
                    "multiplier applied at each step (default 0.1)");
    cmd->add_option("--loss", args.loss, "cross_entropy|mse|auto")
        ->check(CLI::IsMember({"cross_entropy", "mse", "auto"}));
    cmd->add_option("--anneal", args.anneal,
                    "annealing schedule: linear, constant:<v>, or auto (per variant)");
    cmd->add_option("--seed", args.seed, "seed for all stochasticity")->capture_default_str();
    cmd->add_option("--head-hidden", args.head_hidden, "hidden widths of the output head");
    cmd->add_option("--head-activation", args.head_activation, "relu|softplus")
        ->check(CLI::IsMember({"relu", "softplus"}));
    cmd->add_flag("--standardize", args.standardize,
                  "z-score features on the train split and record it in the model");
    cmd->add_option("--threads", args.threads, "evaluation fan-out threads")
        ->envname("LCN_THREADS")
        ->capture_default_str();
}

AnnealSchedule resolve_anneal(const std::string& text, Variant variant) {
    if (text == "auto") {
        if (variant == Variant::Alcn) return {AnnealKind::Constant, 0.0};
        return {AnnealKind::LinearToRelu, 1.0};
    }
    if (text == "linear") return {AnnealKind::LinearToRelu, 1.0};
    if (text.rfind("constant:", 0) == 0) {
        const double v = std::stod(text.substr(9));
        return {AnnealKind::Constant, v};
    }
    throw Error("bad --anneal value '" + text + "' (expected linear or constant:<v>)");
}

TrainConfig resolve_config(const TrainArgs& args, Task task, Variant variant) {
    TrainConfig cfg = TrainConfig::defaults_for(task);
    if (args.epochs >= 0) cfg.epochs = args.epochs;
    if (args.lr > 0.0) cfg.learning_rate = args.lr;
    if (args.batch_size > 0) cfg.batch_size = args.batch_size;
    if (args.lr_decay_every > 0) cfg.lr_decay_every = args.lr_decay_every;
    if (args.lr_decay_factor > 0.0) cfg.lr_decay_factor = args.lr_decay_factor;
    if (args.loss != "auto") cfg.loss = loss_from_string(args.loss);
    cfg.anneal = resolve_anneal(args.anneal, variant);
    cfg.dropconnect_prob = std::isnan(args.dropconnect) ? 0.0 : args.dropconnect;
    cfg.seed = args.seed;
    cfg.validate();
    return cfg;
}

std::string anneal_string(const AnnealSchedule& a) {
    if (a.kind == AnnealKind::LinearToRelu) return "linear";
    std::ostringstream os;
    os << "constant:" << a.value;
    return os.str();
}

void echo_config(const TrainArgs& args, Task task, const TrainConfig& cfg,
                 const ModelSpec& spec) {
    std::cout << "config:"
              << " task=" << to_string(task) << " variant=" << to_string(spec.variant)
              << " depth=" << spec.depth << " loss=" << to_string(cfg.loss)
              << " epochs=" << cfg.epochs << " batch_size=" << cfg.batch_size
              << " lr=" << cfg.learning_rate << " lr_decay_every=" << cfg.lr_decay_every
              << " lr_decay_factor=" << cfg.lr_decay_factor
              << " anneal=" << anneal_string(cfg.anneal)
              << " dropconnect=" << cfg.dropconnect_prob << " seed=" << cfg.seed
              << " head_hidden=[";
    for (size_t i = 0; i < spec.head_hidden.size(); ++i) {
        if (i) std::cout << ',';
        std::cout << spec.head_hidden[i];
    }
    std::cout << "] standardize=" << (args.standardize ? "on" : "off") << "\n";
}

std::string labeled_path(const std::string& out, const std::string& label) {
    const fs::path p(out);
    fs::path dir = p.parent_path();
    std::string stem = p.stem().string();
    std::string ext = p.extension().string();
    if (ext.empty()) ext = ".json";
    return (dir / (stem + "." + label + ext)).string();
}

int cmd_train(const TrainArgs& args) {
    Dataset data = load_dataset(args.data);
    const Task task = data.task;
    const Variant variant = variant_from_string(args.variant);

    ModelSpec spec;
    spec.depth = args.depth;
    spec.variant = variant;
    spec.head = variant == Variant::Lln ? HeadKind::Linear : HeadKind::FullyConnected;
    spec.head_hidden = args.head_hidden;
    spec.head_activation =
        args.head_activation == "relu" ? Activation::Relu : Activation::Softplus;

    const TrainConfig base_cfg = resolve_config(args, task, variant);
    echo_config(args, task, base_cfg, spec);

    std::optional<Standardizer> standardizer;
    if (args.standardize) {
        const std::vector<int> train_rows = data.rows_in(Split::Train);
        standardizer = Standardizer::fit(data.features, train_rows);
        data.features = standardizer->transformed(data.features);
    }

    const int n_labels = data.label_dim();
    std::vector<std::string> files;
    for (int label = 0; label < n_labels; ++label) {
        const Dataset view = n_labels == 1 ? std::move(data) : data.select_label(label);
        TrainConfig cfg = base_cfg;
        cfg.seed = base_cfg.seed + static_cast<std::uint64_t>(label);
        Rng init_rng(cfg.seed);
        LcnParameters params = initialize_model(spec, view.input_dim(), 1, init_rng);
        const TrainResult result = train(std::move(params), view, cfg);

        Model model;
        model.params = result.params;
        model.standardizer = standardizer;
        model.task = task;
        const std::string path =
            n_labels == 1 ? args.out : labeled_path(args.out, view.label_names[0]);
        save_model(model, path);
        files.push_back(path);

        const std::string metrics =
            args.metrics_out.empty()
                ? path + ".metrics.csv"
                : (n_labels == 1 ? args.metrics_out
                                 : labeled_path(args.metrics_out, view.label_names[0]));
        write_metrics_csv(result.log, metrics);
        if (!result.log.empty())
            std::cout << "label " << view.label_names[0] << ": final train loss "
                      << result.log.back().train_loss << ", val metric "
                      << result.log.back().val_metric << "\n";
        std::cout << "wrote " << path << " and " << metrics << "\n";
        if (n_labels == 1) break;
    }

    if (n_labels > 1) {
        MultiLabelManifest manifest;
        for (int label = 0; label < n_labels; ++label) {
            manifest.labels.push_back(args.data.labels[label]);
            manifest.model_files.push_back(fs::path(files[label]).filename().string());
        }
        save_multilabel(manifest, args.out);
        std::cout << "wrote manifest " << args.out << "\n";
    }
    return kExitOk;
}

int cmd_train_ensemble(const TrainArgs& args) {
    Dataset data = load_dataset(args.data);
    if (data.label_dim() != 1)
        throw DataError("train-ensemble handles one label at a time; pass a single --labels "
                        "column per run");
    const Task task = data.task;
    const Variant variant = variant_from_string(args.variant);
    if (variant == Variant::Lln) throw Error("ensembles take lcn or alcn base models");

    ElcnConfig cfg = ElcnConfig::defaults_for(task);
    cfg.ensemble_size = args.ensemble_size;
    cfg.spec.depth = args.depth;
    cfg.spec.variant = variant;
    cfg.spec.head_hidden = args.head_hidden;
    cfg.spec.head_activation =
        args.head_activation == "relu" ? Activation::Relu : Activation::Softplus;
    if (args.epochs >= 0) cfg.stage.epochs = args.epochs;
    if (args.lr > 0.0) cfg.stage.learning_rate = args.lr;
    if (args.batch_size > 0) cfg.stage.batch_size = args.batch_size;
    if (args.lr_decay_every > 0) cfg.stage.lr_decay_every = args.lr_decay_every;
    if (args.lr_decay_factor > 0.0) cfg.stage.lr_decay_factor = args.lr_decay_factor;
    if (args.loss != "auto") cfg.stage.loss = loss_from_string(args.loss);
    if (!std::isnan(args.dropconnect)) cfg.stage.dropconnect_prob = args.dropconnect;
    cfg.stage.anneal = resolve_anneal(args.anneal, variant);
    cfg.stage.seed = args.seed;
    cfg.stage.validate();

    std::cout << "config: task=" << to_string(task) << " base=" << to_string(variant)
              << " depth=" << cfg.spec.depth << " E=" << cfg.ensemble_size
              << " epochs/stage=" << cfg.stage.epochs << " batch_size=" << cfg.stage.batch_size
              << " lr=" << cfg.stage.learning_rate
              << " dropconnect=" << cfg.stage.dropconnect_prob
              << " optimizer=amsgrad seed=" << cfg.stage.seed << "\n";

    std::optional<Standardizer> standardizer;
    if (args.standardize) {
        standardizer = Standardizer::fit(data.features, data.rows_in(Split::Train));
        data.features = standardizer->transformed(data.features);
    }

    const fs::path out(args.out);
    const std::string stem = out.stem().string();
    ElcnManifest manifest;
    manifest.base_variant = variant;
    manifest.input_dim = data.input_dim();
    manifest.output_dim = 1;
    manifest.task = task;
    manifest.optimizer = cfg.stage.amsgrad;
    manifest.standardizer = standardizer;

    const ElcnTrainStats stats = elcn_train(data, cfg, [&](int stage, LcnParameters&& comp) {
        Model component;
        component.params = std::move(comp);
        component.task = task;
        const std::string rel = stem + ".component" + std::to_string(stage) + ".json";
        save_model(component, (out.parent_path() / rel).string());
        manifest.component_files.push_back(rel);
    });
    save_elcn(manifest, args.out);

    for (const StageLog& s : stats.stages)
        std::cout << "stage " << s.stage << ": initial " << s.initial_train_loss << ", final "
                  << s.final_train_loss << "\n";
    std::cout << "wrote " << args.out << "\n";
    return kExitOk;
}

// Scores every row of `features` under a model file of any format.
Matrix score_rows(const std::string& model_path, const Matrix& features, int threads,
                  std::optional<Task>* task_out) {
    std::vector<int> rows(features.rows());
    for (int i = 0; i < features.rows(); ++i) rows[i] = i;

    const FileFormat format = sniff_format(model_path);
    if (format == FileFormat::Model) {
        const Model model = load_model(model_path);
        if (task_out) *task_out = model.task;
        const Matrix in = model.standardizer ? model.standardizer->transformed(features)
                                             : features;
        return predict_rows(model.params, in, rows, model.params.eval_lambda(), threads);
    }
    if (format == FileFormat::Elcn) {
        ElcnManifest manifest;
        const ElcnModel ensemble = load_elcn_model(model_path, &manifest);
        if (task_out) *task_out = manifest.task;
        const Matrix in = manifest.standardizer ? manifest.standardizer->transformed(features)
                                                : features;
        Matrix out(features.rows(), ensemble.output_dim);
        for (const LcnParameters& comp : ensemble.components) {
            const Matrix part = predict_rows(comp, in, rows, comp.eval_lambda(), threads);
            for (size_t i = 0; i < out.data().size(); ++i) out.data()[i] += part.data()[i];
        }
        return out;
    }
    if (format == FileFormat::MultiLabel) {
        const MultiLabelManifest manifest = load_multilabel(model_path);
        Matrix out(features.rows(), static_cast<int>(manifest.model_files.size()));
        for (size_t l = 0; l < manifest.model_files.size(); ++l) {
            const Matrix part = score_rows(sibling_path(model_path, manifest.model_files[l]),
                                           features, threads, task_out);
            for (int r = 0; r < out.rows(); ++r) out.at(r, static_cast<int>(l)) = part.at(r, 0);
        }
        return out;
    }
    throw DataError("'" + model_path + "' is a tree file; predict via the network model");
}

std::vector<std::string> score_names(const std::string& model_path) {
    if (sniff_format(model_path) == FileFormat::MultiLabel)
        return load_multilabel(model_path).labels;
    return {"score"};
}

struct PredictArgs {
    std::string model;
    DataArgs data;
    std::string out;
    int threads = 1;
};

int cmd_predict(const PredictArgs& args) {
    // Label and split columns, when named, are stripped from the features.
    std::vector<std::string> exclude = args.data.labels;
    if (!args.data.split_column.empty()) exclude.push_back(args.data.split_column);
    const Matrix features = load_feature_csv(args.data.path, exclude);

    std::optional<Task> task;
    const Matrix scores = score_rows(args.model, features, args.threads, &task);
    const bool logistic = task && *task == Task::Classification;

    std::ofstream out(args.out);
    if (!out) throw DataError("cannot write '" + args.out + "'");
    out.precision(17);
    const std::vector<std::string> names = score_names(args.model);
    for (int c = 0; c < scores.cols(); ++c) {
        if (c) out << ',';
        out << (c < static_cast<int>(names.size()) ? names[c] : "score" + std::to_string(c));
    }
    out << '\n';
    for (int r = 0; r < scores.rows(); ++r) {
        for (int c = 0; c < scores.cols(); ++c) {
            if (c) out << ',';
            out << (logistic ? sigmoid(scores.at(r, c)) : scores.at(r, c));
        }
        out << '\n';
    }
    std::cout << "wrote " << args.out << " (" << scores.rows() << " rows)\n";
    return kExitOk;
}

struct EvalArgs {
    std::string model;
    DataArgs data;
    std::string split = "test";
    std::string report;
    int threads = 1;
};

int cmd_eval(const EvalArgs& args) {
    const Dataset data = load_dataset(args.data);
    std::vector<int> rows;
    if (args.split == "all") {
        rows.resize(data.size());
        for (int i = 0; i < data.size(); ++i) rows[i] = i;
    } else {
        const Split s = args.split == "train"  ? Split::Train
                        : args.split == "val"  ? Split::Val
                                               : Split::Test;
        rows = data.rows_in(s);
    }
    if (rows.empty()) throw DataError("no rows in split '" + args.split + "'");

    std::optional<Task> model_task;
    const Matrix all_scores = score_rows(args.model, data.features, args.threads, &model_task);
    if (all_scores.cols() != data.label_dim())
        throw DataError("model emits " + std::to_string(all_scores.cols()) +
                        " scores but the data has " + std::to_string(data.label_dim()) +
                        " labels");

    json per_label = json::array();
    double sum = 0.0;
    int counted = 0;
    for (int l = 0; l < data.label_dim(); ++l) {
        std::vector<double> scores(rows.size()), labels(rows.size());
        for (size_t i = 0; i < rows.size(); ++i) {
            scores[i] = all_scores.at(rows[i], l);
            labels[i] = data.labels.at(rows[i], l);
        }
        const std::string name =
            l < static_cast<int>(data.label_names.size()) ? data.label_names[l] : "label";
        try {
            const double metric =
                data.task == Task::Classification ? auc(scores, labels) : rmse(scores, labels);
            std::cout << name << (data.task == Task::Classification ? " auc " : " rmse ")
                      << metric << "\n";
            per_label.push_back(json{{"label", name}, {"metric", metric}});
            sum += metric;
            ++counted;
        } catch (const UndefinedMetric& e) {
            std::cout << name << " undefined: " << e.what() << "\n";
            per_label.push_back(json{{"label", name}, {"metric", nullptr}});
        }
    }
    if (counted > 0)
        std::cout << "mean " << (data.task == Task::Classification ? "auc " : "rmse ")
                  << sum / counted << "\n";
    if (!args.report.empty()) {
        json j;
        j["split"] = args.split;
        j["metric"] = data.task == Task::Classification ? "auc" : "rmse";
        j["per_label"] = std::move(per_label);
        if (counted > 0) j["mean"] = sum / counted;
        write_file(args.report, j.dump(2) + "\n");
    }
    return kExitOk;
}

int cmd_convert(const std::string& model_path, const std::string& out, int depth_cap) {
    const Model model = load_model(model_path);
    TreeFile file;
    file.tree = lcn_to_tree(model.params, depth_cap);
    file.standardizer = model.standardizer;
    save_tree(file, out);
    std::cout << "wrote " << out << " (" << file.tree.node_count() << " nodes, "
              << file.tree.leaf_count() << " leaves)\n";
    return kExitOk;
}

int cmd_tree_to_lcn(const std::string& tree_path, const std::string& out, int depth_cap) {
    const TreeFile file = load_tree(tree_path);
    Model model;
    model.params = tree_to_canonical_lcn(file.tree, depth_cap);
    model.standardizer = file.standardizer;
    save_model(model, out);
    std::cout << "wrote " << out << " (depth " << model.params.depth << ")\n";
    return kExitOk;
}

struct ExportArgs {
    std::string tree;
    std::string model;
    std::string out;
    int top_k = 3;
    bool ranks = false;
    int depth_cap = 20;
};

int cmd_export_dot(const ExportArgs& args) {
    ObliqueTree tree;
    std::optional<Task> task;
    if (!args.tree.empty()) {
        tree = load_tree(args.tree).tree;
    } else if (!args.model.empty()) {
        const Model model = load_model(args.model);
        task = model.task;
        tree = lcn_to_tree(model.params, args.depth_cap);
    } else {
        throw Error("export-dot needs --tree or --model");
    }
    DotOptions options;
    options.top_k = args.top_k;
    options.classification_ranks =
        args.ranks || (task && *task == Task::Classification);
    write_file(args.out, export_dot(tree, options));
    std::cout << "wrote " << args.out << "\n";
    return kExitOk;
}

struct VerifyArgs {
    std::uint64_t seed = 0;
    std::string model;
    std::string tree;  // optional: a converted tree file to check against
    DataArgs data;
    std::string report;
    int threads = 1;
};

// Equivalence of a provided model and its converted tree on held-out rows.
OracleReport model_equivalence_report(const VerifyArgs& args) {
    OracleReport report;
    report.suite = "model-tree-equivalence";
    const Model model = load_model(args.model);
    const ObliqueTree tree =
        args.tree.empty() ? lcn_to_tree(model.params) : load_tree(args.tree).tree;

    Matrix features;
    std::vector<int> rows;
    if (!args.data.path.empty()) {
        const Dataset data = load_dataset(args.data);
        features = model.standardizer ? model.standardizer->transformed(data.features)
                                      : data.features;
        rows = data.rows_in(Split::Test);
        if (rows.empty()) rows = data.rows_in(Split::Train);
    } else {
        Rng rng(args.seed);
        features = Matrix(2000, model.params.input_dim);
        for (double& v : features.data()) v = rng.uniform(-2.0, 2.0);
        rows.resize(features.rows());
        for (int i = 0; i < features.rows(); ++i) rows[i] = i;
    }

    for (int r : rows) {
        const auto x = features.row_span(r);
        const std::vector<double> net = predict(model.params, x, 1.0);
        const std::vector<double> via_tree = tree_predict(tree, x);
        double dev = 0.0;
        for (size_t j = 0; j < net.size(); ++j)
            dev = std::max(dev, std::abs(net[j] - via_tree[j]));
        ++report.cases_run;
        report.record(dev);
        if (dev > 1e-8)
            report.fail(args.seed,
                        "row " + std::to_string(r) + ": network/tree gap " + std::to_string(dev));
    }
    return report;
}

int cmd_verify(const VerifyArgs& args) {
    std::vector<OracleReport> reports = run_verification_suites(args.seed);
    if (!args.model.empty()) reports.push_back(model_equivalence_report(args));

    bool all_ok = true;
    for (const OracleReport& r : reports) {
        const bool ok = r.passed();
        all_ok = all_ok && ok;
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << r.suite << " (" << r.cases_run
                  << " cases, max deviation " << r.max_deviation << ")\n";
        for (const OracleFailure& f : r.failures)
            std::cout << "       seed " << f.seed << ": " << f.message << "\n";
    }
    if (!args.report.empty()) write_file(args.report, report_to_json_string(reports));
    return all_ok ? kExitOk : kExitVerification;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"locally constant networks: train, convert to oblique trees, verify"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "key=value config file with [train] / [train-ensemble] sections; flags "
                   "take precedence");

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "train one model per label column");
    add_train_flags(train_cmd, train_args);

    TrainArgs ensemble_args;
    ensemble_args.depth = 12;
    ensemble_args.variant = "alcn";
    CLI::App* ensemble_cmd =
        app.add_subcommand("train-ensemble", "train an additive ensemble stage by stage");
    add_train_flags(ensemble_cmd, ensemble_args);
    ensemble_cmd->add_option("--ensemble-size", ensemble_args.ensemble_size, "components E")
        ->check(CLI::Range(1, 512))
        ->capture_default_str();

    PredictArgs predict_args;
    CLI::App* predict_cmd = app.add_subcommand("predict", "write per-row scores to CSV");
    predict_cmd->add_option("--model", predict_args.model, "model/manifest file")->required();
    predict_cmd->add_option("--data", predict_args.data.path, "feature CSV")->required();
    predict_cmd->add_option("--labels", predict_args.data.labels,
                            "label columns to drop from the features");
    predict_cmd->add_option("--split-column", predict_args.data.split_column,
                            "split column to drop from the features");
    predict_cmd->add_option("--out", predict_args.out, "output CSV")->required();
    predict_cmd->add_option("--threads", predict_args.threads, "prediction threads")
        ->envname("LCN_THREADS");

    EvalArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand("eval", "report AUC or RMSE per label");
    eval_cmd->add_option("--model", eval_args.model, "model/manifest file")->required();
    add_data_flags(eval_cmd, eval_args.data, true);
    eval_cmd->add_option("--split", eval_args.split, "train|val|test|all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}))
        ->capture_default_str();
    eval_cmd->add_option("--report", eval_args.report, "JSON report file");
    eval_cmd->add_option("--threads", eval_args.threads, "prediction threads")
        ->envname("LCN_THREADS");

    std::string convert_model, convert_out;
    int convert_cap = 20;
    CLI::App* convert_cmd =
        app.add_subcommand("convert", "expand a trained network into its oblique tree");
    convert_cmd->add_option("--model", convert_model, "model file (lcn variant)")->required();
    convert_cmd->add_option("--out", convert_out, "tree JSON to write")->required();
    convert_cmd->add_option("--depth-cap", convert_cap, "refuse larger depths")
        ->capture_default_str();

    std::string t2l_tree, t2l_out;
    int t2l_cap = 10;
    CLI::App* t2l_cmd =
        app.add_subcommand("tree-to-lcn", "encode an oblique tree as a canonical network");
    t2l_cmd->add_option("--tree", t2l_tree, "tree JSON")->required();
    t2l_cmd->add_option("--out", t2l_out, "model file to write")->required();
    t2l_cmd->add_option("--depth-cap", t2l_cap, "refuse larger tree depths")
        ->capture_default_str();

    ExportArgs export_args;
    CLI::App* export_cmd = app.add_subcommand("export-dot", "emit Graphviz for a tree");
    export_cmd->add_option("--tree", export_args.tree, "tree JSON");
    export_cmd->add_option("--model", export_args.model, "model file (converted on the fly)");
    export_cmd->add_option("--out", export_args.out, "DOT file to write")->required();
    export_cmd->add_option("--top-k", export_args.top_k, "weight coordinates per node")
        ->check(CLI::Range(1, 1000))
        ->capture_default_str();
    export_cmd->add_flag("--leaf-ranks", export_args.ranks,
                         "label leaves by score rank (default for classification models)");

    VerifyArgs verify_args;
    CLI::App* verify_cmd =
        app.add_subcommand("verify", "run the property suites; nonzero exit on failure");
    verify_cmd->add_option("--seed", verify_args.seed, "suite seed")->capture_default_str();
    verify_cmd->add_option("--model", verify_args.model,
                           "additionally check this model against its tree");
    verify_cmd->add_option("--tree", verify_args.tree,
                           "use this converted tree file instead of converting in-process");
    verify_cmd->add_option("--data", verify_args.data.path, "CSV for the model check");
    verify_cmd->add_option("--labels", verify_args.data.labels, "label columns");
    verify_cmd->add_option("--split-column", verify_args.data.split_column, "split column");
    verify_cmd->add_option("--report", verify_args.report, "JSON report file");

    std::vector<const char*> argv;
    argv.push_back("lcn");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_args);
        if (ensemble_cmd->parsed()) return cmd_train_ensemble(ensemble_args);
        if (predict_cmd->parsed()) return cmd_predict(predict_args);
        if (eval_cmd->parsed()) return cmd_eval(eval_args);
        if (convert_cmd->parsed()) return cmd_convert(convert_model, convert_out, convert_cap);
        if (t2l_cmd->parsed()) return cmd_tree_to_lcn(t2l_tree, t2l_out, t2l_cap);
        if (export_cmd->parsed()) return cmd_export_dot(export_args);
        if (verify_cmd->parsed()) return cmd_verify(verify_args);
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const UndefinedMetric& e) {
        std::cerr << "undefined metric: " << e.what() << "\n";
        return kExitData;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace lcn::cli
