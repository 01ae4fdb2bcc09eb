#include "lcn/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lcn {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m.at(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw DataError(std::string(what) + ": expected a 2d array");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(j[r].size()) != cols)
            throw DataError(std::string(what) + ": ragged rows");
        for (int c = 0; c < cols; ++c) m.at(r, c) = j[r][c].get<double>();
    }
    return m;
}

json affine_to_json(const Matrix& weight, const std::vector<double>& bias) {
    return json{{"weight", matrix_to_json(weight)}, {"bias", bias}};
}

json standardizer_to_json(const Standardizer& s) {
    return json{{"mean", s.mean}, {"stddev", s.stddev}};
}

Standardizer standardizer_from_json(const json& j) {
    Standardizer s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    if (s.mean.size() != s.stddev.size()) throw DataError("standardizer: mean/stddev mismatch");
    return s;
}

const char* activation_name(Activation a) { return a == Activation::Relu ? "relu" : "softplus"; }

Activation activation_from_name(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "softplus") return Activation::Softplus;
    throw DataError("unknown activation '" + s + "'");
}

json head_to_json(const OutputHead& head) {
    json j;
    if (const auto* table = std::get_if<TableHead>(&head)) {
        j["kind"] = "table";
        json entries = json::array();
        for (const TableHead::Entry& e : table->entries())
            entries.push_back(json{{"pattern", e.pattern}, {"value", e.value}});
        j["entries"] = std::move(entries);
    } else if (const auto* fc = std::get_if<FullyConnectedHead>(&head)) {
        j["kind"] = "fully_connected";
        j["activation"] = activation_name(fc->hidden_activation);
        json layers = json::array();
        for (const AffineLayer& l : fc->layers) layers.push_back(affine_to_json(l.weight, l.bias));
        j["layers"] = std::move(layers);
    } else {
        const auto& lin = std::get<LinearHead>(head);
        j["kind"] = "linear";
        j["weight"] = matrix_to_json(lin.weight);
        j["bias"] = lin.bias;
    }
    return j;
}

OutputHead head_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "table") {
        TableHead table;
        for (const json& e : j.at("entries"))
            table.set(e.at("pattern").get<std::string>(),
                      e.at("value").get<std::vector<double>>());
        return table;
    }
    if (kind == "fully_connected") {
        FullyConnectedHead fc;
        fc.hidden_activation = activation_from_name(j.at("activation").get<std::string>());
        for (const json& l : j.at("layers")) {
            AffineLayer layer;
            layer.weight = matrix_from_json(l.at("weight"), "head layer weight");
            layer.bias = l.at("bias").get<std::vector<double>>();
            fc.layers.push_back(std::move(layer));
        }
        return fc;
    }
    if (kind == "linear") {
        LinearHead lin;
        lin.weight = matrix_from_json(j.at("weight"), "linear head weight");
        lin.bias = j.at("bias").get<std::vector<double>>();
        return lin;
    }
    throw DataError("unknown head kind '" + kind + "'");
}

void require_format(const json& j, const char* expected) {
    const std::string got = j.value("format", "");
    if (got != expected)
        throw DataError("expected format '" + std::string(expected) + "', found '" + got + "'");
}

json parse(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw DataError("invalid JSON");
    return j;
}

json task_to_json(const std::optional<Task>& t) {
    if (!t) return nullptr;
    return std::string(to_string(*t));
}

std::optional<Task> task_from_json(const json& j) {
    if (!j.contains("task") || j["task"].is_null()) return std::nullopt;
    return task_from_string(j["task"].get<std::string>());
}

}  // namespace

std::string to_json_string(const Model& model) {
    model.params.validate();
    json j;
    j["format"] = kModelFormat;
    j["feature_layout"] = kFeatureLayout;
    j["routing"] = kRoutingConvention;
    j["variant"] = to_string(model.params.variant);
    j["depth"] = model.params.depth;
    j["input_dim"] = model.params.input_dim;
    j["output_dim"] = model.params.output_dim;
    j["layer_weights"] = model.params.layer_weights;
    j["layer_biases"] = model.params.layer_biases;
    j["head"] = head_to_json(model.params.head);
    if (model.standardizer) j["standardizer"] = standardizer_to_json(*model.standardizer);
    if (model.task) j["task"] = task_to_json(model.task);
    return j.dump(2) + "\n";
}

Model model_from_json_string(const std::string& text) {
    const json j = parse(text);
    require_format(j, kModelFormat);
    if (j.value("feature_layout", "") != kFeatureLayout)
        throw DataError("unsupported feature layout '" + j.value("feature_layout", "") + "'");
    Model model;
    model.params.variant = variant_from_string(j.at("variant").get<std::string>());
    model.params.depth = j.at("depth").get<int>();
    model.params.input_dim = j.at("input_dim").get<int>();
    model.params.output_dim = j.at("output_dim").get<int>();
    model.params.layer_weights = j.at("layer_weights").get<std::vector<std::vector<double>>>();
    model.params.layer_biases = j.at("layer_biases").get<std::vector<double>>();
    model.params.head = head_from_json(j.at("head"));
    if (j.contains("standardizer")) model.standardizer = standardizer_from_json(j["standardizer"]);
    model.task = task_from_json(j);
    model.params.validate();
    return model;
}

std::string to_json_string(const TreeFile& file) {
    file.tree.validate();
    json j;
    j["format"] = kTreeFormat;
    j["routing"] = kRoutingConvention;
    j["node_order"] = "breadth-first, prefix bits as binary";
    j["depth"] = file.tree.depth;
    j["input_dim"] = file.tree.input_dim;
    j["output_dim"] = file.tree.output_dim;
    json nodes = json::array();
    for (const ObliqueTreeNode& n : file.tree.nodes)
        nodes.push_back(json{{"weight", n.weight}, {"bias", n.bias}});
    j["nodes"] = std::move(nodes);
    if (file.tree.lazy) {
        json lazy;
        lazy["kind"] = "head";
        lazy["activation"] = activation_name(file.tree.lazy->head.hidden_activation);
        json layers = json::array();
        for (const AffineLayer& l : file.tree.lazy->head.layers)
            layers.push_back(affine_to_json(l.weight, l.bias));
        lazy["layers"] = std::move(layers);
        lazy["features"] = matrix_to_json(file.tree.lazy->features);
        j["leaves"] = std::move(lazy);
    } else {
        j["leaves"] = json{{"kind", "values"}, {"values", matrix_to_json(file.tree.leaf_values)}};
    }
    if (file.standardizer) j["standardizer"] = standardizer_to_json(*file.standardizer);
    return j.dump(2) + "\n";
}

TreeFile tree_from_json_string(const std::string& text) {
    const json j = parse(text);
    require_format(j, kTreeFormat);
    if (j.value("routing", "") != kRoutingConvention)
        throw DataError("unsupported routing convention '" + j.value("routing", "") + "'");
    TreeFile file;
    file.tree.depth = j.at("depth").get<int>();
    file.tree.input_dim = j.at("input_dim").get<int>();
    file.tree.output_dim = j.at("output_dim").get<int>();
    for (const json& n : j.at("nodes")) {
        ObliqueTreeNode node;
        node.weight = n.at("weight").get<std::vector<double>>();
        node.bias = n.at("bias").get<double>();
        file.tree.nodes.push_back(std::move(node));
    }
    const json& leaves = j.at("leaves");
    if (leaves.at("kind") == "values") {
        file.tree.leaf_values = matrix_from_json(leaves.at("values"), "leaf values");
    } else {
        LazyLeaves lazy;
        lazy.head.hidden_activation =
            activation_from_name(leaves.at("activation").get<std::string>());
        for (const json& l : leaves.at("layers")) {
            AffineLayer layer;
            layer.weight = matrix_from_json(l.at("weight"), "leaf head weight");
            layer.bias = l.at("bias").get<std::vector<double>>();
            lazy.head.layers.push_back(std::move(layer));
        }
        lazy.features = matrix_from_json(leaves.at("features"), "leaf features");
        file.tree.lazy = std::move(lazy);
    }
    if (j.contains("standardizer")) file.standardizer = standardizer_from_json(j["standardizer"]);
    file.tree.validate();
    return file;
}

std::string to_json_string(const ElcnManifest& manifest) {
    json j;
    j["format"] = kElcnFormat;
    j["base_variant"] = to_string(manifest.base_variant);
    j["input_dim"] = manifest.input_dim;
    j["output_dim"] = manifest.output_dim;
    j["link"] = "sum-pre-link";
    j["optimizer"] = json{{"name", "amsgrad"},
                          {"beta1", manifest.optimizer.beta1},
                          {"beta2", manifest.optimizer.beta2},
                          {"epsilon", manifest.optimizer.epsilon}};
    j["components"] = manifest.component_files;
    if (manifest.task) j["task"] = task_to_json(manifest.task);
    if (manifest.standardizer) j["standardizer"] = standardizer_to_json(*manifest.standardizer);
    return j.dump(2) + "\n";
}

ElcnManifest elcn_from_json_string(const std::string& text) {
    const json j = parse(text);
    require_format(j, kElcnFormat);
    ElcnManifest m;
    m.base_variant = variant_from_string(j.at("base_variant").get<std::string>());
    m.input_dim = j.at("input_dim").get<int>();
    m.output_dim = j.at("output_dim").get<int>();
    m.component_files = j.at("components").get<std::vector<std::string>>();
    if (j.contains("optimizer")) {
        m.optimizer.beta1 = j["optimizer"].value("beta1", m.optimizer.beta1);
        m.optimizer.beta2 = j["optimizer"].value("beta2", m.optimizer.beta2);
        m.optimizer.epsilon = j["optimizer"].value("epsilon", m.optimizer.epsilon);
    }
    m.task = task_from_json(j);
    if (j.contains("standardizer")) m.standardizer = standardizer_from_json(j["standardizer"]);
    return m;
}

std::string to_json_string(const MultiLabelManifest& manifest) {
    json j;
    j["format"] = kMultiLabelFormat;
    j["labels"] = manifest.labels;
    j["models"] = manifest.model_files;
    return j.dump(2) + "\n";
}

MultiLabelManifest multilabel_from_json_string(const std::string& text) {
    const json j = parse(text);
    require_format(j, kMultiLabelFormat);
    MultiLabelManifest m;
    m.labels = j.at("labels").get<std::vector<std::string>>();
    m.model_files = j.at("models").get<std::vector<std::string>>();
    if (m.labels.size() != m.model_files.size())
        throw DataError("multi-label manifest: labels/models length mismatch");
    return m;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << contents;
}

std::string sibling_path(const std::string& anchor_file, const std::string& relative) {
    const std::filesystem::path rel(relative);
    if (rel.is_absolute()) return relative;
    return (std::filesystem::path(anchor_file).parent_path() / rel).string();
}

void save_model(const Model& model, const std::string& path) {
    write_file(path, to_json_string(model));
}
Model load_model(const std::string& path) { return model_from_json_string(read_file(path)); }

void save_tree(const TreeFile& tree, const std::string& path) {
    write_file(path, to_json_string(tree));
}
TreeFile load_tree(const std::string& path) { return tree_from_json_string(read_file(path)); }

void save_elcn(const ElcnManifest& manifest, const std::string& path) {
    write_file(path, to_json_string(manifest));
}
ElcnManifest load_elcn(const std::string& path) { return elcn_from_json_string(read_file(path)); }

void save_multilabel(const MultiLabelManifest& manifest, const std::string& path) {
    write_file(path, to_json_string(manifest));
}
MultiLabelManifest load_multilabel(const std::string& path) {
    return multilabel_from_json_string(read_file(path));
}

ElcnModel load_elcn_model(const std::string& manifest_path, ElcnManifest* out_manifest) {
    const ElcnManifest manifest = load_elcn(manifest_path);
    ElcnModel model;
    model.base_variant = manifest.base_variant;
    model.input_dim = manifest.input_dim;
    model.output_dim = manifest.output_dim;
    for (const std::string& rel : manifest.component_files)
        model.components.push_back(load_model(sibling_path(manifest_path, rel)).params);
    model.validate();
    if (out_manifest) *out_manifest = manifest;
    return model;
}

FileFormat sniff_format(const std::string& path) {
    const json j = parse(read_file(path));
    const std::string format = j.value("format", "");
    if (format == kModelFormat) return FileFormat::Model;
    if (format == kTreeFormat) return FileFormat::Tree;
    if (format == kElcnFormat) return FileFormat::Elcn;
    if (format == kMultiLabelFormat) return FileFormat::MultiLabel;
    throw DataError("'" + path + "': unrecognized format '" + format + "'");
}

}  // namespace lcn
