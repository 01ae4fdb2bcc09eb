// JSON serialization for models, trees, and the ensemble / multi-label
// manifests. Numbers are written with shortest-round-trip formatting, so a
// save/load cycle is value-exact for finite doubles, and key order is fixed,
// so identical objects produce identical bytes.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lcn/data.hpp"
#include "lcn/ensemble.hpp"
#include "lcn/network.hpp"
#include "lcn/tree.hpp"

namespace lcn {

inline constexpr const char* kModelFormat = "lcn-model/v1";
inline constexpr const char* kTreeFormat = "oblique-tree/v1";
inline constexpr const char* kElcnFormat = "elcn-manifest/v1";
inline constexpr const char* kMultiLabelFormat = "lcn-multilabel/v1";
// Versioned feature layout: Jacobian rows in layer order, then bias terms.
inline constexpr const char* kFeatureLayout = "jacobian-rows-then-biases/v1";
// Both the network pattern and the tree routing treat the boundary as >= 0.
inline constexpr const char* kRoutingConvention = "ge-at-zero";

struct Model {
    LcnParameters params;
    std::optional<Standardizer> standardizer;
    std::optional<Task> task;
};

struct TreeFile {
    ObliqueTree tree;
    std::optional<Standardizer> standardizer;
};

struct ElcnManifest {
    Variant base_variant = Variant::Alcn;
    int input_dim = 0;
    int output_dim = 0;
    std::optional<Task> task;
    AmsGradSettings optimizer;  // recorded AMSGrad constants
    std::vector<std::string> component_files;  // relative to the manifest
    std::optional<Standardizer> standardizer;
};

struct MultiLabelManifest {
    std::vector<std::string> labels;
    std::vector<std::string> model_files;  // relative to the manifest
};

std::string to_json_string(const Model& model);
std::string to_json_string(const TreeFile& tree);
std::string to_json_string(const ElcnManifest& manifest);
std::string to_json_string(const MultiLabelManifest& manifest);

Model model_from_json_string(const std::string& text);
TreeFile tree_from_json_string(const std::string& text);
ElcnManifest elcn_from_json_string(const std::string& text);
MultiLabelManifest multilabel_from_json_string(const std::string& text);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);
void save_tree(const TreeFile& tree, const std::string& path);
TreeFile load_tree(const std::string& path);
void save_elcn(const ElcnManifest& manifest, const std::string& path);
ElcnManifest load_elcn(const std::string& path);
void save_multilabel(const MultiLabelManifest& manifest, const std::string& path);
MultiLabelManifest load_multilabel(const std::string& path);

// Loads a full ensemble by resolving the manifest's component files
// relative to its directory.
ElcnModel load_elcn_model(const std::string& manifest_path, ElcnManifest* manifest = nullptr);

enum class FileFormat { Model, Tree, Elcn, MultiLabel };
// Reads the "format" tag of a JSON file.
FileFormat sniff_format(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);
// Joins a path relative to the directory containing `anchor_file`.
std::string sibling_path(const std::string& anchor_file, const std::string& relative);

}  // namespace lcn
