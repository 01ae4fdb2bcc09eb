// Locally constant network backbone: one neuron per layer, densely connected
// to the input and to every preceding activation. Provides the forward pass,
// the annealed activation, activation patterns, and the Jacobian-feature
// dynamic program that feeds the output head.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "lcn/common.hpp"

namespace lcn {

enum class Variant { Lcn, Alcn, Lln };

enum class Activation { Relu, Softplus };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

// Per-neuron indicator bits I[z >= 0], one per layer.
struct ActivationPattern {
    std::vector<std::uint8_t> bits;

    // Compact form "0110..."; keys table lookups and serialization.
    std::string to_string() const;
    static ActivationPattern from_string(const std::string& s);

    bool operator==(const ActivationPattern&) const = default;
};

// Pattern-to-value table. Entries may constrain only a subset of bits
// ('x' marks a free position); a lookup tries the exact map first, then the
// masked entries in insertion order, and falls back to the zero vector.
// Masked entries are what lets a tree-derived network with 2^T - 1 neurons
// store 2^T leaf signatures instead of one row per full pattern.
class TableHead {
public:
    struct Entry {
        std::string pattern;  // over {'0','1','x'}, length == depth
        std::vector<double> value;
    };

    void set(std::string pattern, std::vector<double> value);
    // Returns nullptr when no entry matches (callers substitute zeros).
    const std::vector<double>* find(const std::string& key) const;

    // All entries, exact ones first (sorted by pattern), for serialization
    // and inspection. Deterministic ordering.
    std::vector<Entry> entries() const;
    size_t size() const { return exact_.size() + masked_.size(); }

private:
    std::unordered_map<std::string, std::vector<double>> exact_;
    std::vector<Entry> masked_;
};

struct AffineLayer {
    Matrix weight;  // out x in
    std::vector<double> bias;

    std::vector<double> apply(std::span<const double> in) const;
};

// g_phi: affine stack with an activation between layers (none after the
// last). Zero hidden layers means a plain linear map on the feature vector.
struct FullyConnectedHead {
    std::vector<AffineLayer> layers;
    Activation hidden_activation = Activation::Relu;

    std::vector<double> apply(std::span<const double> features) const;
};

// LLN output: affine map on the concatenation (x, a^1, ..., a^M).
struct LinearHead {
    Matrix weight;  // L x (D + M)
    std::vector<double> bias;
};

using OutputHead = std::variant<TableHead, FullyConnectedHead, LinearHead>;

enum class HeadKind { Table, FullyConnected, Linear };
HeadKind head_kind(const OutputHead& head);

struct LcnParameters {
    int depth = 0;       // M: number of hidden neurons (= layers)
    int input_dim = 0;   // D
    int output_dim = 0;  // L
    Variant variant = Variant::Lcn;
    std::vector<std::vector<double>> layer_weights;  // [i] has length D + i
    std::vector<double> layer_biases;                // length M
    OutputHead head;

    // Lambda the variant predicts with: 1 for Lcn/Lln (pure ReLU), 0 for Alcn.
    double eval_lambda() const { return variant == Variant::Alcn ? 0.0 : 1.0; }

    // Checks shape invariants and finiteness; throws lcn::Error on violation.
    void validate() const;
};

struct ForwardTrace {
    std::vector<double> pre_activations;   // z^i
    std::vector<double> post_activations;  // a^i
    ActivationPattern pattern;
    Matrix jacobian_rows;               // M x D, row i holds grad_x a^i
    std::vector<double> bias_features;  // a^i - (grad_x a^i)^T x
    double lambda = 1.0;
};

// Counts multiply-adds spent inside the Jacobian recursion. Used to measure
// the quadratic-in-depth cost of the dynamic program.
struct DpStats {
    std::uint64_t fma_count = 0;
};

double softplus(double z);
double sigmoid(double z);

// lambda * max(0, z) + (1 - lambda) * softplus(z), overflow-safe.
double annealed_activation(double z, double lambda);

// d/dz of the above under the sub-gradient convention (indicator is 1 at 0):
// lambda * I[z >= 0] + (1 - lambda) * sigmoid(z).
double annealed_derivative(double z, double lambda);

// Runs the backbone on one input: z/a per layer, pattern bits, then the
// Jacobian rows and locally constant bias terms via jacobian_dp.
ForwardTrace forward(const LcnParameters& params, std::span<const double> x, double lambda,
                     DpStats* stats = nullptr);

// Fills trace.jacobian_rows and trace.bias_features from the already-computed
// pre-activations, in one pass over the layers. Exposed separately so the
// reference oracles can target it directly.
void jacobian_dp(const LcnParameters& params, std::span<const double> x, ForwardTrace& trace,
                 DpStats* stats = nullptr);

// Fixed layout, part of the model-file contract: Jacobian rows in layer
// order, then the M bias features.
std::vector<double> feature_vector(const ForwardTrace& trace);
inline int feature_dim(int depth, int input_dim) { return depth * (input_dim + 1); }

// Evaluates the head on a completed trace. Table heads require lambda == 1.
std::vector<double> predict(const LcnParameters& params, std::span<const double> x, double lambda);
std::vector<double> predict(const LcnParameters& params, std::span<const double> x);

// How a fresh model is laid out; consumed by initialize_model and the CLI.
struct ModelSpec {
    int depth = 6;
    Variant variant = Variant::Lcn;
    HeadKind head = HeadKind::FullyConnected;
    std::vector<int> head_hidden;  // hidden widths of g_phi (FullyConnected only)
    Activation head_activation = Activation::Relu;
};

// Uniform init in [-a, a] with a = sqrt(6 / (fan_in + 1)), seed-controlled.
LcnParameters initialize_model(const ModelSpec& spec, int input_dim, int output_dim, Rng& rng);

}  // namespace lcn
