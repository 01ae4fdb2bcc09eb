#include "lcn/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lcn {

const char* to_string(Variant v) {
    switch (v) {
        case Variant::Lcn: return "lcn";
        case Variant::Alcn: return "alcn";
        case Variant::Lln: return "lln";
    }
    return "lcn";
}

Variant variant_from_string(const std::string& s) {
    if (s == "lcn") return Variant::Lcn;
    if (s == "alcn") return Variant::Alcn;
    if (s == "lln") return Variant::Lln;
    throw Error("unknown variant '" + s + "' (expected lcn|alcn|lln)");
}

std::string ActivationPattern::to_string() const {
    std::string s(bits.size(), '0');
    for (size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) s[i] = '1';
    return s;
}

ActivationPattern ActivationPattern::from_string(const std::string& s) {
    ActivationPattern p;
    p.bits.reserve(s.size());
    for (char c : s) {
        if (c != '0' && c != '1') throw Error("activation pattern must be over {0,1}");
        p.bits.push_back(c == '1' ? 1 : 0);
    }
    return p;
}

void TableHead::set(std::string pattern, std::vector<double> value) {
    if (pattern.find('x') == std::string::npos) {
        exact_[std::move(pattern)] = std::move(value);
    } else {
        masked_.push_back(Entry{std::move(pattern), std::move(value)});
    }
}

const std::vector<double>* TableHead::find(const std::string& key) const {
    if (auto it = exact_.find(key); it != exact_.end()) return &it->second;
    for (const Entry& e : masked_) {
        if (e.pattern.size() != key.size()) continue;
        bool match = true;
        for (size_t i = 0; i < key.size(); ++i) {
            if (e.pattern[i] != 'x' && e.pattern[i] != key[i]) {
                match = false;
                break;
            }
        }
        if (match) return &e.value;
    }
    return nullptr;
}

std::vector<TableHead::Entry> TableHead::entries() const {
    std::vector<Entry> out;
    out.reserve(size());
    for (const auto& [pattern, value] : exact_) out.push_back(Entry{pattern, value});
    std::sort(out.begin(), out.end(),
              [](const Entry& a, const Entry& b) { return a.pattern < b.pattern; });
    out.insert(out.end(), masked_.begin(), masked_.end());
    return out;
}

std::vector<double> AffineLayer::apply(std::span<const double> in) const {
    std::vector<double> out(bias);
    for (int o = 0; o < weight.rows(); ++o) {
        const double* w = weight.row(o);
        double acc = out[o];
        for (int i = 0; i < weight.cols(); ++i) acc += w[i] * in[i];
        out[o] = acc;
    }
    return out;
}

static double head_activation(double z, Activation act) {
    return act == Activation::Relu ? (z > 0.0 ? z : 0.0) : softplus(z);
}

std::vector<double> FullyConnectedHead::apply(std::span<const double> features) const {
    std::vector<double> cur(features.begin(), features.end());
    for (size_t l = 0; l < layers.size(); ++l) {
        cur = layers[l].apply(cur);
        if (l + 1 < layers.size())
            for (double& v : cur) v = head_activation(v, hidden_activation);
    }
    return cur;
}

HeadKind head_kind(const OutputHead& head) {
    if (std::holds_alternative<TableHead>(head)) return HeadKind::Table;
    if (std::holds_alternative<FullyConnectedHead>(head)) return HeadKind::FullyConnected;
    return HeadKind::Linear;
}

void LcnParameters::validate() const {
    if (depth <= 0 || input_dim <= 0 || output_dim <= 0)
        throw Error("model dims must be positive");
    if (static_cast<int>(layer_weights.size()) != depth ||
        static_cast<int>(layer_biases.size()) != depth)
        throw Error("layer arrays must have length depth");
    for (int i = 0; i < depth; ++i) {
        if (static_cast<int>(layer_weights[i].size()) != input_dim + i)
            throw Error("layer " + std::to_string(i + 1) + " weight must have length D+i-1");
        check_finite(layer_weights[i], "layer weight");
    }
    check_finite(layer_biases, "layer bias");
    if (variant == Variant::Lln && head_kind(head) != HeadKind::Linear)
        throw Error("lln requires a linear head");
    if (variant != Variant::Lln && head_kind(head) == HeadKind::Linear)
        throw Error("linear head is reserved for the lln variant");
    if (const auto* table = std::get_if<TableHead>(&head)) {
        if (depth < 63 && table->size() > (1ull << depth))
            throw Error("table has more than 2^M entries");
    }
    if (const auto* fc = std::get_if<FullyConnectedHead>(&head)) {
        if (fc->layers.empty()) throw Error("fully-connected head needs at least one layer");
        if (fc->layers.front().weight.cols() != feature_dim(depth, input_dim))
            throw Error("head input dim must equal M*(D+1)");
        if (fc->layers.back().weight.rows() != output_dim)
            throw Error("head output dim mismatch");
    }
    if (const auto* lin = std::get_if<LinearHead>(&head)) {
        if (lin->weight.cols() != input_dim + depth || lin->weight.rows() != output_dim)
            throw Error("linear head must be L x (D+M)");
    }
}

double softplus(double z) {
    // max(z,0) + log1p(exp(-|z|)): exact for large |z|, no overflow.
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double annealed_activation(double z, double lambda) {
    if (lambda == 1.0) return z > 0.0 ? z : 0.0;
    if (lambda == 0.0) return softplus(z);
    return lambda * (z > 0.0 ? z : 0.0) + (1.0 - lambda) * softplus(z);
}

double annealed_derivative(double z, double lambda) {
    double hard = z >= 0.0 ? 1.0 : 0.0;
    if (lambda == 1.0) return hard;
    return lambda * hard + (1.0 - lambda) * sigmoid(z);
}

void jacobian_dp(const LcnParameters& params, std::span<const double> x, ForwardTrace& trace,
                 DpStats* stats) {
    const int m = params.depth;
    const int d = params.input_dim;
    trace.jacobian_rows = Matrix(m, d);
    trace.bias_features.assign(m, 0.0);
    const bool hard = trace.lambda == 1.0;
    std::uint64_t fma = 0;

    for (int i = 0; i < m; ++i) {
        const std::vector<double>& w = params.layer_weights[i];
        double* row = trace.jacobian_rows.row(i);
        for (int j = 0; j < d; ++j) row[j] = w[j];
        fma += static_cast<std::uint64_t>(d);
        for (int k = 0; k < i; ++k) {
            const double cross = w[d + k];
            const double* prev = trace.jacobian_rows.row(k);
            for (int j = 0; j < d; ++j) row[j] += cross * prev[j];
            fma += static_cast<std::uint64_t>(d);
        }
        const double factor = annealed_derivative(trace.pre_activations[i], trace.lambda);
        for (int j = 0; j < d; ++j) row[j] *= factor;

        if (hard) {
            // With exact ReLU the bias term is accumulated by the same
            // recursion as the Jacobian, so it depends on the activation
            // pattern only. Computing a^i - (grad a^i)^T x instead would pick
            // up x-dependent rounding and break exact constancy per region.
            double b = params.layer_biases[i];
            for (int k = 0; k < i; ++k) b += w[d + k] * trace.bias_features[k];
            trace.bias_features[i] = trace.pattern.bits[i] ? b : 0.0;
        } else {
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += row[j] * x[j];
            trace.bias_features[i] = trace.post_activations[i] - dot;
        }
    }
    if (stats) stats->fma_count += fma;
}

ForwardTrace forward(const LcnParameters& params, std::span<const double> x, double lambda,
                     DpStats* stats) {
    if (static_cast<int>(x.size()) != params.input_dim)
        throw Error("input has length " + std::to_string(x.size()) + ", expected " +
                    std::to_string(params.input_dim));
    if (lambda < 0.0 || lambda > 1.0) throw Error("lambda must be in [0,1]");

    const int m = params.depth;
    const int d = params.input_dim;
    ForwardTrace trace;
    trace.lambda = lambda;
    trace.pre_activations.resize(m);
    trace.post_activations.resize(m);
    trace.pattern.bits.resize(m);

    for (int i = 0; i < m; ++i) {
        const std::vector<double>& w = params.layer_weights[i];
        double z = params.layer_biases[i];
        for (int j = 0; j < d; ++j) z += w[j] * x[j];
        for (int k = 0; k < i; ++k) z += w[d + k] * trace.post_activations[k];
        trace.pre_activations[i] = z;
        trace.post_activations[i] = annealed_activation(z, lambda);
        trace.pattern.bits[i] = z >= 0.0 ? 1 : 0;
    }
    jacobian_dp(params, x, trace, stats);
    return trace;
}

std::vector<double> feature_vector(const ForwardTrace& trace) {
    const int m = trace.jacobian_rows.rows();
    const int d = trace.jacobian_rows.cols();
    std::vector<double> out;
    out.reserve(static_cast<size_t>(m) * (d + 1));
    for (int i = 0; i < m; ++i) {
        const double* row = trace.jacobian_rows.row(i);
        out.insert(out.end(), row, row + d);
    }
    out.insert(out.end(), trace.bias_features.begin(), trace.bias_features.end());
    return out;
}

std::vector<double> predict(const LcnParameters& params, std::span<const double> x,
                            double lambda) {
    if (head_kind(params.head) == HeadKind::Table) {
        if (lambda != 1.0)
            throw Error("table head requires lambda = 1 (patterns are only exact under ReLU)");
        // Pattern lookup needs no Jacobian; run the cheap part of the pass.
        if (static_cast<int>(x.size()) != params.input_dim)
            throw Error("input has length " + std::to_string(x.size()) + ", expected " +
                        std::to_string(params.input_dim));
        const int m = params.depth;
        const int d = params.input_dim;
        std::vector<double> post(m);
        std::string key(m, '0');
        for (int i = 0; i < m; ++i) {
            const std::vector<double>& w = params.layer_weights[i];
            double z = params.layer_biases[i];
            for (int j = 0; j < d; ++j) z += w[j] * x[j];
            for (int k = 0; k < i; ++k) z += w[d + k] * post[k];
            post[i] = z > 0.0 ? z : 0.0;
            if (z >= 0.0) key[i] = '1';
        }
        const auto& table = std::get<TableHead>(params.head);
        if (const std::vector<double>* v = table.find(key)) return *v;
        return std::vector<double>(params.output_dim, 0.0);
    }

    ForwardTrace trace = forward(params, x, lambda);
    if (const auto* fc = std::get_if<FullyConnectedHead>(&params.head)) {
        return fc->apply(feature_vector(trace));
    }
    const auto& lin = std::get<LinearHead>(params.head);
    std::vector<double> tilde_a(x.begin(), x.end());
    tilde_a.insert(tilde_a.end(), trace.post_activations.begin(), trace.post_activations.end());
    return AffineLayer{lin.weight, lin.bias}.apply(tilde_a);
}

std::vector<double> predict(const LcnParameters& params, std::span<const double> x) {
    return predict(params, x, params.eval_lambda());
}

static std::vector<double> uniform_row(int n, double bound, Rng& rng) {
    std::vector<double> row(n);
    for (double& v : row) v = rng.uniform(-bound, bound);
    return row;
}

static AffineLayer init_affine(int out, int in, Rng& rng) {
    AffineLayer layer;
    layer.weight = Matrix(out, in);
    const double bound = std::sqrt(6.0 / (in + 1));
    for (int o = 0; o < out; ++o)
        for (int i = 0; i < in; ++i) layer.weight.at(o, i) = rng.uniform(-bound, bound);
    layer.bias = uniform_row(out, bound, rng);
    return layer;
}

LcnParameters initialize_model(const ModelSpec& spec, int input_dim, int output_dim, Rng& rng) {
    LcnParameters p;
    p.depth = spec.depth;
    p.input_dim = input_dim;
    p.output_dim = output_dim;
    p.variant = spec.variant;
    p.layer_weights.resize(spec.depth);
    p.layer_biases.resize(spec.depth);
    for (int i = 0; i < spec.depth; ++i) {
        const int fan_in = input_dim + i;
        const double bound = std::sqrt(6.0 / (fan_in + 1));
        p.layer_weights[i] = uniform_row(fan_in, bound, rng);
        p.layer_biases[i] = rng.uniform(-bound, bound);
    }

    HeadKind kind = spec.variant == Variant::Lln ? HeadKind::Linear : spec.head;
    if (kind == HeadKind::Table) {
        p.head = TableHead{};
    } else if (kind == HeadKind::Linear) {
        LinearHead lin;
        AffineLayer a = init_affine(output_dim, input_dim + spec.depth, rng);
        lin.weight = std::move(a.weight);
        lin.bias = std::move(a.bias);
        p.head = std::move(lin);
    } else {
        FullyConnectedHead fc;
        fc.hidden_activation = spec.head_activation;
        int in = feature_dim(spec.depth, input_dim);
        for (int width : spec.head_hidden) {
            fc.layers.push_back(init_affine(width, in, rng));
            in = width;
        }
        fc.layers.push_back(init_affine(output_dim, in, rng));
        p.head = std::move(fc);
    }
    return p;
}

}  // namespace lcn
