#include "lcn/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lcn {

void ObliqueTree::validate() const {
    if (depth <= 0 || input_dim <= 0 || output_dim <= 0)
        throw Error("tree dims must be positive");
    if (static_cast<int>(nodes.size()) != node_count())
        throw Error("tree must have 2^T - 1 nodes");
    for (const ObliqueTreeNode& n : nodes) {
        if (static_cast<int>(n.weight.size()) != input_dim)
            throw Error("node weight must have length D");
        check_finite(n.weight, "node weight");
        if (!std::isfinite(n.bias)) throw Error("node bias: non-finite value");
    }
    if (lazy) {
        if (lazy->features.rows() != leaf_count()) throw Error("lazy leaf feature count mismatch");
    } else {
        if (leaf_values.rows() != leaf_count() || leaf_values.cols() != output_dim)
            throw Error("leaf value matrix must be 2^T x L");
    }
}

std::vector<double> ObliqueTree::leaf_value(int leaf) const {
    if (lazy) return lazy->head.apply(lazy->features.row_span(leaf));
    return std::vector<double>(leaf_values.row(leaf), leaf_values.row(leaf) + output_dim);
}

RouteResult tree_route(const ObliqueTree& tree, std::span<const double> x) {
    if (static_cast<int>(x.size()) != tree.input_dim)
        throw Error("input has length " + std::to_string(x.size()) + ", expected " +
                    std::to_string(tree.input_dim));
    RouteResult res;
    res.pattern.bits.resize(tree.depth);
    int node = 0;
    int within = 0;
    for (int level = 0; level < tree.depth; ++level) {
        const ObliqueTreeNode& n = tree.nodes[node];
        double s = n.bias;
        for (int j = 0; j < tree.input_dim; ++j) s += n.weight[j] * x[j];
        const int r = s >= 0.0 ? 1 : 0;
        res.pattern.bits[level] = static_cast<std::uint8_t>(r);
        node = 2 * node + 1 + r;
        within = within * 2 + r;
    }
    res.leaf = within;
    return res;
}

std::vector<double> tree_predict(const ObliqueTree& tree, std::span<const double> x) {
    return tree.leaf_value(tree_route(tree, x).leaf);
}

ObliqueTree lcn_to_tree(const LcnParameters& params, int depth_cap) {
    params.validate();
    if (params.variant != Variant::Lcn)
        throw Error("only the lcn variant converts exactly (got " +
                    std::string(to_string(params.variant)) + ")");
    if (params.depth > depth_cap)
        throw Error("depth " + std::to_string(params.depth) + " exceeds the explicit-tree cap " +
                    std::to_string(depth_cap) + " (the tree has 2^M - 1 nodes)");

    const int m = params.depth;
    const int d = params.input_dim;
    ObliqueTree tree;
    tree.depth = m;
    tree.input_dim = d;
    tree.output_dim = params.output_dim;
    tree.nodes.resize(tree.node_count());
    std::vector<double> node_beta(tree.node_count(), 0.0);

    // Level by level; every ancestor of node (level, within) is already
    // built, so the recursion reads straight out of the array. The k-loop
    // runs ascending to mirror the summation order of jacobian_dp, which
    // keeps network features and tree parameters bit-identical per region.
    for (int level = 0; level < m; ++level) {
        const std::vector<double>& w = params.layer_weights[level];
        const int base = (1 << level) - 1;
        for (int within = 0; within < (1 << level); ++within) {
            ObliqueTreeNode& node = tree.nodes[base + within];
            node.weight.assign(w.begin(), w.begin() + d);
            double beta = params.layer_biases[level];
            for (int k = 1; k <= level; ++k) {
                const int r_k = (within >> (level - k)) & 1;
                if (!r_k) continue;
                const int anc = (1 << (k - 1)) - 1 + (within >> (level - k + 1));
                const double cross = w[d + k - 1];
                const std::vector<double>& anc_w = tree.nodes[anc].weight;
                for (int j = 0; j < d; ++j) node.weight[j] += cross * anc_w[j];
                beta += cross * node_beta[anc];
            }
            node.bias = beta;
            node_beta[base + within] = beta;
        }
    }

    const int leaves = tree.leaf_count();
    if (const auto* table = std::get_if<TableHead>(&params.head)) {
        tree.leaf_values = Matrix(leaves, params.output_dim);
        std::string key(m, '0');
        for (int leaf = 0; leaf < leaves; ++leaf) {
            for (int i = 0; i < m; ++i) key[i] = ((leaf >> (m - 1 - i)) & 1) ? '1' : '0';
            if (const std::vector<double>* v = table->find(key))
                std::copy(v->begin(), v->end(), tree.leaf_values.row(leaf));
        }
    } else {
        const auto& fc = std::get<FullyConnectedHead>(params.head);
        LazyLeaves lazy;
        lazy.head = fc;
        lazy.features = Matrix(leaves, feature_dim(m, d));
        for (int leaf = 0; leaf < leaves; ++leaf) {
            double* feat = lazy.features.row(leaf);
            int node = 0;
            for (int i = 0; i < m; ++i) {
                const int r = (leaf >> (m - 1 - i)) & 1;
                if (r) {
                    const ObliqueTreeNode& n = tree.nodes[node];
                    for (int j = 0; j < d; ++j) feat[i * d + j] = n.weight[j];
                    feat[m * d + i] = n.bias;
                }
                node = 2 * node + 1 + r;
            }
        }
        tree.lazy = std::move(lazy);
    }
    return tree;
}

LcnParameters tree_to_canonical_lcn(const ObliqueTree& tree, int depth_cap) {
    tree.validate();
    if (tree.depth > depth_cap)
        throw Error("tree depth " + std::to_string(tree.depth) +
                    " exceeds the canonical-network cap " + std::to_string(depth_cap));

    const int t = tree.depth;
    const int d = tree.input_dim;
    const int m = tree.node_count();  // one neuron per tree node
    LcnParameters p;
    p.depth = m;
    p.input_dim = d;
    p.output_dim = tree.output_dim;
    p.variant = Variant::Lcn;
    p.layer_weights.resize(m);
    p.layer_biases.resize(m);
    for (int i = 0; i < m; ++i) {
        // Cross-layer weights stay zero: the neurons are mutually
        // independent, reproducing the flat 2^T - 1 layer of the
        // single-hidden-layer construction.
        p.layer_weights[i].assign(d + i, 0.0);
        std::copy(tree.nodes[i].weight.begin(), tree.nodes[i].weight.end(),
                  p.layer_weights[i].begin());
        p.layer_biases[i] = tree.nodes[i].bias;
    }

    TableHead table;
    for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
        std::string pattern(m, 'x');
        int node = 0;
        for (int i = 0; i < t; ++i) {
            const int r = (leaf >> (t - 1 - i)) & 1;
            pattern[node] = r ? '1' : '0';
            node = 2 * node + 1 + r;
        }
        table.set(std::move(pattern), tree.leaf_value(leaf));
    }
    p.head = std::move(table);
    return p;
}

ObliqueTree padded_to_depth(const ObliqueTree& tree, int target_depth) {
    tree.validate();
    if (target_depth < tree.depth) throw Error("cannot pad to a smaller depth");
    if (target_depth == tree.depth) return tree;
    if (tree.lazy) throw Error("padding lazy-leaf trees is not supported");

    ObliqueTree out;
    out.depth = target_depth;
    out.input_dim = tree.input_dim;
    out.output_dim = tree.output_dim;
    out.nodes.resize(out.node_count(), ObliqueTreeNode{std::vector<double>(tree.input_dim, 0.0),
                                                       -1.0});
    for (int level = 0; level < tree.depth; ++level) {
        const int n = 1 << level;
        std::copy(tree.nodes.begin() + (n - 1), tree.nodes.begin() + (2 * n - 1),
                  out.nodes.begin() + (n - 1));
    }
    // Dummy levels route everything through r=0, and the original leaf value
    // is replicated across every completion so both branches agree anyway.
    out.leaf_values = Matrix(out.leaf_count(), out.output_dim);
    const int copies = 1 << (target_depth - tree.depth);
    for (int leaf = 0; leaf < tree.leaf_count(); ++leaf)
        for (int c = 0; c < copies; ++c)
            std::copy(tree.leaf_values.row(leaf), tree.leaf_values.row(leaf) + out.output_dim,
                      out.leaf_values.row(leaf * copies + c));
    return out;
}

static std::string format_number(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

static std::string escape_label(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string export_dot(const ObliqueTree& tree, const DotOptions& options) {
    tree.validate();
    if (options.top_k < 1) throw Error("top_k must be >= 1");
    const int d = tree.input_dim;

    auto feature_name = [&](int j) {
        if (j < static_cast<int>(options.feature_names.size()))
            return escape_label(options.feature_names[j]);
        return std::string("x") + std::to_string(j);
    };

    std::ostringstream os;
    os << "digraph oblique_tree {\n";
    os << "  node [shape=box];\n";
    for (int n = 0; n < tree.node_count(); ++n) {
        const ObliqueTreeNode& node = tree.nodes[n];
        double l1 = 0.0;
        for (double w : node.weight) l1 += std::abs(w);
        std::vector<double> scaled(node.weight);
        double bias = node.bias;
        if (l1 > 0.0) {
            for (double& w : scaled) w /= l1;
            bias /= l1;
        }
        std::vector<int> order(d);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return std::abs(scaled[a]) > std::abs(scaled[b]);
        });
        os << "  n" << n << " [label=\"";
        const int k = std::min(options.top_k, d);
        for (int i = 0; i < k; ++i) {
            if (i) os << "\\n";
            os << feature_name(order[i]) << ": " << format_number(scaled[order[i]]);
        }
        os << "\\nb: " << format_number(bias) << "\"];\n";
    }

    std::vector<std::vector<double>> values(tree.leaf_count());
    for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) values[leaf] = tree.leaf_value(leaf);
    std::vector<int> rank(tree.leaf_count(), 0);
    if (options.classification_ranks) {
        std::vector<int> order(tree.leaf_count());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return values[a][0] < values[b][0];
        });
        // Rank 1 is the lowest-scoring leaf; the highest number is the most
        // likely leaf.
        for (int i = 0; i < tree.leaf_count(); ++i) rank[order[i]] = i + 1;
    }
    for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
        os << "  l" << leaf << " [shape=ellipse, label=\"";
        if (options.classification_ranks) {
            os << "rank " << rank[leaf] << "/" << tree.leaf_count();
        } else {
            os << "(";
            for (int j = 0; j < tree.output_dim; ++j) {
                if (j) os << ", ";
                os << format_number(values[leaf][j]);
            }
            os << ")";
        }
        os << "\"];\n";
    }

    for (int n = 0; n < tree.node_count(); ++n) {
        for (int r = 0; r < 2; ++r) {
            const int child = 2 * n + 1 + r;
            os << "  n" << n << " -> ";
            if (child < tree.node_count()) {
                os << "n" << child;
            } else {
                os << "l" << (child - tree.node_count());
            }
            os << " [label=\"" << r << "\"];\n";
        }
    }
    os << "}\n";
    return os.str();
}

}  // namespace lcn
