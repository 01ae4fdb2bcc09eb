// Explicit oblique decision trees and the exact conversions to and from
// locally constant networks. Trees are balanced and stored breadth-first:
// the node for decision-pattern prefix r_1..r_i lives at heap index
// 2^i - 1 + (r_1..r_i read as a binary number, r_1 most significant), so
// children of node n are 2n+1 (r=0) and 2n+2 (r=1). Routing uses the same
// ">= 0 at the boundary" convention as the network's activation pattern.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcn/network.hpp"

namespace lcn {

struct ObliqueTreeNode {
    std::vector<double> weight;  // omega, length D
    double bias = 0.0;           // beta
};

// Leaves of a tree converted from a network with a fully-connected head:
// each leaf keeps the feature vector of its region and the head is applied
// on demand, so conversion memory stays at 2^M * M(D+1) reals.
struct LazyLeaves {
    FullyConnectedHead head;
    Matrix features;  // 2^T x M(D+1)
};

struct ObliqueTree {
    int depth = 0;       // T
    int input_dim = 0;   // D
    int output_dim = 0;  // L
    std::vector<ObliqueTreeNode> nodes;  // 2^T - 1, breadth-first
    Matrix leaf_values;                  // 2^T x L (ignored when lazy is set)
    std::optional<LazyLeaves> lazy;

    int node_count() const { return (1 << depth) - 1; }
    int leaf_count() const { return 1 << depth; }
    void validate() const;
    // Materializes a leaf's output (evaluating the stored head if lazy).
    std::vector<double> leaf_value(int leaf) const;
};

struct RouteResult {
    ActivationPattern pattern;  // decision bits r_1..r_T
    int leaf = 0;               // index of the reached leaf
};

RouteResult tree_route(const ObliqueTree& tree, std::span<const double> x);
std::vector<double> tree_predict(const ObliqueTree& tree, std::span<const double> x);

// Expands an M-neuron network (pure ReLU semantics, Table or
// FullyConnected head) into its equivalent depth-M tree. Node parameters
// are derived symbolically per decision pattern, no input samples involved:
//   omega_{r_1..r_i} = W^{i+1}_{1:D} + sum_k W^{i+1}_{D+k} r_k omega_{r_1..r_{k-1}}
//   beta_{r_1..r_i}  = b^{i+1}      + sum_k W^{i+1}_{D+k} r_k beta_{r_1..r_{k-1}}
ObliqueTree lcn_to_tree(const LcnParameters& params, int depth_cap = 20);

// Encodes a depth-T tree as a network with 2^T - 1 mutually independent
// neurons (all cross-layer weights zero) and a table that keys each leaf on
// its on-path node bits, leaving off-path bits free.
LcnParameters tree_to_canonical_lcn(const ObliqueTree& tree, int depth_cap = 10);

// Pads a shallower tree to target_depth with dummy nodes (omega = 0,
// beta = -1). The dummy test 0 + (-1) >= 0 is always false, so routing
// always takes the r=0 branch; the original subtree is duplicated under
// both branches so the convention cannot change the function.
ObliqueTree padded_to_depth(const ObliqueTree& tree, int target_depth);

struct DotOptions {
    int top_k = 3;  // weight coordinates shown per node, by |normalized weight|
    bool classification_ranks = false;  // label leaves by score rank instead of value
    std::vector<std::string> feature_names;  // defaults to x0, x1, ...
};

// Graphviz export. Node weights are l1-normalized before the top-k cut;
// ties in |w_j| go to the lower index.
std::string export_dot(const ObliqueTree& tree, const DotOptions& options);

}  // namespace lcn
