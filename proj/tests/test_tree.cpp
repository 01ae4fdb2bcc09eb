#include <doctest.h>

#include <cctype>
#include <cmath>
#include <functional>

#include "lcn/tree.hpp"
#include "lcn/verify.hpp"

using namespace lcn;

namespace {

LcnParameters toy_m2_table() {
    LcnParameters p;
    p.depth = 2;
    p.input_dim = 2;
    p.output_dim = 1;
    p.layer_weights = {{1.0, -1.0}, {-4.0, 1.0, 4.0}};
    p.layer_biases = {1.0, 4.0};
    TableHead table;
    table.set("00", {0.0});
    table.set("01", {1.0});
    table.set("10", {2.0});
    table.set("11", {3.0});
    p.head = std::move(table);
    return p;
}

ObliqueTree random_tree(std::uint64_t seed, int depth, int dim, int out) {
    Rng rng(seed);
    ObliqueTree t;
    t.depth = depth;
    t.input_dim = dim;
    t.output_dim = out;
    t.nodes.resize(t.node_count());
    for (ObliqueTreeNode& n : t.nodes) {
        n.weight.resize(dim);
        for (double& w : n.weight) w = rng.uniform(-1.0, 1.0);
        n.bias = rng.uniform(-1.0, 1.0);
    }
    t.leaf_values = Matrix(t.leaf_count(), out);
    for (double& v : t.leaf_values.data()) v = rng.uniform(-2.0, 2.0);
    return t;
}

// Plain recursive descent, structured nothing like the iterative router.
std::vector<double> reference_eval(const ObliqueTree& t, std::span<const double> x) {
    std::function<std::vector<double>(int, int, int)> walk = [&](int level, int node,
                                                                 int leaf_base) {
        if (level == t.depth)
            return std::vector<double>(t.leaf_values.row(leaf_base),
                                       t.leaf_values.row(leaf_base) + t.output_dim);
        double s = t.nodes[node].bias;
        for (int j = 0; j < t.input_dim; ++j) s += t.nodes[node].weight[j] * x[j];
        const int r = s >= 0.0 ? 1 : 0;
        return walk(level + 1, 2 * node + 1 + r, leaf_base * 2 + r);
    };
    return walk(0, 0, 0);
}

// Minimal DOT syntax check: brace balance, statement shapes, quoted labels.
bool dot_parses(const std::string& text) {
    size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    auto ident = [&]() -> bool {
        skip_ws();
        if (pos >= text.size()) return false;
        if (!(std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            return false;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            ++pos;
        return true;
    };
    auto literal = [&](const std::string& s) -> bool {
        skip_ws();
        if (text.compare(pos, s.size(), s) != 0) return false;
        pos += s.size();
        return true;
    };
    auto attr_list = [&]() -> bool {
        if (!literal("[")) return false;
        for (;;) {
            if (!ident()) return false;
            if (!literal("=")) return false;
            skip_ws();
            if (pos < text.size() && text[pos] == '"') {
                ++pos;
                while (pos < text.size() && text[pos] != '"') {
                    if (text[pos] == '\\') ++pos;
                    ++pos;
                }
                if (pos >= text.size()) return false;
                ++pos;
            } else if (!ident()) {
                return false;
            }
            skip_ws();
            if (pos < text.size() && text[pos] == ',') {
                ++pos;
                continue;
            }
            break;
        }
        return literal("]");
    };

    if (!literal("digraph")) return false;
    if (!ident()) return false;
    if (!literal("{")) return false;
    for (;;) {
        skip_ws();
        if (pos < text.size() && text[pos] == '}') {
            ++pos;
            break;
        }
        if (!ident()) return false;
        skip_ws();
        if (text.compare(pos, 2, "->") == 0) {
            pos += 2;
            if (!ident()) return false;
        }
        skip_ws();
        if (pos < text.size() && text[pos] == '[')
            if (!attr_list()) return false;
        if (!literal(";")) return false;
    }
    skip_ws();
    return pos == text.size();
}

}  // namespace

TEST_CASE("toy network expands to its closed-form tree parameters") {
    const ObliqueTree tree = lcn_to_tree(toy_m2_table());
    REQUIRE(tree.depth == 2);
    REQUIRE(tree.node_count() == 3);
    CHECK(tree.nodes[0].weight == std::vector<double>{1.0, -1.0});
    CHECK(tree.nodes[0].bias == 1.0);
    // r1 = 0: z2 = -4 x1 + x2 + 4.
    CHECK(tree.nodes[1].weight == std::vector<double>{-4.0, 1.0});
    CHECK(tree.nodes[1].bias == 4.0);
    // r1 = 1: z2 = -3 x2 + 8.
    CHECK(tree.nodes[2].weight == std::vector<double>{0.0, -3.0});
    CHECK(tree.nodes[2].bias == 8.0);
    // Leaf order follows the pattern bits.
    CHECK(tree.leaf_values.at(0, 0) == 0.0);
    CHECK(tree.leaf_values.at(1, 0) == 1.0);
    CHECK(tree.leaf_values.at(2, 0) == 2.0);
    CHECK(tree.leaf_values.at(3, 0) == 3.0);
}

TEST_CASE("depth-1 conversion keeps the raw weights") {
    LcnParameters p;
    p.depth = 1;
    p.input_dim = 2;
    p.output_dim = 1;
    p.layer_weights = {{1.0, -1.0}};
    p.layer_biases = {1.0};
    TableHead table;
    table.set("1", {1.0});
    table.set("0", {-1.0});
    p.head = std::move(table);
    const ObliqueTree tree = lcn_to_tree(p);
    CHECK(tree.node_count() == 1);
    CHECK(tree.nodes[0].weight == std::vector<double>{1.0, -1.0});
    CHECK(tree.leaf_count() == 2);
}

TEST_CASE("routing pattern equals the activation pattern") {
    const LcnParameters p = random_network(321, 8, 5, 1, HeadKind::Table);
    const ObliqueTree tree = lcn_to_tree(p);
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        std::vector<double> x(5);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        const ForwardTrace t = forward(p, x, 1.0);
        const RouteResult r = tree_route(tree, x);
        REQUIRE(t.pattern == r.pattern);
    }
}

TEST_CASE("tree_predict follows the toy network's origin region") {
    const ObliqueTree tree = lcn_to_tree(toy_m2_table());
    const RouteResult r = tree_route(tree, std::vector<double>{0.0, 0.0});
    CHECK(r.pattern.bits == std::vector<std::uint8_t>{1, 1});
    CHECK(r.leaf == 3);
    CHECK(tree_predict(tree, std::vector<double>{0.0, 0.0}) == std::vector<double>{3.0});
}

TEST_CASE("dummy nodes always route to the r=0 branch") {
    ObliqueTree t;
    t.depth = 1;
    t.input_dim = 2;
    t.output_dim = 1;
    t.nodes = {ObliqueTreeNode{{0.0, 0.0}, -1.0}};
    t.leaf_values = Matrix(2, 1);
    t.leaf_values.at(0, 0) = 5.0;
    t.leaf_values.at(1, 0) = -5.0;
    Rng rng(2);
    for (int i = 0; i < 20; ++i) {
        std::vector<double> x{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
        const RouteResult r = tree_route(t, x);
        CHECK(r.pattern.bits[0] == 0);
        CHECK(r.leaf == 0);
    }
}

TEST_CASE("padding preserves the function") {
    const ObliqueTree t = random_tree(6, 2, 3, 2);
    const ObliqueTree padded = padded_to_depth(t, 4);
    padded.validate();
    Rng rng(9);
    for (int i = 0; i < 300; ++i) {
        std::vector<double> x(3);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        CHECK(tree_predict(t, x) == tree_predict(padded, x));
    }
}

TEST_CASE("tree_predict agrees with a recursive reference evaluator") {
    const ObliqueTree t = random_tree(8, 4, 3, 2);
    Rng rng(10);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> x(3);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        CHECK(tree_predict(t, x) == reference_eval(t, x));
    }
}

TEST_CASE("lazy leaves evaluate the stored head on the region features") {
    const LcnParameters p = random_network(17, 4, 3, 2, HeadKind::FullyConnected, {5});
    const ObliqueTree tree = lcn_to_tree(p);
    REQUIRE(tree.lazy.has_value());
    Rng rng(12);
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> x(3);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        const std::vector<double> net = predict(p, x, 1.0);
        const std::vector<double> via = tree_predict(tree, x);
        for (int j = 0; j < 2; ++j) CHECK(net[j] == doctest::Approx(via[j]).epsilon(1e-12));
    }
}

TEST_CASE("depth-1 tree to canonical network and back") {
    const ObliqueTree t = random_tree(14, 1, 2, 1);
    const LcnParameters p = tree_to_canonical_lcn(t);
    CHECK(p.depth == 1);
    Rng rng(15);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> x{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        CHECK(predict(p, x, 1.0) == tree_predict(t, x));
    }
}

TEST_CASE("toy tree round-trips through the canonical construction") {
    const ObliqueTree tree = lcn_to_tree(toy_m2_table());
    const LcnParameters canonical = tree_to_canonical_lcn(tree);
    CHECK(canonical.depth == 3);  // one independent neuron per tree node
    for (int i = 0; i < canonical.depth; ++i)
        for (size_t k = 2; k < canonical.layer_weights[i].size(); ++k)
            CHECK(canonical.layer_weights[i][k] == 0.0);  // no cross connections
    Rng rng(16);
    for (int i = 0; i < 10000; ++i) {
        std::vector<double> x{rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)};
        CHECK(predict(canonical, x, 1.0) == tree_predict(tree, x));
    }
}

TEST_CASE("random depth-3 trees round-trip exactly") {
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        const ObliqueTree t = random_tree(seed, 3, 4, 2);
        const LcnParameters p = tree_to_canonical_lcn(t);
        CHECK(p.depth == 7);
        Rng rng(seed + 100);
        for (int i = 0; i < 3000; ++i) {
            std::vector<double> x(4);
            for (double& v : x) v = rng.uniform(-3.0, 3.0);
            CHECK(predict(p, x, 1.0) == tree_predict(t, x));
        }
    }
}

TEST_CASE("conversion guards: caps and variants") {
    LcnParameters p = random_network(31, 6, 3, 1, HeadKind::Table);
    CHECK_THROWS_AS(lcn_to_tree(p, 5), Error);
    p.variant = Variant::Alcn;
    CHECK_THROWS_AS(lcn_to_tree(p), Error);
    const ObliqueTree t = random_tree(33, 4, 2, 1);
    CHECK_THROWS_AS(tree_to_canonical_lcn(t, 3), Error);
}

TEST_CASE("explicit node count at depth 12") {
    const LcnParameters p = random_network(64, 12, 3, 1, HeadKind::Table);
    const ObliqueTree tree = lcn_to_tree(p);
    CHECK(static_cast<int>(tree.nodes.size()) == 4095);
}

TEST_CASE("bias recursion agrees with the z-probe formula per region") {
    const LcnParameters p = random_network(87, 6, 4, 1, HeadKind::Table);
    const ObliqueTree tree = lcn_to_tree(p);
    Rng rng(19);
    for (int i = 0; i < 400; ++i) {
        std::vector<double> x(4);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        const ForwardTrace t = forward(p, x, 1.0);
        // Walk the tree along the activation pattern; at every node the
        // stored beta must equal z^{level+1} - (grad_x z^{level+1})^T x,
        // where grad_x z is the Jacobian row before the indicator factor.
        int node = 0;
        for (int level = 0; level < 6; ++level) {
            std::vector<double> grad_z(4, 0.0);
            for (int j = 0; j < 4; ++j) grad_z[j] = p.layer_weights[level][j];
            for (int k = 0; k < level; ++k)
                for (int j = 0; j < 4; ++j)
                    grad_z[j] += p.layer_weights[level][4 + k] * t.jacobian_rows.at(k, j);
            double dot = 0.0;
            for (int j = 0; j < 4; ++j) dot += grad_z[j] * x[j];
            const double beta_probe = t.pre_activations[level] - dot;
            CHECK(tree.nodes[node].bias == doctest::Approx(beta_probe).epsilon(1e-9));
            node = 2 * node + 1 + (t.pattern.bits[level] ? 1 : 0);
        }
    }
}

TEST_CASE("dot export: l1 normalization, tie-break, and parsing") {
    ObliqueTree t;
    t.depth = 1;
    t.input_dim = 2;
    t.output_dim = 1;
    t.nodes = {ObliqueTreeNode{{0.5, -0.5}, 0.0}};
    t.leaf_values = Matrix(2, 1);
    t.leaf_values.at(0, 0) = -1.0;
    t.leaf_values.at(1, 0) = 2.0;

    DotOptions opt;
    opt.top_k = 1;
    const std::string dot = export_dot(t, opt);
    // Tie on |w|: the lower index wins, normalized to 0.5.
    CHECK(dot.find("x0: 0.5") != std::string::npos);
    CHECK(dot.find("x1:") == std::string::npos);
    CHECK(dot_parses(dot));

    const ObliqueTree fig = lcn_to_tree(toy_m2_table());
    DotOptions opt2;
    opt2.top_k = 2;
    const std::string dot2 = export_dot(fig, opt2);
    CHECK(dot2.find("x0: 0.5") != std::string::npos);
    CHECK(dot2.find("x1: -0.5") != std::string::npos);
    CHECK(dot_parses(dot2));

    DotOptions ranks;
    ranks.top_k = 2;
    ranks.classification_ranks = true;
    const std::string dot3 = export_dot(t, ranks);
    CHECK(dot3.find("rank 2/2") != std::string::npos);  // leaf value 2.0 scores highest
    CHECK(dot_parses(dot3));

    const std::string dot4 = export_dot(random_tree(44, 3, 5, 2), DotOptions{});
    CHECK(dot_parses(dot4));
}
