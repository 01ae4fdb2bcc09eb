#include <doctest.h>

#include <cmath>

#include "lcn/verify.hpp"

using namespace lcn;

namespace {

LcnParameters toy_m2() {
    LcnParameters p;
    p.depth = 2;
    p.input_dim = 2;
    p.output_dim = 1;
    p.layer_weights = {{1.0, -1.0}, {-4.0, 1.0, 4.0}};
    p.layer_biases = {1.0, 4.0};
    p.head = TableHead{};
    return p;
}

}  // namespace

TEST_CASE("naive jacobian reproduces the toy network rows") {
    const Matrix j = naive_jacobian(toy_m2(), std::vector<double>{0.0, 0.0});
    CHECK(j.at(0, 0) == 1.0);
    CHECK(j.at(0, 1) == -1.0);
    CHECK(j.at(1, 0) == 0.0);
    CHECK(j.at(1, 1) == -3.0);
}

TEST_CASE("naive jacobian is zero on dead networks") {
    LcnParameters p = random_network(4, 5, 3, 1, HeadKind::Table);
    for (double& b : p.layer_biases) b = -100.0;
    const Matrix j = naive_jacobian(p, std::vector<double>{0.1, 0.2, -0.1});
    for (double v : j.data()) CHECK(v == 0.0);
}

TEST_CASE("dynamic program equals the per-neuron unroll within 1e-12") {
    Rng master(10);
    for (int rep = 0; rep < 30; ++rep) {
        const std::uint64_t seed = master.next_u64();
        Rng rng(seed);
        const int m = 1 + static_cast<int>(rng.below(8));
        const int d = 1 + static_cast<int>(rng.below(6));
        const LcnParameters p = random_network(seed, m, d, 1, HeadKind::Table);
        for (double lambda : {1.0, 0.4}) {
            std::vector<double> x(d);
            for (double& v : x) v = rng.uniform(-2.0, 2.0);
            const ForwardTrace t = forward(p, x, lambda);
            const Matrix naive = naive_jacobian(p, x, lambda);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < d; ++j)
                    CHECK(std::abs(t.jacobian_rows.at(i, j) - naive.at(i, j)) <= 1e-12);
        }
    }
}

TEST_CASE("finite differences recover the analytic gradient of a linear head") {
    // With frozen backbone features and an affine head under MSE the loss is
    // quadratic in the head parameters, so central differences are near-exact.
    LcnParameters p = random_network(21, 2, 2, 1, HeadKind::FullyConnected);
    Matrix x(2, 2), y(2, 1);
    x.at(0, 0) = 0.3;
    x.at(0, 1) = -0.8;
    x.at(1, 0) = -1.1;
    x.at(1, 1) = 0.4;
    y.at(0, 0) = 1.0;
    y.at(1, 0) = -2.0;
    const std::vector<int> rows{0, 1};
    const BatchView batch{&x, &y, nullptr, rows};
    const FiniteDiffResult fd =
        finite_difference_grads(p, batch, 1.0, LossKind::MeanSquaredError);

    // Analytic: d/dw mean_i (w^T f_i + b - y_i)^2 = mean_i 2 (w^T f_i + b - y_i) f_i.
    const auto& head = std::get<FullyConnectedHead>(p.head).layers[0];
    std::vector<std::vector<double>> feats;
    std::vector<double> residual;
    for (int r = 0; r < 2; ++r) {
        const ForwardTrace t = forward(p, x.row_span(r), 1.0);
        feats.push_back(feature_vector(t));
        double pred = head.bias[0];
        for (size_t k = 0; k < feats[r].size(); ++k) pred += head.weight.at(0, k) * feats[r][k];
        residual.push_back(pred - y.at(r, 0));
    }
    const size_t head_offset = parameter_count(p) - feats[0].size() - 1;
    for (size_t k = 0; k < feats[0].size(); ++k) {
        const double analytic = residual[0] * feats[0][k] + residual[1] * feats[1][k];
        if (fd.skipped[head_offset + k]) continue;
        CHECK(fd.grads[head_offset + k] == doctest::Approx(analytic).epsilon(1e-8));
    }
}

TEST_CASE("finite differences and backward both vanish on dead samples") {
    LcnParameters p = random_network(31, 3, 2, 1, HeadKind::FullyConnected);
    for (double& b : p.layer_biases) b = -40.0;
    Matrix x(1, 2), y(1, 1);
    x.at(0, 0) = 0.2;
    x.at(0, 1) = -0.3;
    y.at(0, 0) = 0.5;
    const std::vector<int> rows{0};
    const BatchView batch{&x, &y, nullptr, rows};
    const FiniteDiffResult fd =
        finite_difference_grads(p, batch, 1.0, LossKind::MeanSquaredError);
    const BackwardResult bw = backward(p, batch, 1.0, LossKind::MeanSquaredError);
    // Backbone gradients: exactly zero analytically, ~zero numerically.
    size_t idx = 0;
    for (int i = 0; i < p.depth; ++i) {
        for (size_t j = 0; j < p.layer_weights[i].size(); ++j, ++idx) {
            CHECK(bw.grads.layer_weights[i][j] == 0.0);
            if (!fd.skipped[idx]) CHECK(std::abs(fd.grads[idx]) <= 1e-10);
        }
        CHECK(bw.grads.layer_biases[i] == 0.0);
        if (!fd.skipped[idx]) CHECK(std::abs(fd.grads[idx]) <= 1e-10);
        ++idx;
    }
}

TEST_CASE("collinearity alpha on the toy pair") {
    const LcnParameters p = toy_m2();
    const ObliqueTree tree = lcn_to_tree(p);
    // (0,-3) - (-4,1) = (4,-4) = 4 * (1,-1), with alpha = W2_{1,3} * r_1 = 4.
    const OracleReport report = check_collinearity(p, tree);
    CHECK(report.passed());
    CHECK(report.cases_run == 1);
    CHECK(report.max_deviation <= 1e-12);
}

TEST_CASE("collinearity accepts a zero cross-weight (alpha = 0)") {
    LcnParameters p = toy_m2();
    p.layer_weights[1][2] = 0.0;  // severs the only cross connection
    const ObliqueTree tree = lcn_to_tree(p);
    CHECK(tree.nodes[1].weight == tree.nodes[2].weight);
    const OracleReport report = check_collinearity(p, tree);
    CHECK(report.passed());
}

TEST_CASE("collinearity and span hold exhaustively on random networks") {
    for (std::uint64_t seed : {101u, 102u, 103u}) {
        const LcnParameters p = random_network(seed, 6, 4, 1, HeadKind::Table);
        const ObliqueTree tree = lcn_to_tree(p);
        const OracleReport collinear = check_collinearity(p, tree, seed);
        CHECK(collinear.passed());
        CHECK(collinear.cases_run > 100);
        for (int n = 1; n <= 5; ++n) {
            const OracleReport span = check_span(tree, n, seed);
            CHECK(span.passed());
        }
    }
}

TEST_CASE("span check reduces to the collinearity check at one flip") {
    const LcnParameters p = random_network(202, 5, 3, 1, HeadKind::Table);
    const ObliqueTree tree = lcn_to_tree(p);
    const OracleReport collinear = check_collinearity(p, tree, 1);
    const OracleReport span = check_span(tree, 1, 1);
    CHECK(collinear.passed());
    CHECK(span.passed());
    CHECK(span.cases_run >= collinear.cases_run);  // span counts both orientations
}

TEST_CASE("node weights are the shared row plus a span of their ancestors") {
    // Every omega at depth i decomposes as W^{i+1}_{1,1:D} plus a linear
    // combination of the weights along its own path.
    for (std::uint64_t seed : {301u, 302u}) {
        const LcnParameters p = random_network(seed, 7, 5, 1, HeadKind::Table);
        const ObliqueTree tree = lcn_to_tree(p);
        for (int len = 1; len < tree.depth; ++len) {
            for (int within = 0; within < (1 << len); ++within) {
                const std::vector<double>& node =
                    tree.nodes[(1 << len) - 1 + within].weight;
                std::vector<double> diff(node);
                for (int c = 0; c < 5; ++c) diff[c] -= p.layer_weights[len][c];
                std::vector<std::vector<double>> basis;
                for (int k = 1; k <= len; ++k)
                    basis.push_back(
                        tree.nodes[(1 << (k - 1)) - 1 + (within >> (len - k + 1))].weight);
                const std::vector<double> coeffs = project_coefficients(basis, diff);
                std::vector<double> resid(diff);
                double norm_d = 0.0, norm_r = 0.0;
                for (int c = 0; c < 5; ++c) {
                    for (size_t k = 0; k < basis.size(); ++k)
                        resid[c] -= coeffs[k] * basis[k][c];
                    norm_d += diff[c] * diff[c];
                    norm_r += resid[c] * resid[c];
                }
                if (norm_d > 1e-24)
                    CHECK(std::sqrt(norm_r) <= 1e-8 * std::sqrt(norm_d));
            }
        }
    }
}

TEST_CASE("projection recovers known coefficients on an orthogonal basis") {
    const std::vector<std::vector<double>> basis = {
        {2.0, 0.0, 0.0, 0.0},
        {0.0, -1.5, 0.0, 0.0},
        {0.0, 0.0, 0.5, 0.0},
    };
    const std::vector<double> alphas = {0.75, -2.0, 4.0};
    std::vector<double> d(4, 0.0);
    for (size_t k = 0; k < basis.size(); ++k)
        for (int c = 0; c < 4; ++c) d[c] += alphas[k] * basis[k][c];
    const std::vector<double> recovered = project_coefficients(basis, d);
    for (size_t k = 0; k < alphas.size(); ++k)
        CHECK(recovered[k] == doctest::Approx(alphas[k]).epsilon(1e-9));
}

TEST_CASE("built-in suites pass and serialize to a report") {
    const std::vector<OracleReport> reports = run_verification_suites(7);
    REQUIRE(reports.size() == 5);
    for (const OracleReport& r : reports) {
        INFO(r.suite);
        for (const OracleFailure& f : r.failures) { INFO(f.message); }
        CHECK(r.passed());
        CHECK(r.cases_run > 0);
    }
    const std::string json = report_to_json_string(reports);
    CHECK(json.find("\"suite\"") != std::string::npos);
    CHECK(json.find("gradient-check") != std::string::npos);
}
