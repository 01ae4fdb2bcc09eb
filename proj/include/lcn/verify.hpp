// Independent oracles for cross-checking the main implementation: a naive
// forward/Jacobian path that re-derives everything per neuron, central-
// difference gradients, and the structural checks on tree weights (the
// collinearity and span properties of same-depth decision nodes). These
// deliberately share no recursion with the code they check.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcn/train.hpp"
#include "lcn/tree.hpp"

namespace lcn {

struct OracleFailure {
    std::uint64_t seed = 0;
    std::string message;
};

struct OracleReport {
    std::string suite;
    int cases_run = 0;
    double max_deviation = 0.0;
    std::vector<OracleFailure> failures;

    bool passed() const { return failures.empty(); }
    void record(double deviation) { max_deviation = std::max(max_deviation, deviation); }
    void fail(std::uint64_t seed, std::string message) {
        failures.push_back(OracleFailure{seed, std::move(message)});
    }
};

std::string report_to_json_string(const std::vector<OracleReport>& reports);

// Straightforward forward pass that materializes the concatenated input
// (x, a^1, ..., a^{i-1}) explicitly for every layer.
struct NaiveForward {
    std::vector<double> pre;
    std::vector<double> post;
};
NaiveForward naive_forward(const LcnParameters& params, std::span<const double> x, double lambda);

// Computes each grad_x a^i by an independent per-neuron backward unroll of
// the affine chain (the cubic-cost reference path). Agrees with jacobian_dp
// to 1e-12 absolute; bit equality is not expected because the summation
// order differs.
Matrix naive_jacobian(const LcnParameters& params, std::span<const double> x, double lambda = 1.0);

// Central differences of the mean batch loss per parameter, indexed like
// parameter_pointers. Parameters whose perturbation lands within
// boundary_tol of an activation kink (backbone z at lambda > 0, or a ReLU
// pre-activation in the head) are flagged in `skipped` instead of compared.
struct FiniteDiffResult {
    std::vector<double> grads;
    std::vector<std::uint8_t> skipped;
};
FiniteDiffResult finite_difference_grads(const LcnParameters& params, const BatchView& batch,
                                         double lambda, LossKind loss, double step = 1e-6,
                                         double boundary_tol = 1e-4);

// Collinearity of same-depth tree weights whose decision patterns differ in
// one bit: omega_r - omega_r' = alpha * omega_{r_1..r_{j-1}}, with alpha
// recomputed from the cross-weight chain of the generating network.
// Exhaustive up to max_exhaustive_depth, sampled beyond.
OracleReport check_collinearity(const LcnParameters& params, const ObliqueTree& tree,
                          std::uint64_t seed = 0, int max_exhaustive_depth = 10,
                          int samples = 10000, double tol = 1e-9);

// Span property for patterns differing in n_flips bits: the weight
// difference projects onto the flip-position ancestor weights with relative
// residual <= tol.
OracleReport check_span(const ObliqueTree& tree, int n_flips, std::uint64_t seed = 0,
                        int max_pairs = 20000, double tol = 1e-8);

// Least-squares coefficients of d against the given basis vectors
// (modified Gram-Schmidt; dependent columns get coefficient zero).
std::vector<double> project_coefficients(const std::vector<std::vector<double>>& basis,
                                         std::span<const double> d);

// Generic network with weights uniform in [-1, 1]; Table heads are filled
// for every pattern (requires depth <= 16), FullyConnected heads use the
// given hidden widths.
LcnParameters random_network(std::uint64_t seed, int depth, int input_dim, int output_dim,
                             HeadKind head, const std::vector<int>& hidden = {});

// Built-in suites run by the `verify` command; each is deterministic under
// its seed. All thresholds are fixed here, not configurable.
std::vector<OracleReport> run_verification_suites(std::uint64_t seed);

}  // namespace lcn
