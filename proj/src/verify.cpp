#include "lcn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>

#include <json.hpp>

#include "lcn/serialize.hpp"

namespace lcn {

using nlohmann::json;

std::string report_to_json_string(const std::vector<OracleReport>& reports) {
    json out = json::array();
    for (const OracleReport& r : reports) {
        json j;
        j["suite"] = r.suite;
        j["cases_run"] = r.cases_run;
        j["max_deviation"] = r.max_deviation;
        j["passed"] = r.passed();
        json fails = json::array();
        for (const OracleFailure& f : r.failures)
            fails.push_back(json{{"seed", f.seed}, {"message", f.message}});
        j["failures"] = std::move(fails);
        out.push_back(std::move(j));
    }
    return out.dump(2) + "\n";
}

NaiveForward naive_forward(const LcnParameters& params, std::span<const double> x,
                           double lambda) {
    const int m = params.depth;
    NaiveForward nf;
    nf.pre.resize(m);
    nf.post.resize(m);
    std::vector<double> concat(x.begin(), x.end());  // grows to (x, a^1, ..., a^{i-1})
    for (int i = 0; i < m; ++i) {
        const std::vector<double>& w = params.layer_weights[i];
        double z = params.layer_biases[i];
        for (size_t j = 0; j < concat.size(); ++j) z += w[j] * concat[j];
        nf.pre[i] = z;
        nf.post[i] = annealed_activation(z, lambda);
        concat.push_back(nf.post[i]);
    }
    return nf;
}

Matrix naive_jacobian(const LcnParameters& params, std::span<const double> x, double lambda) {
    params.validate();
    const int m = params.depth;
    const int d = params.input_dim;
    const NaiveForward nf = naive_forward(params, x, lambda);
    std::vector<double> s(m);
    for (int i = 0; i < m; ++i) s[i] = annealed_derivative(nf.pre[i], lambda);

    Matrix jac(m, d);
    std::vector<double> alpha(m);
    for (int target = 0; target < m; ++target) {
        // Back-propagate d z_target / d x from scratch for every target;
        // partial solutions are deliberately recomputed.
        const std::vector<double>& wt = params.layer_weights[target];
        std::vector<double> g(wt.begin(), wt.begin() + d);
        std::fill(alpha.begin(), alpha.end(), 0.0);
        for (int k = 0; k < target; ++k) alpha[k] = wt[d + k];
        for (int k = target - 1; k >= 0; --k) {
            const double beta = alpha[k] * s[k];
            if (beta == 0.0) continue;
            const std::vector<double>& wk = params.layer_weights[k];
            for (int j = 0; j < d; ++j) g[j] += beta * wk[j];
            for (int p = 0; p < k; ++p) alpha[p] += beta * wk[d + p];
        }
        double* row = jac.row(target);
        for (int j = 0; j < d; ++j) row[j] = s[target] * g[j];
    }
    return jac;
}

namespace {

// Loss evaluation with kink bookkeeping for the finite-difference oracle.
struct ProbedLoss {
    double loss = 0.0;
    double min_kink_distance = std::numeric_limits<double>::infinity();
    std::vector<std::uint8_t> signs;  // >=0 bits of every kinked unit, in order
};

ProbedLoss probed_loss(const LcnParameters& params, const BatchView& batch, double lambda,
                       LossKind loss) {
    ProbedLoss out;
    const int l_out = params.output_dim;
    std::vector<double> total(l_out);
    double sum = 0.0;
    for (int row : batch.rows) {
        const ForwardTrace trace = forward(params, batch.features->row_span(row), lambda);
        if (lambda > 0.0) {
            for (double z : trace.pre_activations) {
                out.min_kink_distance = std::min(out.min_kink_distance, std::abs(z));
                out.signs.push_back(z >= 0.0 ? 1 : 0);
            }
        }
        std::vector<double> pred;
        if (const auto* fc = std::get_if<FullyConnectedHead>(&params.head)) {
            std::vector<double> cur = feature_vector(trace);
            for (size_t l = 0; l < fc->layers.size(); ++l) {
                cur = fc->layers[l].apply(cur);
                if (l + 1 < fc->layers.size()) {
                    if (fc->hidden_activation == Activation::Relu) {
                        for (double v : cur) {
                            out.min_kink_distance = std::min(out.min_kink_distance, std::abs(v));
                            out.signs.push_back(v >= 0.0 ? 1 : 0);
                        }
                        for (double& v : cur) v = v > 0.0 ? v : 0.0;
                    } else {
                        for (double& v : cur) v = softplus(v);
                    }
                }
            }
            pred = std::move(cur);
        } else {
            const auto& lin = std::get<LinearHead>(params.head);
            std::vector<double> tilde(batch.features->row(row),
                                      batch.features->row(row) + params.input_dim);
            tilde.insert(tilde.end(), trace.post_activations.begin(),
                         trace.post_activations.end());
            pred = AffineLayer{lin.weight, lin.bias}.apply(tilde);
        }
        for (int j = 0; j < l_out; ++j)
            total[j] = pred[j] + (batch.offsets ? batch.offsets->at(row, j) : 0.0);
        sum += loss_value(total, {batch.labels->row(row), static_cast<size_t>(l_out)}, loss);
    }
    out.loss = sum / static_cast<double>(batch.rows.size());
    return out;
}

}  // namespace

FiniteDiffResult finite_difference_grads(const LcnParameters& params, const BatchView& batch,
                                         double lambda, LossKind loss, double step,
                                         double boundary_tol) {
    if (!(step > 0.0)) throw Error("finite differences need a positive step");
    LcnParameters work = params;
    const std::vector<double*> ptrs = parameter_pointers(work);
    FiniteDiffResult result;
    result.grads.resize(ptrs.size());
    result.skipped.assign(ptrs.size(), 0);

    for (size_t i = 0; i < ptrs.size(); ++i) {
        const double original = *ptrs[i];
        *ptrs[i] = original + step;
        const ProbedLoss plus = probed_loss(work, batch, lambda, loss);
        *ptrs[i] = original - step;
        const ProbedLoss minus = probed_loss(work, batch, lambda, loss);
        *ptrs[i] = original;

        result.grads[i] = (plus.loss - minus.loss) / (2.0 * step);
        const bool near_kink = std::min(plus.min_kink_distance, minus.min_kink_distance) <
                               boundary_tol;
        const bool crossed = plus.signs != minus.signs;
        if (near_kink || crossed) result.skipped[i] = 1;
    }
    return result;
}

namespace {

int node_index(int prefix_len, int within) { return (1 << prefix_len) - 1 + within; }

// Cross-weight chain coefficient alpha with r_j = 1 flipped to 0; bits of
// `within` encode r_1..r_len (r_1 most significant).
double flip_chain_alpha(const LcnParameters& params, int len, int within, int j) {
    const int d = params.input_dim;
    std::vector<double> a(len + 1, 0.0);
    a[j] = params.layer_weights[j][d + j - 1];  // W^{j+1}_{1,D+j}
    for (int m = j + 1; m <= len; ++m) {
        double v = params.layer_weights[m][d + j - 1];
        for (int k = j + 1; k <= m; ++k) {
            const int r_k = (within >> (len - k)) & 1;
            if (r_k) v += params.layer_weights[m][d + k - 1] * a[k - 1];
        }
        a[m] = v;
    }
    return a[len];
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

struct PairCheck {
    double coord_dev = 0.0;
    double sine = 0.0;
    bool checked_sine = false;
};

PairCheck check_one_pair(const LcnParameters& params, const ObliqueTree& tree, int len,
                         int within, int j) {
    const int d = tree.input_dim;
    const int flipped = within & ~(1 << (len - j));
    const std::vector<double>& wr = tree.nodes[node_index(len, within)].weight;
    const std::vector<double>& wrp = tree.nodes[node_index(len, flipped)].weight;
    const std::vector<double>& base =
        tree.nodes[node_index(j - 1, within >> (len - j + 1))].weight;
    const double alpha = flip_chain_alpha(params, len, within, j);

    PairCheck out;
    std::vector<double> diff(d);
    for (int c = 0; c < d; ++c) {
        diff[c] = wr[c] - wrp[c];
        out.coord_dev = std::max(out.coord_dev, std::abs(diff[c] - alpha * base[c]));
    }
    const double nd = norm2(diff);
    const double nb = norm2(base);
    if (nd > 1e-12 && nb > 1e-12) {
        double dot = 0.0, bb = 0.0;
        for (int c = 0; c < d; ++c) {
            dot += diff[c] * base[c];
            bb += base[c] * base[c];
        }
        const double coef = dot / bb;
        double res = 0.0;
        for (int c = 0; c < d; ++c) {
            const double r = diff[c] - coef * base[c];
            res += r * r;
        }
        out.sine = std::sqrt(res) / nd;
        out.checked_sine = true;
    }
    return out;
}

}  // namespace

OracleReport check_collinearity(const LcnParameters& params, const ObliqueTree& tree,
                          std::uint64_t seed, int max_exhaustive_depth, int samples,
                          double tol) {
    tree.validate();
    OracleReport report;
    report.suite = "collinearity";

    auto run_pair = [&](int len, int within, int j) {
        if (((within >> (len - j)) & 1) == 0) return;  // canonical orientation: r_j = 1
        const PairCheck chk = check_one_pair(params, tree, len, within, j);
        ++report.cases_run;
        report.record(chk.coord_dev);
        if (chk.coord_dev > tol)
            report.fail(seed, "alpha reconstruction off by " + std::to_string(chk.coord_dev) +
                                  " at depth " + std::to_string(len) + ", pattern " +
                                  std::to_string(within) + ", flip " + std::to_string(j));
        if (chk.checked_sine && chk.sine > tol)
            report.fail(seed, "collinearity |sin| = " + std::to_string(chk.sine) + " at depth " +
                                  std::to_string(len) + ", pattern " + std::to_string(within) +
                                  ", flip " + std::to_string(j));
    };

    if (tree.depth - 1 <= max_exhaustive_depth) {
        for (int len = 1; len < tree.depth; ++len)
            for (int within = 0; within < (1 << len); ++within)
                for (int j = 1; j <= len; ++j) run_pair(len, within, j);
    } else {
        Rng rng(seed);
        for (int i = 0; i < samples; ++i) {
            const int len = 1 + static_cast<int>(rng.below(tree.depth - 1));
            const int within = static_cast<int>(rng.below(1u << len));
            const int j = 1 + static_cast<int>(rng.below(len));
            run_pair(len, within | (1 << (len - j)), j);
        }
    }
    return report;
}

std::vector<double> project_coefficients(const std::vector<std::vector<double>>& basis,
                                         std::span<const double> d) {
    // Modified Gram-Schmidt with back-substitution; near-dependent columns
    // get a zero coefficient.
    const int n = static_cast<int>(basis.size());
    const int dim = static_cast<int>(d.size());
    std::vector<std::vector<double>> q(n);
    std::vector<std::vector<double>> r(n, std::vector<double>(n, 0.0));
    std::vector<bool> kept(n, false);
    for (int c = 0; c < n; ++c) {
        std::vector<double> v(basis[c]);
        const double orig = norm2(v);
        for (int p = 0; p < c; ++p) {
            if (!kept[p]) continue;
            double dot = 0.0;
            for (int i = 0; i < dim; ++i) dot += q[p][i] * v[i];
            r[p][c] = dot;
            for (int i = 0; i < dim; ++i) v[i] -= dot * q[p][i];
        }
        const double nv = norm2(v);
        if (nv > std::max(1e-12, 1e-12 * orig)) {
            kept[c] = true;
            r[c][c] = nv;
            for (double& x : v) x /= nv;
            q[c] = std::move(v);
        }
    }
    std::vector<double> qtd(n, 0.0);
    for (int c = 0; c < n; ++c) {
        if (!kept[c]) continue;
        for (int i = 0; i < dim; ++i) qtd[c] += q[c][i] * d[i];
    }
    std::vector<double> coeffs(n, 0.0);
    for (int c = n - 1; c >= 0; --c) {
        if (!kept[c]) continue;
        double v = qtd[c];
        for (int p = c + 1; p < n; ++p) v -= r[c][p] * coeffs[p];
        coeffs[c] = v / r[c][c];
    }
    return coeffs;
}

OracleReport check_span(const ObliqueTree& tree, int n_flips, std::uint64_t seed,
                        int max_pairs, double tol) {
    tree.validate();
    if (n_flips < 1) throw Error("n_flips must be >= 1");
    OracleReport report;
    report.suite = "span-decomposition-" + std::to_string(n_flips);
    if (n_flips >= tree.depth) return report;  // no same-depth pattern is long enough

    const int d = tree.input_dim;
    auto run_pair = [&](int len, int within, const std::vector<int>& flips) {
        int flipped = within;
        std::vector<std::vector<double>> basis;
        for (int j : flips) {
            flipped ^= 1 << (len - j);
            basis.push_back(tree.nodes[node_index(j - 1, within >> (len - j + 1))].weight);
        }
        const std::vector<double>& wr = tree.nodes[node_index(len, within)].weight;
        const std::vector<double>& wrp = tree.nodes[node_index(len, flipped)].weight;
        std::vector<double> diff(d);
        for (int c = 0; c < d; ++c) diff[c] = wr[c] - wrp[c];
        const double nd = norm2(diff);
        ++report.cases_run;
        if (nd <= 1e-12) return;  // zero difference lies in any span

        const std::vector<double> coeffs = project_coefficients(basis, diff);
        std::vector<double> resid(diff);
        for (size_t k = 0; k < basis.size(); ++k)
            for (int c = 0; c < d; ++c) resid[c] -= coeffs[k] * basis[k][c];
        const double rel = norm2(resid) / nd;
        report.record(rel);
        if (rel > tol)
            report.fail(seed, "span residual " + std::to_string(rel) + " at depth " +
                                  std::to_string(len) + ", pattern " + std::to_string(within));
    };

    // Exhaustive when the pair count fits the budget, sampled otherwise.
    long exhaustive_total = 0;
    std::vector<std::vector<std::vector<int>>> flip_sets_by_len(tree.depth);
    for (int len = n_flips; len < tree.depth; ++len) {
        std::vector<int> pick(n_flips);
        std::vector<std::vector<int>> sets;
        // enumerate n_flips-subsets of {1..len}
        std::function<void(int, int)> rec = [&](int start, int chosen) {
            if (chosen == n_flips) {
                sets.push_back(pick);
                return;
            }
            for (int j = start; j <= len; ++j) {
                pick[chosen] = j;
                rec(j + 1, chosen + 1);
            }
        };
        rec(1, 0);
        exhaustive_total += static_cast<long>(sets.size()) * (1 << len);
        flip_sets_by_len[len] = std::move(sets);
    }

    if (exhaustive_total <= max_pairs) {
        for (int len = n_flips; len < tree.depth; ++len)
            for (int within = 0; within < (1 << len); ++within)
                for (const std::vector<int>& flips : flip_sets_by_len[len])
                    run_pair(len, within, flips);
    } else {
        Rng rng(seed);
        for (int i = 0; i < max_pairs; ++i) {
            const int len = n_flips + static_cast<int>(rng.below(tree.depth - n_flips));
            const int within = static_cast<int>(rng.below(1u << len));
            const auto& sets = flip_sets_by_len[len];
            run_pair(len, within, sets[rng.below(sets.size())]);
        }
    }
    return report;
}

LcnParameters random_network(std::uint64_t seed, int depth, int input_dim, int output_dim,
                             HeadKind head, const std::vector<int>& hidden) {
    Rng rng(seed);
    LcnParameters p;
    p.depth = depth;
    p.input_dim = input_dim;
    p.output_dim = output_dim;
    p.variant = Variant::Lcn;
    p.layer_weights.resize(depth);
    p.layer_biases.resize(depth);
    for (int i = 0; i < depth; ++i) {
        p.layer_weights[i].resize(input_dim + i);
        for (double& w : p.layer_weights[i]) w = rng.uniform(-1.0, 1.0);
        p.layer_biases[i] = rng.uniform(-1.0, 1.0);
    }
    if (head == HeadKind::Table) {
        if (depth > 16) throw Error("full table enumeration capped at depth 16");
        TableHead table;
        std::string pattern(depth, '0');
        for (int mask = 0; mask < (1 << depth); ++mask) {
            for (int i = 0; i < depth; ++i)
                pattern[i] = ((mask >> (depth - 1 - i)) & 1) ? '1' : '0';
            std::vector<double> value(output_dim);
            for (double& v : value) v = rng.uniform(-1.0, 1.0);
            table.set(pattern, std::move(value));
        }
        p.head = std::move(table);
    } else if (head == HeadKind::Linear) {
        p.variant = Variant::Lln;
        LinearHead lin;
        lin.weight = Matrix(output_dim, input_dim + depth);
        for (double& v : lin.weight.data()) v = rng.uniform(-1.0, 1.0);
        lin.bias.resize(output_dim);
        for (double& v : lin.bias) v = rng.uniform(-1.0, 1.0);
        p.head = std::move(lin);
    } else {
        FullyConnectedHead fc;
        int in = feature_dim(depth, input_dim);
        std::vector<int> widths = hidden;
        widths.push_back(output_dim);
        for (int width : widths) {
            AffineLayer layer;
            layer.weight = Matrix(width, in);
            for (double& v : layer.weight.data()) v = rng.uniform(-1.0, 1.0);
            layer.bias.resize(width);
            for (double& v : layer.bias) v = rng.uniform(-1.0, 1.0);
            fc.layers.push_back(std::move(layer));
            in = width;
        }
        p.head = std::move(fc);
    }
    return p;
}

namespace {

// Draws an input whose trace stays clear of every activation boundary so
// pattern comparisons cannot be decided by rounding.
std::vector<double> clear_of_boundaries(const LcnParameters& params, const ObliqueTree& tree,
                                        Rng& rng, double margin = 1e-9) {
    const int d = params.input_dim;
    std::vector<double> x(d);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        const ForwardTrace trace = forward(params, x, 1.0);
        bool ok = true;
        for (double z : trace.pre_activations)
            if (std::abs(z) < margin) ok = false;
        int node = 0;
        for (int level = 0; level < tree.depth && ok; ++level) {
            const ObliqueTreeNode& n = tree.nodes[node];
            double s = n.bias;
            for (int j = 0; j < d; ++j) s += n.weight[j] * x[j];
            if (std::abs(s) < margin) ok = false;
            node = 2 * node + 1 + (s >= 0.0 ? 1 : 0);
        }
        if (ok) return x;
    }
    throw Error("could not sample an input away from activation boundaries");
}

OracleReport gradient_suite(Rng& master) {
    OracleReport report;
    report.suite = "gradient-check";
    const double lambdas[] = {0.0, 0.3, 0.7, 1.0};
    for (int c = 0; c < 12; ++c) {
        const std::uint64_t case_seed = master.next_u64();
        Rng rng(case_seed);
        const int m = 2 + static_cast<int>(rng.below(4));
        const int d = 2 + static_cast<int>(rng.below(5));
        const int l = 1 + static_cast<int>(rng.below(2));
        const double lambda = lambdas[c % 4];
        const std::vector<int> hidden = (c % 3 == 0) ? std::vector<int>{6} : std::vector<int>{};
        LcnParameters params =
            random_network(rng.next_u64(), m, d, l, HeadKind::FullyConnected, hidden);

        Matrix x(4, d), y(4, l);
        for (double& v : x.data()) v = rng.uniform(-1.5, 1.5);
        for (double& v : y.data()) v = rng.uniform(-1.0, 1.0);
        std::vector<int> rows = {0, 1, 2, 3};
        const BatchView batch{&x, &y, nullptr, rows};

        const BackwardResult analytic =
            backward(params, batch, lambda, LossKind::MeanSquaredError);
        GradientBundle bundle = analytic.grads;
        const std::vector<double*> gptr = gradient_pointers(bundle);
        const FiniteDiffResult fd =
            finite_difference_grads(params, batch, lambda, LossKind::MeanSquaredError);

        for (size_t i = 0; i < gptr.size(); ++i) {
            if (fd.skipped[i]) continue;
            const double a = *gptr[i];
            const double b = fd.grads[i];
            const double rel = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
            ++report.cases_run;
            report.record(rel);
            if (rel > 1e-4)
                report.fail(case_seed, "gradient mismatch rel=" + std::to_string(rel) +
                                           " at parameter " + std::to_string(i));
        }
    }
    return report;
}

OracleReport equivalence_suite(Rng& master) {
    OracleReport report;
    report.suite = "network-tree-equivalence";
    for (int c = 0; c < 8; ++c) {
        const std::uint64_t case_seed = master.next_u64();
        Rng rng(case_seed);
        const int m = 1 + static_cast<int>(rng.below(8));
        const int d = 2 + static_cast<int>(rng.below(6));
        const HeadKind head = (c % 2 == 0) ? HeadKind::Table : HeadKind::FullyConnected;
        LcnParameters params = random_network(rng.next_u64(), m, d, 1, head,
                                              head == HeadKind::Table ? std::vector<int>{}
                                                                      : std::vector<int>{5});
        const ObliqueTree tree = lcn_to_tree(params);
        for (int i = 0; i < 500; ++i) {
            const std::vector<double> x = clear_of_boundaries(params, tree, rng);
            const std::vector<double> net = predict(params, x, 1.0);
            const std::vector<double> via_tree = tree_predict(tree, x);
            const ForwardTrace trace = forward(params, x, 1.0);
            const RouteResult route = tree_route(tree, x);
            ++report.cases_run;
            double dev = 0.0;
            for (size_t j = 0; j < net.size(); ++j)
                dev = std::max(dev, std::abs(net[j] - via_tree[j]));
            report.record(dev);
            if (dev > 1e-8)
                report.fail(case_seed, "prediction gap " + std::to_string(dev));
            if (!(trace.pattern == route.pattern))
                report.fail(case_seed, "routing pattern differs from activation pattern");
        }
    }
    return report;
}

OracleReport structure_suite(Rng& master) {
    OracleReport report;
    report.suite = "structural-constraints";
    for (int c = 0; c < 4; ++c) {
        const std::uint64_t case_seed = master.next_u64();
        LcnParameters params = random_network(case_seed, 6, 4, 1, HeadKind::Table);
        const ObliqueTree tree = lcn_to_tree(params);
        const OracleReport collinear = check_collinearity(params, tree, case_seed);
        const OracleReport span2 = check_span(tree, 2, case_seed);
        const OracleReport span5 = check_span(tree, 5, case_seed);
        for (const OracleReport* sub : {&collinear, &span2, &span5}) {
            report.cases_run += sub->cases_run;
            report.record(sub->max_deviation);
            for (const OracleFailure& f : sub->failures) report.failures.push_back(f);
        }
    }
    return report;
}

OracleReport metric_suite(Rng& master) {
    OracleReport report;
    report.suite = "subset-auc-brute-force";
    for (int c = 0; c < 40; ++c) {
        const std::uint64_t case_seed = master.next_u64();
        Rng rng(case_seed);
        const int n = 5 + static_cast<int>(rng.below(60));
        std::vector<double> scores(n), labels(n);
        bool has_pos = false, has_neg = false;
        for (int i = 0; i < n; ++i) {
            scores[i] = 0.1 * static_cast<double>(rng.below(12));  // force ties
            labels[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
            (labels[i] == 1.0 ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) continue;

        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (!(labels[i] == 1.0 && labels[j] == 0.0)) continue;
                den += 1.0;
                if (scores[i] > scores[j])
                    num += 1.0;
                else if (scores[i] == scores[j])
                    num += 0.5;
            }
        const double brute = num / den;
        const double fast = auc(scores, labels);
        ++report.cases_run;
        report.record(std::abs(fast - brute));
        if (fast != brute)
            report.fail(case_seed, "sorted auc differs from brute force by " +
                                       std::to_string(fast - brute));

        std::vector<int> everyone(n);
        for (int i = 0; i < n; ++i) everyone[i] = i;
        const double sub = subset_auc(scores, labels, everyone);
        if (std::abs(sub - fast) > 1e-15)
            report.fail(case_seed, "subset auc over all rows differs from auc");
    }
    return report;
}

OracleReport serialization_suite(Rng& master) {
    OracleReport report;
    report.suite = "serialization-round-trip";
    const HeadKind kinds[] = {HeadKind::Table, HeadKind::FullyConnected, HeadKind::Linear};
    for (int c = 0; c < 6; ++c) {
        const std::uint64_t case_seed = master.next_u64();
        Rng rng(case_seed);
        const int m = 1 + static_cast<int>(rng.below(5));
        const int d = 1 + static_cast<int>(rng.below(5));
        Model model;
        model.params = random_network(rng.next_u64(), m, d, 2, kinds[c % 3],
                                      kinds[c % 3] == HeadKind::FullyConnected
                                          ? std::vector<int>{4}
                                          : std::vector<int>{});
        if (c % 2 == 0) {
            Standardizer s;
            s.mean.resize(d);
            s.stddev.resize(d);
            for (double& v : s.mean) v = rng.uniform(-1.0, 1.0);
            for (double& v : s.stddev) v = rng.uniform(0.5, 2.0);
            model.standardizer = std::move(s);
        }
        const std::string once = to_json_string(model);
        const Model back = model_from_json_string(once);
        const std::string twice = to_json_string(back);
        ++report.cases_run;
        if (once != twice) {
            report.fail(case_seed, "model JSON is not byte-stable across a round trip");
            continue;
        }
        if (back.params.layer_weights != model.params.layer_weights ||
            back.params.layer_biases != model.params.layer_biases)
            report.fail(case_seed, "layer parameters changed across a round trip");
        std::vector<double> x(d);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        const std::vector<double> before = predict(model.params, x, 1.0);
        const std::vector<double> after = predict(back.params, x, 1.0);
        if (before != after) report.fail(case_seed, "predictions changed across a round trip");
    }
    return report;
}

}  // namespace

std::vector<OracleReport> run_verification_suites(std::uint64_t seed) {
    Rng master(seed);
    std::vector<OracleReport> reports;
    reports.push_back(gradient_suite(master));
    reports.push_back(equivalence_suite(master));
    reports.push_back(structure_suite(master));
    reports.push_back(metric_suite(master));
    reports.push_back(serialization_suite(master));
    return reports;
}

}  // namespace lcn
