#include "lcn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

namespace lcn {

const char* to_string(LossKind k) {
    return k == LossKind::CrossEntropy ? "cross_entropy" : "mse";
}

LossKind loss_from_string(const std::string& s) {
    if (s == "cross_entropy" || s == "ce") return LossKind::CrossEntropy;
    if (s == "mse") return LossKind::MeanSquaredError;
    throw Error("unknown loss '" + s + "' (expected cross_entropy|mse)");
}

double AnnealSchedule::lambda_for_epoch(int epoch, int total_epochs) const {
    if (kind == AnnealKind::Constant) return value;
    return static_cast<double>(epoch) / static_cast<double>(total_epochs);
}

void TrainConfig::validate() const {
    if (epochs < 0) throw Error("epochs must be >= 0");
    if (batch_size <= 0) throw Error("batch size must be positive");
    if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (lr_decay_every <= 0) throw Error("lr_decay_every must be positive");
    if (!(lr_decay_factor > 0.0)) throw Error("lr_decay_factor must be positive");
    if (dropconnect_prob < 0.0 || dropconnect_prob >= 1.0)
        throw Error("dropconnect probability must be in [0,1)");
    if (anneal.kind == AnnealKind::Constant && (anneal.value < 0.0 || anneal.value > 1.0))
        throw Error("constant lambda must be in [0,1]");
}

double TrainConfig::lr_for_epoch(int epoch) const {
    const int steps = (epoch - 1) / lr_decay_every;
    return learning_rate * std::pow(lr_decay_factor, steps);
}

TrainConfig TrainConfig::defaults_for(Task task) {
    TrainConfig cfg;
    if (task == Task::Classification) {
        cfg.epochs = 30;
        cfg.learning_rate = 0.1;
        cfg.lr_decay_every = 10;
        cfg.loss = LossKind::CrossEntropy;
    } else {
        cfg.epochs = 60;
        cfg.learning_rate = 1e-4;
        cfg.lr_decay_every = 30;
        cfg.loss = LossKind::MeanSquaredError;
    }
    cfg.batch_size = 64;
    cfg.lr_decay_factor = 0.1;
    return cfg;
}

GradientBundle GradientBundle::zeros_like(const LcnParameters& params) {
    GradientBundle g;
    g.layer_weights.resize(params.depth);
    for (int i = 0; i < params.depth; ++i)
        g.layer_weights[i].assign(params.layer_weights[i].size(), 0.0);
    g.layer_biases.assign(params.depth, 0.0);
    if (const auto* fc = std::get_if<FullyConnectedHead>(&params.head)) {
        for (const AffineLayer& l : fc->layers) {
            AffineLayer z;
            z.weight = Matrix(l.weight.rows(), l.weight.cols());
            z.bias.assign(l.bias.size(), 0.0);
            g.head.push_back(std::move(z));
        }
    } else if (const auto* lin = std::get_if<LinearHead>(&params.head)) {
        AffineLayer z;
        z.weight = Matrix(lin->weight.rows(), lin->weight.cols());
        z.bias.assign(lin->bias.size(), 0.0);
        g.head.push_back(std::move(z));
    }
    return g;
}

namespace {

template <class Layers>
void collect_affine(Layers& layers, std::vector<double*>& out) {
    for (auto& l : layers) {
        for (double& v : l.weight.data()) out.push_back(&v);
        for (double& v : l.bias) out.push_back(&v);
    }
}

}  // namespace

std::vector<double*> parameter_pointers(LcnParameters& params) {
    std::vector<double*> out;
    for (int i = 0; i < params.depth; ++i) {
        for (double& v : params.layer_weights[i]) out.push_back(&v);
        out.push_back(&params.layer_biases[i]);
    }
    if (auto* fc = std::get_if<FullyConnectedHead>(&params.head)) {
        collect_affine(fc->layers, out);
    } else if (auto* lin = std::get_if<LinearHead>(&params.head)) {
        for (double& v : lin->weight.data()) out.push_back(&v);
        for (double& v : lin->bias) out.push_back(&v);
    }
    return out;
}

std::vector<double*> gradient_pointers(GradientBundle& grads) {
    std::vector<double*> out;
    for (size_t i = 0; i < grads.layer_weights.size(); ++i) {
        for (double& v : grads.layer_weights[i]) out.push_back(&v);
        out.push_back(&grads.layer_biases[i]);
    }
    collect_affine(grads.head, out);
    return out;
}

size_t parameter_count(const LcnParameters& params) {
    size_t n = 0;
    for (const auto& w : params.layer_weights) n += w.size() + 1;
    if (const auto* fc = std::get_if<FullyConnectedHead>(&params.head)) {
        for (const AffineLayer& l : fc->layers)
            n += l.weight.data().size() + l.bias.size();
    } else if (const auto* lin = std::get_if<LinearHead>(&params.head)) {
        n += lin->weight.data().size() + lin->bias.size();
    }
    return n;
}

DropMasks dropconnect_mask(const LcnParameters& shape, double prob, Rng& rng) {
    if (prob < 0.0 || prob >= 1.0) throw Error("dropconnect probability must be in [0,1)");
    DropMasks m;
    m.scale = 1.0 / (1.0 - prob);
    m.keep.resize(shape.layer_weights.size());
    for (size_t i = 0; i < shape.layer_weights.size(); ++i) {
        m.keep[i].resize(shape.layer_weights[i].size());
        for (auto& bit : m.keep[i]) bit = rng.uniform() < prob ? 0 : 1;
    }
    return m;
}

double loss_value(std::span<const double> pred, std::span<const double> label, LossKind kind) {
    if (pred.size() != label.size() || pred.empty()) throw Error("loss: length mismatch");
    double acc = 0.0;
    for (size_t j = 0; j < pred.size(); ++j) {
        const double z = pred[j];
        if (!std::isfinite(z)) throw DivergenceError("non-finite prediction", -1, -1);
        if (kind == LossKind::CrossEntropy) {
            const double y = label[j];
            acc += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        } else {
            const double d = z - label[j];
            acc += d * d;
        }
    }
    return acc / static_cast<double>(pred.size());
}

namespace {

// One sample's forward state, kept around for the reverse sweep.
struct SampleState {
    std::vector<double> z, a, s;     // per layer
    std::vector<std::uint8_t> bits;  // hard pattern
    Matrix jac;                      // M x D, final rows
    Matrix prefactor;                // M x D, rows before the s_i factor
    std::vector<double> bias_feat;   // B_i
    std::vector<double> feature;     // M(D+1), heads on features only
    std::vector<std::vector<double>> head_in;   // input of each head layer
    std::vector<std::vector<double>> head_pre;  // affine output of each head layer
    std::vector<double> output;
};

double head_act(double z, Activation act) {
    return act == Activation::Relu ? (z > 0.0 ? z : 0.0) : softplus(z);
}

double head_act_deriv(double z, Activation act) {
    return act == Activation::Relu ? (z >= 0.0 ? 1.0 : 0.0) : sigmoid(z);
}

void sample_forward(const LcnParameters& params, const double* x, double lambda,
                    SampleState& st) {
    const int m = params.depth;
    const int d = params.input_dim;
    const bool hard = lambda == 1.0;
    st.z.resize(m);
    st.a.resize(m);
    st.s.resize(m);
    st.bits.resize(m);
    st.jac = Matrix(m, d);
    st.prefactor = Matrix(m, d);
    st.bias_feat.assign(m, 0.0);

    for (int i = 0; i < m; ++i) {
        const std::vector<double>& w = params.layer_weights[i];
        double z = params.layer_biases[i];
        for (int j = 0; j < d; ++j) z += w[j] * x[j];
        for (int k = 0; k < i; ++k) z += w[d + k] * st.a[k];
        st.z[i] = z;
        st.a[i] = annealed_activation(z, lambda);
        st.s[i] = annealed_derivative(z, lambda);
        st.bits[i] = z >= 0.0 ? 1 : 0;

        double* t = st.prefactor.row(i);
        for (int j = 0; j < d; ++j) t[j] = w[j];
        for (int k = 0; k < i; ++k) {
            const double cross = w[d + k];
            const double* prev = st.jac.row(k);
            for (int j = 0; j < d; ++j) t[j] += cross * prev[j];
        }
        double* row = st.jac.row(i);
        for (int j = 0; j < d; ++j) row[j] = st.s[i] * t[j];

        if (hard) {
            double b = params.layer_biases[i];
            for (int k = 0; k < i; ++k) b += w[d + k] * st.bias_feat[k];
            st.bias_feat[i] = st.bits[i] ? b : 0.0;
        } else {
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += row[j] * x[j];
            st.bias_feat[i] = st.a[i] - dot;
        }
    }
}

void head_forward(const LcnParameters& params, const double* x, SampleState& st) {
    const int m = params.depth;
    const int d = params.input_dim;
    if (const auto* fc = std::get_if<FullyConnectedHead>(&params.head)) {
        st.feature.clear();
        st.feature.reserve(static_cast<size_t>(m) * (d + 1));
        for (int i = 0; i < m; ++i) {
            const double* row = st.jac.row(i);
            st.feature.insert(st.feature.end(), row, row + d);
        }
        st.feature.insert(st.feature.end(), st.bias_feat.begin(), st.bias_feat.end());

        const size_t n_layers = fc->layers.size();
        st.head_in.assign(n_layers, {});
        st.head_pre.assign(n_layers, {});
        std::vector<double> cur = st.feature;
        for (size_t l = 0; l < n_layers; ++l) {
            st.head_in[l] = cur;
            st.head_pre[l] = fc->layers[l].apply(cur);
            cur = st.head_pre[l];
            if (l + 1 < n_layers)
                for (double& v : cur) v = head_act(v, fc->hidden_activation);
        }
        st.output = std::move(cur);
    } else {
        const auto& lin = std::get<LinearHead>(params.head);
        std::vector<double> tilde(x, x + d);
        tilde.insert(tilde.end(), st.a.begin(), st.a.end());
        st.head_in.assign(1, std::move(tilde));
        st.output = AffineLayer{lin.weight, lin.bias}.apply(st.head_in[0]);
    }
}

struct OptimizerState {
    OptimizerKind kind;
    AmsGradSettings cfg;
    long step_count = 0;
    std::vector<double> m, v, vhat;

    OptimizerState(const TrainConfig& config, size_t n) : kind(config.optimizer), cfg(config.amsgrad) {
        if (kind == OptimizerKind::AmsGrad) {
            m.assign(n, 0.0);
            v.assign(n, 0.0);
            vhat.assign(n, 0.0);
        }
    }

    void step(const std::vector<double*>& params, const std::vector<double*>& grads, double lr) {
        if (kind == OptimizerKind::Sgd) {
            for (size_t i = 0; i < params.size(); ++i) *params[i] -= lr * *grads[i];
            return;
        }
        ++step_count;
        const double bc1 = 1.0 - std::pow(cfg.beta1, step_count);
        const double bc2 = 1.0 - std::pow(cfg.beta2, step_count);
        for (size_t i = 0; i < params.size(); ++i) {
            const double g = *grads[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            vhat[i] = std::max(vhat[i], v[i]);
            *params[i] -= (lr / bc1) * m[i] / (std::sqrt(vhat[i] / bc2) + cfg.epsilon);
        }
    }
};

}  // namespace

BackwardResult backward(const LcnParameters& params, const BatchView& batch, double lambda,
                        LossKind loss, const DropMasks* masks) {
    if (head_kind(params.head) == HeadKind::Table)
        throw Error("table heads have no gradients; train a fully-connected head instead");
    if (batch.rows.empty()) throw Error("backward: empty batch");
    if (lambda < 0.0 || lambda > 1.0) throw Error("lambda must be in [0,1]");

    // All forward/adjoint arithmetic runs on the masked (effective) weights;
    // the chain back to the raw parameters is the keep*scale factor applied
    // at the end.
    LcnParameters eff = params;
    if (masks) {
        for (int i = 0; i < params.depth; ++i)
            for (size_t j = 0; j < eff.layer_weights[i].size(); ++j)
                eff.layer_weights[i][j] =
                    masks->keep[i][j] ? eff.layer_weights[i][j] * masks->scale : 0.0;
    }

    const int m = params.depth;
    const int d = params.input_dim;
    const int l_out = params.output_dim;
    const bool hard = lambda == 1.0;
    const bool use_features = head_kind(params.head) == HeadKind::FullyConnected;
    const double batch_n = static_cast<double>(batch.rows.size());

    GradientBundle grads = GradientBundle::zeros_like(params);
    SampleState st;
    std::vector<double> total(l_out);
    std::vector<double> ybar(l_out);
    std::vector<double> abar(m), zbar(m), bbar(m);
    Matrix jbar(m, d);
    double loss_sum = 0.0;

    for (size_t pos = 0; pos < batch.rows.size(); ++pos) {
        const int row = batch.rows[pos];
        const double* x = batch.features->row(row);
        const double* y = batch.labels->row(row);

        sample_forward(eff, x, lambda, st);
        // ReLU maps non-finite pre-activations to finite values, so a blown
        // run must be caught here, not at the loss.
        for (double z : st.z)
            if (!std::isfinite(z))
                throw DivergenceError("non-finite pre-activation at batch index " +
                                          std::to_string(pos) + " (row " + std::to_string(row) +
                                          ")",
                                      -1, static_cast<long>(pos));
        head_forward(eff, x, st);

        for (int j = 0; j < l_out; ++j) {
            total[j] = st.output[j] + (batch.offsets ? batch.offsets->at(row, j) : 0.0);
            if (!std::isfinite(total[j]))
                throw DivergenceError("non-finite prediction at batch index " +
                                          std::to_string(pos) + " (row " + std::to_string(row) +
                                          ")",
                                      -1, static_cast<long>(pos));
        }
        loss_sum += loss_value(total, {y, static_cast<size_t>(l_out)}, loss);

        const double norm = 1.0 / (static_cast<double>(l_out) * batch_n);
        for (int j = 0; j < l_out; ++j) {
            if (loss == LossKind::CrossEntropy)
                ybar[j] = (sigmoid(total[j]) - y[j]) * norm;
            else
                ybar[j] = 2.0 * (total[j] - y[j]) * norm;
        }

        std::fill(abar.begin(), abar.end(), 0.0);
        std::fill(zbar.begin(), zbar.end(), 0.0);
        std::fill(bbar.begin(), bbar.end(), 0.0);
        std::fill(jbar.data().begin(), jbar.data().end(), 0.0);

        if (use_features) {
            const auto& fc = std::get<FullyConnectedHead>(eff.head);
            std::vector<double> obar = ybar;
            std::vector<double> ibar;
            for (int l = static_cast<int>(fc.layers.size()) - 1; l >= 0; --l) {
                const AffineLayer& layer = fc.layers[l];
                AffineLayer& glayer = grads.head[l];
                const std::vector<double>& in = st.head_in[l];
                ibar.assign(in.size(), 0.0);
                for (int o = 0; o < layer.weight.rows(); ++o) {
                    const double ob = obar[o];
                    glayer.bias[o] += ob;
                    const double* w = layer.weight.row(o);
                    double* gw = glayer.weight.row(o);
                    for (size_t i = 0; i < in.size(); ++i) {
                        gw[i] += ob * in[i];
                        ibar[i] += ob * w[i];
                    }
                }
                if (l > 0) {
                    obar.assign(ibar.size(), 0.0);
                    for (size_t i = 0; i < ibar.size(); ++i)
                        obar[i] =
                            ibar[i] * head_act_deriv(st.head_pre[l - 1][i], fc.hidden_activation);
                }
            }
            // ibar now holds the feature adjoint; split into rows and biases.
            for (int i = 0; i < m; ++i) {
                double* jb = jbar.row(i);
                for (int j = 0; j < d; ++j) jb[j] = ibar[static_cast<size_t>(i) * d + j];
                bbar[i] = ibar[static_cast<size_t>(m) * d + i];
            }
        } else {
            const auto& lin = std::get<LinearHead>(eff.head);
            AffineLayer& glayer = grads.head[0];
            const std::vector<double>& in = st.head_in[0];
            for (int o = 0; o < l_out; ++o) {
                glayer.bias[o] += ybar[o];
                const double* w = lin.weight.row(o);
                double* gw = glayer.weight.row(o);
                for (size_t i = 0; i < in.size(); ++i) gw[i] += ybar[o] * in[i];
                for (int i = 0; i < m; ++i) abar[i] += ybar[o] * w[d + i];
            }
        }

        for (int i = m - 1; i >= 0; --i) {
            const std::vector<double>& w = eff.layer_weights[i];
            std::vector<double>& gw = grads.layer_weights[i];

            if (use_features) {
                // Bias-feature path. Mirrors the two forward formulas.
                if (hard) {
                    const double c = bbar[i] * (st.bits[i] ? 1.0 : 0.0);
                    grads.layer_biases[i] += c;
                    for (int k = 0; k < i; ++k) {
                        gw[d + k] += c * st.bias_feat[k];
                        bbar[k] += c * w[d + k];
                    }
                } else {
                    abar[i] += bbar[i];
                    double* jb = jbar.row(i);
                    for (int j = 0; j < d; ++j) jb[j] -= bbar[i] * x[j];
                }

                // Jacobian path: J_i = s_i * t_i.
                const double* t = st.prefactor.row(i);
                double* jb = jbar.row(i);
                double sbar = 0.0;
                for (int j = 0; j < d; ++j) sbar += jb[j] * t[j];
                for (int j = 0; j < d; ++j) gw[j] += st.s[i] * jb[j];
                for (int k = 0; k < i; ++k) {
                    const double* jk = st.jac.row(k);
                    double* jkbar = jbar.row(k);
                    double dot = 0.0;
                    const double cross = w[d + k];
                    for (int j = 0; j < d; ++j) {
                        const double tb = st.s[i] * jb[j];
                        dot += tb * jk[j];
                        jkbar[j] += cross * tb;
                    }
                    gw[d + k] += dot;
                }
                // The hard indicator inside s_i is locally constant; only the
                // softplus share of the derivative varies with z.
                const double sg = sigmoid(st.z[i]);
                zbar[i] += sbar * (1.0 - lambda) * sg * (1.0 - sg);
            }

            zbar[i] += abar[i] * st.s[i];

            const double zb = zbar[i];
            grads.layer_biases[i] += zb;
            for (int j = 0; j < d; ++j) gw[j] += zb * x[j];
            for (int k = 0; k < i; ++k) {
                gw[d + k] += zb * st.a[k];
                abar[k] += zb * w[d + k];
            }
        }
    }

    if (masks) {
        for (int i = 0; i < m; ++i)
            for (size_t j = 0; j < grads.layer_weights[i].size(); ++j)
                grads.layer_weights[i][j] =
                    masks->keep[i][j] ? grads.layer_weights[i][j] * masks->scale : 0.0;
    }

    BackwardResult result;
    result.loss = loss_sum / batch_n;
    if (!std::isfinite(result.loss)) throw DivergenceError("non-finite batch loss", -1, -1);
    result.grads = std::move(grads);
    return result;
}

double dataset_loss(const LcnParameters& params, const BatchView& batch, double lambda,
                    LossKind loss) {
    if (batch.rows.empty()) throw Error("dataset_loss: no rows");
    const int l_out = params.output_dim;
    std::vector<double> total(l_out);
    double sum = 0.0;
    for (int row : batch.rows) {
        const std::vector<double> out =
            predict(params, batch.features->row_span(row), lambda);
        for (int j = 0; j < l_out; ++j)
            total[j] = out[j] + (batch.offsets ? batch.offsets->at(row, j) : 0.0);
        sum += loss_value(total, {batch.labels->row(row), static_cast<size_t>(l_out)}, loss);
    }
    return sum / static_cast<double>(batch.rows.size());
}

Matrix predict_rows(const LcnParameters& params, const Matrix& features,
                    std::span<const int> rows, double lambda, int threads) {
    Matrix out(static_cast<int>(rows.size()), params.output_dim);
    auto work = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const std::vector<double> p = predict(params, features.row_span(rows[i]), lambda);
            std::copy(p.begin(), p.end(), out.row(static_cast<int>(i)));
        }
    };
    if (threads <= 1 || rows.size() < 2) {
        work(0, rows.size());
        return out;
    }
    const size_t n_threads = std::min<size_t>(threads, rows.size());
    std::vector<std::thread> pool;
    const size_t chunk = (rows.size() + n_threads - 1) / n_threads;
    for (size_t t = 0; t < n_threads; ++t) {
        const size_t begin = t * chunk;
        const size_t end = std::min(rows.size(), begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(work, begin, end);
    }
    for (std::thread& th : pool) th.join();
    return out;
}

namespace {

double validation_metric(const LcnParameters& params, const Dataset& data, const Matrix* offsets,
                         std::span<const int> rows, double lambda) {
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    Matrix preds = predict_rows(params, data.features, rows, lambda);
    if (offsets) {
        for (size_t i = 0; i < rows.size(); ++i)
            for (int j = 0; j < preds.cols(); ++j) preds.at(static_cast<int>(i), j) += offsets->at(rows[i], j);
    }
    if (data.task == Task::Regression) {
        std::vector<double> p, t;
        p.reserve(rows.size() * preds.cols());
        t.reserve(rows.size() * preds.cols());
        for (size_t i = 0; i < rows.size(); ++i)
            for (int j = 0; j < preds.cols(); ++j) {
                p.push_back(preds.at(static_cast<int>(i), j));
                t.push_back(data.labels.at(rows[i], j));
            }
        return rmse(p, t);
    }
    double sum = 0.0;
    int counted = 0;
    for (int j = 0; j < preds.cols(); ++j) {
        std::vector<double> scores(rows.size()), labels(rows.size());
        for (size_t i = 0; i < rows.size(); ++i) {
            scores[i] = preds.at(static_cast<int>(i), j);
            labels[i] = data.labels.at(rows[i], j);
        }
        try {
            sum += auc(scores, labels);
            ++counted;
        } catch (const UndefinedMetric&) {
        }
    }
    if (counted == 0) return std::numeric_limits<double>::quiet_NaN();
    return sum / counted;
}

}  // namespace

TrainResult train_with_options(LcnParameters params, const Dataset& data,
                               const TrainConfig& config, const TrainOptions& options) {
    config.validate();
    params.validate();
    data.validate();
    if (head_kind(params.head) == HeadKind::Table)
        throw Error("table heads have no gradients; train a fully-connected head and convert");
    if (params.input_dim != data.input_dim())
        throw Error("model input dim does not match the dataset");
    if (params.output_dim != data.label_dim())
        throw Error("model output dim does not match the label count");

    std::vector<int> train_rows = data.rows_in(Split::Train);
    const std::vector<int> val_rows = data.rows_in(Split::Val);
    if (train_rows.empty()) throw DataError("train split is empty");

    Rng rng(config.seed);
    const std::vector<double*> param_ptrs = parameter_pointers(params);
    OptimizerState optimizer(config, param_ptrs.size());

    LcnParameters best;
    double best_loss = std::numeric_limits<double>::infinity();
    auto consider_checkpoint = [&]() {
        if (!options.keep_best_by_train_loss) return;
        const std::vector<int> ordered = data.rows_in(Split::Train);
        const double full = dataset_loss(
            params, BatchView{&data.features, &data.labels, options.offsets, ordered},
            options.checkpoint_lambda, config.loss);
        if (full < best_loss) {
            best_loss = full;
            best = params;
        }
    };
    consider_checkpoint();

    TrainResult result;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const double lambda = config.anneal.lambda_for_epoch(epoch, config.epochs);
        const double lr = config.lr_for_epoch(epoch);
        rng.shuffle(train_rows);

        double loss_sum = 0.0;
        long seen = 0;
        const size_t n = train_rows.size();
        for (size_t start = 0, batch_idx = 0; start < n; start += config.batch_size, ++batch_idx) {
            const size_t len = std::min<size_t>(config.batch_size, n - start);
            const std::span<const int> chunk(train_rows.data() + start, len);
            DropMasks masks;
            const bool use_masks = config.dropconnect_prob > 0.0;
            if (use_masks) masks = dropconnect_mask(params, config.dropconnect_prob, rng);

            BackwardResult step;
            try {
                step = backward(params,
                                BatchView{&data.features, &data.labels, options.offsets, chunk},
                                lambda, config.loss, use_masks ? &masks : nullptr);
            } catch (const DivergenceError& e) {
                throw DivergenceError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                          ", batch " + std::to_string(batch_idx) + ")",
                                      epoch, static_cast<long>(batch_idx));
            }
            std::vector<double*> grad_ptrs = gradient_pointers(step.grads);
            optimizer.step(param_ptrs, grad_ptrs, lr);
            loss_sum += step.loss * static_cast<double>(len);
            seen += static_cast<long>(len);
        }

        EpochLog log;
        log.epoch = epoch;
        log.lambda = lambda;
        log.lr = lr;
        log.train_loss = loss_sum / static_cast<double>(seen);
        log.val_metric = validation_metric(params, data, options.offsets, val_rows, lambda);
        result.log.push_back(log);
        consider_checkpoint();
    }

    result.params = options.keep_best_by_train_loss ? std::move(best) : std::move(params);
    return result;
}

void write_metrics_csv(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.precision(17);
    out << "epoch,lambda,lr,train_loss,val_metric\n";
    for (const EpochLog& e : log)
        out << e.epoch << ',' << e.lambda << ',' << e.lr << ',' << e.train_loss << ','
            << e.val_metric << '\n';
}

}  // namespace lcn
