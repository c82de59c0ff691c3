#include "sleepstack/nncore.hpp"

#include "sleepstack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace sleepstack {

const char* activation_name(Activation a) {
    switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Linear: return "linear";
    case Activation::Softmax: return "softmax";
    case Activation::Lstm: return "lstm";
    }
    return "?";
}

DenseNet make_dense_net(const std::vector<int>& dims, Activation hidden, Activation output,
                        double dropout_rate) {
    if (dims.size() < 2)
        throw Error(ErrorCode::DimensionMismatch, "net needs at least input and output dims");
    DenseNet net;
    net.dropout_rate = dropout_rate;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        if (dims[i] <= 0 || dims[i + 1] <= 0)
            throw Error(ErrorCode::DimensionMismatch, "layer dims must be positive");
        DenseLayer layer;
        layer.spec.in_dim = dims[i];
        layer.spec.out_dim = dims[i + 1];
        layer.spec.activation = (i + 2 == dims.size()) ? output : hidden;
        layer.w.assign(static_cast<std::size_t>(dims[i]) * dims[i + 1], 0.0);
        layer.b.assign(static_cast<std::size_t>(dims[i + 1]), 0.0);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

void init_weights(DenseNet& net, Rng& rng) {
    for (auto& layer : net.layers) {
        double limit = std::sqrt(6.0 / (layer.spec.in_dim + layer.spec.out_dim));
        for (auto& v : layer.w) v = rng.uniform(-limit, limit);
        std::fill(layer.b.begin(), layer.b.end(), 0.0);
    }
}

// Four independent accumulators: fixed summation order (so results are
// reproducible everywhere) but enough ILP to keep one core busy.
static inline double dot4(const double* a, const double* b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    for (; j < n; ++j) s0 += a[j] * b[j];
    return (s0 + s1) + (s2 + s3);
}

static inline void softmax_inplace(double* z, int n) {
    double mx = z[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, z[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        z[i] = std::exp(z[i] - mx);
        sum += z[i];
    }
    for (int i = 0; i < n; ++i) z[i] /= sum;
}

static inline void affine_eval(const DenseLayer& layer, const double* x, double* y) {
    int in = layer.spec.in_dim;
    int out = layer.spec.out_dim;
    const double* w = layer.w.data();
    for (int i = 0; i < out; ++i) y[i] = layer.b[i] + dot4(w + static_cast<std::size_t>(i) * in, x, in);
}

static inline void activate_inplace(Activation act, double* y, int n) {
    switch (act) {
    case Activation::Relu:
        for (int i = 0; i < n; ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
        break;
    case Activation::Tanh:
        for (int i = 0; i < n; ++i) y[i] = std::tanh(y[i]);
        break;
    case Activation::Linear: break;
    case Activation::Softmax: softmax_inplace(y, n); break;
    case Activation::Lstm:
        throw Error(ErrorCode::BadModel, "lstm blocks need the lstm evaluator");
    }
}

void dense_layer_eval(const DenseLayer& layer, const double* x, double* y) {
    affine_eval(layer, x, y);
    activate_inplace(layer.spec.activation, y, layer.spec.out_dim);
}

std::vector<double> forward(const DenseNet& net, std::span<const double> x, RunMode mode, Rng* rng) {
    if (net.layers.empty()) throw Error(ErrorCode::BadModel, "empty net");
    if (static_cast<int>(x.size()) != net.input_dim())
        throw Error(ErrorCode::DimensionMismatch,
                    "input has " + std::to_string(x.size()) + " values, net expects " +
                        std::to_string(net.input_dim()));
    bool drop = mode == RunMode::Train && net.dropout_rate > 0.0 && net.layers.size() > 1;
    if (drop && rng == nullptr)
        throw Error(ErrorCode::UsageError, "train-mode forward with dropout needs an rng");

    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& layer = net.layers[k];
        next.assign(static_cast<std::size_t>(layer.spec.out_dim), 0.0);
        dense_layer_eval(layer, cur.data(), next.data());
        if (drop && k + 1 < net.layers.size()) {
            double keep = 1.0 - net.dropout_rate;
            for (auto& v : next) v = rng->uniform() < net.dropout_rate ? 0.0 : v / keep;
        }
        cur.swap(next);
    }
    return cur;
}

std::size_t param_count(const DenseNet& net) {
    std::size_t n = 0;
    for (const auto& layer : net.layers) n += layer.w.size() + layer.b.size();
    return n;
}

std::size_t activation_scratch_values(const DenseNet& net) {
    std::size_t best = 0;
    for (const auto& layer : net.layers)
        best = std::max(best, static_cast<std::size_t>(layer.spec.in_dim) + layer.spec.out_dim);
    return best;
}

std::size_t ram_bytes(const DenseNet& net, std::size_t bytes_per_param) {
    return (param_count(net) + activation_scratch_values(net)) * bytes_per_param;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::UsageError, "lr must be positive");
    if (batch_size < 1) throw Error(ErrorCode::UsageError, "batch size must be at least 1");
    if (max_epochs < 1) throw Error(ErrorCode::UsageError, "max epochs must be at least 1");
    if (patience < 1) throw Error(ErrorCode::UsageError, "patience must be at least 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw Error(ErrorCode::UsageError, "validation fraction must be in [0, 1)");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0) || !(eps > 0.0))
        throw Error(ErrorCode::UsageError, "bad adam constants");
}

bool EarlyStopper::observe(double val_loss) {
    ++epoch_;
    if (best_epoch_ == 0 || val_loss < best_loss_) {
        best_loss_ = val_loss;
        best_epoch_ = epoch_;
        bad_epochs_ = 0;
        return false;
    }
    ++bad_epochs_;
    return bad_epochs_ >= patience_;
}

std::vector<double> inverse_frequency_weights(const std::vector<int>& y, int class_count) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(class_count), 0);
    for (int c : y) {
        if (c < 0 || c >= class_count)
            throw Error(ErrorCode::DimensionMismatch, "label " + std::to_string(c) + " out of range");
        ++counts[static_cast<std::size_t>(c)];
    }
    std::vector<double> w(static_cast<std::size_t>(class_count), 0.0);
    for (int c = 0; c < class_count; ++c)
        if (counts[c] > 0)
            w[c] = static_cast<double>(y.size()) / (static_cast<double>(class_count) * counts[c]);
    return w;
}

namespace {

// Scratch for batched forward/backward. One instance per training run, sized
// for the largest batch; no allocation inside the batch loop.
struct Workspace {
    const DenseNet* net = nullptr;
    int cap = 0;
    std::vector<std::vector<double>> act;   // act[0] = gathered inputs, act[k+1] = layer k output
    std::vector<std::vector<double>> preact; // pre-activation of each layer (post-softmax for last)
    std::vector<std::vector<double>> mask;  // dropout masks per hidden layer
    std::vector<std::vector<double>> delta; // dL/dz per layer
    std::vector<double> logits;             // pre-softmax copy of the last layer, cap x out

    Workspace(const DenseNet& n, int batch_cap) : net(&n), cap(batch_cap) {
        act.resize(n.layers.size() + 1);
        act[0].resize(static_cast<std::size_t>(cap) * n.input_dim());
        preact.resize(n.layers.size());
        mask.resize(n.layers.size());
        delta.resize(n.layers.size());
        for (std::size_t k = 0; k < n.layers.size(); ++k) {
            std::size_t sz = static_cast<std::size_t>(cap) * n.layers[k].spec.out_dim;
            act[k + 1].resize(sz);
            preact[k].resize(sz);
            mask[k].resize(sz);
            delta[k].resize(sz);
        }
        logits.resize(static_cast<std::size_t>(cap) * n.output_dim());
    }

    // Forward the gathered rows in act[0]; returns weighted mean CE loss.
    // Dropout only when rng != nullptr. sample_w holds one weight per row.
    double run_forward(int bsz, const std::vector<int>& ybatch, const std::vector<double>& sample_w,
                       double weight_norm, Rng* rng) {
        const auto& layers = net->layers;
        int last = static_cast<int>(layers.size()) - 1;
        if (layers[last].spec.activation != Activation::Softmax)
            throw Error(ErrorCode::BadModel, "training requires a softmax output layer");
        double keep = 1.0 - net->dropout_rate;
        for (int k = 0; k <= last; ++k) {
            const auto& layer = layers[k];
            int out = layer.spec.out_dim;
            for (int r = 0; r < bsz; ++r) {
                const double* x = act[k].data() + static_cast<std::size_t>(r) * layer.spec.in_dim;
                double* z = preact[k].data() + static_cast<std::size_t>(r) * out;
                affine_eval(layer, x, z);
            }
            double* z = preact[k].data();
            double* a = act[k + 1].data();
            std::size_t total = static_cast<std::size_t>(bsz) * out;
            switch (layer.spec.activation) {
            case Activation::Relu:
                for (std::size_t i = 0; i < total; ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
                break;
            case Activation::Tanh:
                for (std::size_t i = 0; i < total; ++i) a[i] = std::tanh(z[i]);
                break;
            case Activation::Linear:
                std::copy(z, z + total, a);
                break;
            case Activation::Softmax:
                std::copy(z, z + total, logits.data());
                for (int r = 0; r < bsz; ++r) {
                    double* row = a + static_cast<std::size_t>(r) * out;
                    std::copy(z + static_cast<std::size_t>(r) * out,
                              z + static_cast<std::size_t>(r + 1) * out, row);
                    softmax_inplace(row, out);
                }
                break;
            case Activation::Lstm:
                throw Error(ErrorCode::BadModel, "lstm blocks need the lstm evaluator");
            }
            if (k < last && rng != nullptr && net->dropout_rate > 0.0) {
                double* m = mask[k].data();
                for (std::size_t i = 0; i < total; ++i) {
                    m[i] = rng->uniform() < net->dropout_rate ? 0.0 : 1.0 / keep;
                    a[i] *= m[i];
                }
            } else {
                std::fill(mask[k].begin(), mask[k].begin() + total, 1.0);
            }
        }
        // loss from logits via log-sum-exp, immune to softmax underflow
        int out = net->output_dim();
        double loss = 0.0;
        for (int r = 0; r < bsz; ++r) {
            const double* z = logits.data() + static_cast<std::size_t>(r) * out;
            double mx = z[0];
            for (int i = 1; i < out; ++i) mx = std::max(mx, z[i]);
            double sum = 0.0;
            for (int i = 0; i < out; ++i) sum += std::exp(z[i] - mx);
            loss += sample_w[r] * (std::log(sum) + mx - z[ybatch[r]]);
        }
        return loss / weight_norm;
    }

    // Accumulate parameter gradients into g (already zeroed by the caller).
    void run_backward(int bsz, const std::vector<int>& ybatch, const std::vector<double>& sample_w,
                      double weight_norm, Gradients& g) {
        const auto& layers = net->layers;
        int last = static_cast<int>(layers.size()) - 1;
        int out = net->output_dim();
        for (int r = 0; r < bsz; ++r) {
            const double* p = act[last + 1].data() + static_cast<std::size_t>(r) * out;
            double* d = delta[last].data() + static_cast<std::size_t>(r) * out;
            double scale = sample_w[r] / weight_norm;
            for (int i = 0; i < out; ++i) d[i] = (p[i] - (i == ybatch[r] ? 1.0 : 0.0)) * scale;
        }
        for (int k = last; k >= 0; --k) {
            const auto& layer = layers[k];
            int in = layer.spec.in_dim;
            int on = layer.spec.out_dim;
            double* gw = g.w[static_cast<std::size_t>(k)].data();
            double* gb = g.b[static_cast<std::size_t>(k)].data();
            for (int r = 0; r < bsz; ++r) {
                const double* a = act[k].data() + static_cast<std::size_t>(r) * in;
                const double* d = delta[k].data() + static_cast<std::size_t>(r) * on;
                for (int i = 0; i < on; ++i) {
                    gb[i] += d[i];
                    double di = d[i];
                    double* gwrow = gw + static_cast<std::size_t>(i) * in;
                    for (int j = 0; j < in; ++j) gwrow[j] += di * a[j];
                }
            }
            if (k == 0) break;
            const auto& prev = layers[k - 1];
            int pn = prev.spec.out_dim;
            const double* w = layer.w.data();
            for (int r = 0; r < bsz; ++r) {
                const double* d = delta[k].data() + static_cast<std::size_t>(r) * on;
                double* dp = delta[k - 1].data() + static_cast<std::size_t>(r) * pn;
                std::fill(dp, dp + pn, 0.0);
                for (int i = 0; i < on; ++i) {
                    double di = d[i];
                    const double* wrow = w + static_cast<std::size_t>(i) * in;
                    for (int j = 0; j < pn; ++j) dp[j] += wrow[j] * di;
                }
                const double* m = mask[k - 1].data() + static_cast<std::size_t>(r) * pn;
                const double* z = preact[k - 1].data() + static_cast<std::size_t>(r) * pn;
                switch (prev.spec.activation) {
                case Activation::Relu:
                    for (int j = 0; j < pn; ++j) dp[j] *= m[j] * (z[j] > 0.0 ? 1.0 : 0.0);
                    break;
                case Activation::Tanh:
                    for (int j = 0; j < pn; ++j) {
                        double t = std::tanh(z[j]);
                        dp[j] *= m[j] * (1.0 - t * t);
                    }
                    break;
                case Activation::Linear:
                    for (int j = 0; j < pn; ++j) dp[j] *= m[j];
                    break;
                default:
                    throw Error(ErrorCode::BadModel, "softmax only supported as output layer");
                }
            }
        }
    }
};

Gradients zero_gradients(const DenseNet& net) {
    Gradients g;
    for (const auto& layer : net.layers) {
        g.w.emplace_back(layer.w.size(), 0.0);
        g.b.emplace_back(layer.b.size(), 0.0);
    }
    return g;
}

void gather_rows(const Matrix& X, const std::vector<int>& idx, int from, int bsz, double* dst) {
    int cols = static_cast<int>(X.cols);
    for (int r = 0; r < bsz; ++r)
        std::memcpy(dst + static_cast<std::size_t>(r) * cols, X.row(static_cast<std::size_t>(idx[from + r])),
                    sizeof(double) * static_cast<std::size_t>(cols));
}

} // namespace

double loss_and_gradients(const DenseNet& net, const Matrix& X, const std::vector<int>& y,
                          const std::vector<double>& class_weights, Gradients* grads) {
    if (X.rows == 0) throw Error(ErrorCode::EmptyDataset, "no rows");
    if (X.rows != y.size())
        throw Error(ErrorCode::DimensionMismatch, "X and y row counts differ");
    if (static_cast<int>(X.cols) != net.input_dim())
        throw Error(ErrorCode::DimensionMismatch, "feature dim does not match net input");
    int n = static_cast<int>(X.rows);
    int classes = net.output_dim();
    std::vector<double> cw = class_weights;
    if (cw.empty()) cw.assign(static_cast<std::size_t>(classes), 1.0);
    if (static_cast<int>(cw.size()) != classes)
        throw Error(ErrorCode::DimensionMismatch, "class weight count does not match outputs");

    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::vector<double> sw(static_cast<std::size_t>(n));
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
        if (y[static_cast<std::size_t>(i)] < 0 || y[static_cast<std::size_t>(i)] >= classes)
            throw Error(ErrorCode::DimensionMismatch, "label out of range");
        sw[static_cast<std::size_t>(i)] = cw[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])];
        norm += sw[static_cast<std::size_t>(i)];
    }
    if (norm <= 0.0) throw Error(ErrorCode::EmptyDataset, "all sample weights are zero");

    Workspace ws(net, n);
    gather_rows(X, idx, 0, n, ws.act[0].data());
    double loss = ws.run_forward(n, y, sw, norm, nullptr);
    if (grads != nullptr) {
        *grads = zero_gradients(net);
        ws.run_backward(n, y, sw, norm, *grads);
    }
    return loss;
}

namespace {

struct AdamState {
    std::vector<std::vector<double>> mw, vw, mb, vb;
    long t = 0;

    explicit AdamState(const DenseNet& net) {
        for (const auto& layer : net.layers) {
            mw.emplace_back(layer.w.size(), 0.0);
            vw.emplace_back(layer.w.size(), 0.0);
            mb.emplace_back(layer.b.size(), 0.0);
            vb.emplace_back(layer.b.size(), 0.0);
        }
    }

    void step(DenseNet& net, const Gradients& g, const TrainConfig& cfg) {
        ++t;
        double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (std::size_t k = 0; k < net.layers.size(); ++k) {
            auto upd = [&](std::vector<double>& p, const std::vector<double>& gr,
                           std::vector<double>& m, std::vector<double>& v) {
                for (std::size_t i = 0; i < p.size(); ++i) {
                    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gr[i];
                    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gr[i] * gr[i];
                    p[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
                }
            };
            upd(net.layers[k].w, g.w[k], mw[k], vw[k]);
            upd(net.layers[k].b, g.b[k], mb[k], vb[k]);
        }
    }
};

std::vector<std::vector<double>> snapshot(const DenseNet& net) {
    std::vector<std::vector<double>> s;
    for (const auto& layer : net.layers) {
        s.push_back(layer.w);
        s.push_back(layer.b);
    }
    return s;
}

void restore(DenseNet& net, const std::vector<std::vector<double>>& s) {
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        net.layers[k].w = s[2 * k];
        net.layers[k].b = s[2 * k + 1];
    }
}

} // namespace

TrainHistory train(DenseNet& net, const Matrix& X, const std::vector<int>& y, const TrainConfig& cfg) {
    cfg.validate();
    if (X.rows == 0) throw Error(ErrorCode::EmptyDataset, "no training rows");
    if (X.rows != y.size()) throw Error(ErrorCode::DimensionMismatch, "X and y row counts differ");
    if (static_cast<int>(X.cols) != net.input_dim())
        throw Error(ErrorCode::DimensionMismatch, "feature dim does not match net input");
    int classes = net.output_dim();
    for (int c : y)
        if (c < 0 || c >= classes) throw Error(ErrorCode::DimensionMismatch, "label out of range");

    Rng rng(derive_seed(cfg.seed, "train"));
    init_weights(net, rng);

    // stratified split: shuffle within each class, tail goes to validation
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < y.size(); ++i)
        by_class[static_cast<std::size_t>(y[i])].push_back(static_cast<int>(i));
    std::vector<int> train_idx, val_idx;
    for (auto& grp : by_class) {
        rng.shuffle(grp);
        std::size_t nv = 0;
        if (cfg.validation_fraction > 0.0 && grp.size() >= 2) {
            nv = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(grp.size()) + 0.5));
            nv = std::min(nv, grp.size() - 1);
            if (nv == 0) nv = 1;
        }
        for (std::size_t i = 0; i < grp.size() - nv; ++i) train_idx.push_back(grp[i]);
        for (std::size_t i = grp.size() - nv; i < grp.size(); ++i) val_idx.push_back(grp[i]);
    }
    if (train_idx.empty()) throw Error(ErrorCode::EmptyDataset, "validation split left no training rows");
    std::sort(val_idx.begin(), val_idx.end());

    std::vector<double> cw(static_cast<std::size_t>(classes), 1.0);
    if (cfg.balanced_class_weights) {
        std::vector<int> ytrain;
        ytrain.reserve(train_idx.size());
        for (int i : train_idx) ytrain.push_back(y[static_cast<std::size_t>(i)]);
        cw = inverse_frequency_weights(ytrain, classes);
    }

    int bcap = std::max(cfg.batch_size, static_cast<int>(val_idx.size()));
    bcap = std::max(bcap, 1);
    Workspace ws(net, bcap);
    Gradients g = zero_gradients(net);
    AdamState adam(net);
    EarlyStopper stopper(cfg.patience);
    TrainHistory hist;
    bool has_val = !val_idx.empty();
    auto best = snapshot(net);

    std::vector<int> ybatch(static_cast<std::size_t>(bcap));
    std::vector<double> sbatch(static_cast<std::size_t>(bcap));

    auto eval_val = [&]() {
        gather_rows(X, val_idx, 0, static_cast<int>(val_idx.size()), ws.act[0].data());
        double norm = 0.0;
        for (std::size_t i = 0; i < val_idx.size(); ++i) {
            ybatch[i] = y[static_cast<std::size_t>(val_idx[i])];
            sbatch[i] = cw[static_cast<std::size_t>(ybatch[i])];
            norm += sbatch[i];
        }
        if (norm <= 0.0) norm = 1.0;
        return ws.run_forward(static_cast<int>(val_idx.size()), ybatch, sbatch, norm, nullptr);
    };

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(train_idx);
        double epoch_loss = 0.0;
        double epoch_weight = 0.0;
        for (std::size_t off = 0; off < train_idx.size(); off += static_cast<std::size_t>(cfg.batch_size)) {
            int bsz = static_cast<int>(std::min<std::size_t>(cfg.batch_size, train_idx.size() - off));
            gather_rows(X, train_idx, static_cast<int>(off), bsz, ws.act[0].data());
            double norm = 0.0;
            for (int r = 0; r < bsz; ++r) {
                ybatch[static_cast<std::size_t>(r)] = y[static_cast<std::size_t>(train_idx[off + static_cast<std::size_t>(r)])];
                sbatch[static_cast<std::size_t>(r)] = cw[static_cast<std::size_t>(ybatch[static_cast<std::size_t>(r)])];
                norm += sbatch[static_cast<std::size_t>(r)];
            }
            if (norm <= 0.0) continue;
            double loss = ws.run_forward(bsz, ybatch, sbatch, norm, &rng);
            if (!std::isfinite(loss))
                throw Error(ErrorCode::NonFiniteLoss,
                            "loss became non-finite at epoch " + std::to_string(epoch));
            for (auto& v : g.w) std::fill(v.begin(), v.end(), 0.0);
            for (auto& v : g.b) std::fill(v.begin(), v.end(), 0.0);
            ws.run_backward(bsz, ybatch, sbatch, norm, g);
            adam.step(net, g, cfg);
            epoch_loss += loss * norm;
            epoch_weight += norm;
        }
        hist.train_loss.push_back(epoch_weight > 0.0 ? epoch_loss / epoch_weight : 0.0);
        hist.epochs_run = epoch;
        if (has_val) {
            double vl = eval_val();
            if (!std::isfinite(vl))
                throw Error(ErrorCode::NonFiniteLoss,
                            "validation loss became non-finite at epoch " + std::to_string(epoch));
            hist.val_loss.push_back(vl);
            bool stop = stopper.observe(vl);
            if (stopper.best_epoch() == epoch) best = snapshot(net);
            if (stop) {
                hist.early_stopped = true;
                break;
            }
        }
    }
    if (has_val) {
        restore(net, best);
        hist.best_epoch = stopper.best_epoch();
        hist.best_val_loss = stopper.best_loss();
    }
    return hist;
}

std::string encode_weight_records(const std::vector<WeightRecord>& records) {
    ByteWriter w;
    w.raw("SSTK", 4);
    w.u16(1);
    w.u16(static_cast<std::uint16_t>(records.size()));
    for (const auto& rec : records) {
        w.u16(rec.in_dim);
        w.u16(rec.out_dim);
        w.u8(rec.activation);
        for (float v : rec.w) w.f32(v);
        for (float v : rec.b) w.f32(v);
    }
    w.u32(crc32(w.bytes.data(), w.bytes.size()));
    return std::move(w.bytes);
}

std::vector<WeightRecord> decode_weight_records(const std::string& bytes) {
    if (bytes.size() < 12) throw Error(ErrorCode::ChecksumMismatch, "weight blob truncated");
    std::string body = bytes.substr(0, bytes.size() - 4);
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[bytes.size() - 4 + static_cast<std::size_t>(i)]))
                  << (8 * i);
    if (stored != crc32(body.data(), body.size()))
        throw Error(ErrorCode::ChecksumMismatch, "weight blob checksum mismatch");

    ByteReader r(body);
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::memcmp(magic, "SSTK", 4) != 0) throw Error(ErrorCode::BadMagic, "not a weight blob");
    std::uint16_t version = r.u16();
    if (version != 1)
        throw Error(ErrorCode::BadMagic, "unsupported weight format version " + std::to_string(version));
    std::uint16_t count = r.u16();
    std::vector<WeightRecord> records;
    records.reserve(count);
    for (std::uint16_t k = 0; k < count; ++k) {
        WeightRecord rec;
        rec.in_dim = r.u16();
        rec.out_dim = r.u16();
        rec.activation = r.u8();
        if (rec.in_dim == 0 || rec.out_dim == 0)
            throw Error(ErrorCode::TopologyMismatch, "layer with zero dimension");
        std::size_t nw = static_cast<std::size_t>(rec.in_dim) * rec.out_dim;
        rec.w.resize(nw);
        for (std::size_t i = 0; i < nw; ++i) rec.w[i] = r.f32();
        rec.b.resize(rec.out_dim);
        for (std::size_t i = 0; i < rec.out_dim; ++i) rec.b[i] = r.f32();
        records.push_back(std::move(rec));
    }
    if (!r.eof()) throw Error(ErrorCode::ChecksumMismatch, "trailing bytes in weight blob");
    return records;
}

std::string net_to_bytes(const DenseNet& net) {
    std::vector<WeightRecord> records;
    for (const auto& layer : net.layers) {
        WeightRecord rec;
        rec.in_dim = static_cast<std::uint16_t>(layer.spec.in_dim);
        rec.out_dim = static_cast<std::uint16_t>(layer.spec.out_dim);
        rec.activation = static_cast<std::uint8_t>(layer.spec.activation);
        rec.w.assign(layer.w.begin(), layer.w.end());
        rec.b.assign(layer.b.begin(), layer.b.end());
        records.push_back(std::move(rec));
    }
    return encode_weight_records(records);
}

DenseNet net_from_bytes(const std::string& bytes) {
    auto records = decode_weight_records(bytes);
    if (records.empty()) throw Error(ErrorCode::TopologyMismatch, "weight blob has no layers");
    DenseNet net;
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& rec = records[k];
        if (rec.activation > 3)
            throw Error(ErrorCode::TopologyMismatch, "lstm blocks need the lstm loader");
        if (k > 0 && rec.in_dim != records[k - 1].out_dim)
            throw Error(ErrorCode::TopologyMismatch,
                        "layer " + std::to_string(k) + " input " + std::to_string(rec.in_dim) +
                            " does not match previous output " + std::to_string(records[k - 1].out_dim));
        DenseLayer layer;
        layer.spec.in_dim = rec.in_dim;
        layer.spec.out_dim = rec.out_dim;
        layer.spec.activation = static_cast<Activation>(rec.activation);
        layer.w.assign(rec.w.begin(), rec.w.end());
        layer.b.assign(rec.b.begin(), rec.b.end());
        net.layers.push_back(std::move(layer));
    }
    return net;
}

void save_weights(const DenseNet& net, const std::string& path) {
    write_file(path, net_to_bytes(net));
}

DenseNet load_weights(const std::string& path) {
    return net_from_bytes(read_file(path));
}

} // namespace sleepstack
