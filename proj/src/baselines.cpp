#include "sleepstack/baselines.hpp"

#include "sleepstack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace sleepstack {

DenseNet build_ann_big() {
    // widths chosen so the count (2223) lands near the 2200-parameter target
    // of the comparison table; 22->16->...->3 style pyramids fall well short
    std::vector<int> dims(kAnnBigDims.begin(), kAnnBigDims.end());
    return make_dense_net(dims, Activation::Relu, Activation::Softmax, 0.2);
}

LstmNet make_lstm(int input_dim, const std::vector<int>& hidden_sizes, int classes) {
    if (input_dim < 1 || classes < 1 || hidden_sizes.empty())
        throw Error(ErrorCode::DimensionMismatch, "bad lstm shape");
    LstmNet net;
    int in = input_dim;
    for (int h : hidden_sizes) {
        if (h < 1) throw Error(ErrorCode::DimensionMismatch, "bad lstm hidden size");
        LstmLayer layer;
        layer.in_dim = in;
        layer.hidden = h;
        layer.w.assign(static_cast<std::size_t>(4 * h) * (in + h), 0.0);
        layer.b.assign(static_cast<std::size_t>(4 * h), 0.0);
        net.layers.push_back(std::move(layer));
        in = h;
    }
    net.head.spec = {in, classes, Activation::Softmax};
    net.head.w.assign(static_cast<std::size_t>(in) * classes, 0.0);
    net.head.b.assign(static_cast<std::size_t>(classes), 0.0);
    return net;
}

LstmNet make_lstm_baseline() { return make_lstm(22, {25, 25}, 3); }

void init_lstm_weights(LstmNet& net, Rng& rng) {
    for (auto& layer : net.layers) {
        double limit = std::sqrt(6.0 / (layer.in_dim + 2 * layer.hidden));
        for (auto& v : layer.w) v = rng.uniform(-limit, limit);
        std::fill(layer.b.begin(), layer.b.end(), 0.0);
        // forget-gate bias at 1 keeps early cell state from washing out
        std::fill(layer.b.begin() + layer.hidden, layer.b.begin() + 2 * layer.hidden, 1.0);
    }
    double limit = std::sqrt(6.0 / (net.head.spec.in_dim + net.head.spec.out_dim));
    for (auto& v : net.head.w) v = rng.uniform(-limit, limit);
    std::fill(net.head.b.begin(), net.head.b.end(), 0.0);
}

std::size_t lstm_param_count(const LstmNet& net) {
    std::size_t n = 0;
    for (const auto& layer : net.layers) n += layer.w.size() + layer.b.size();
    return n + net.head.w.size() + net.head.b.size();
}

static inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

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

namespace {

// raw gate pre-activations z = W [x; h_prev] + b, then the nonlinearities;
// out buffers are gate vectors of length H
void lstm_gates(const LstmLayer& layer, const double* x, const double* h_prev, double* ig,
                double* fg, double* gg, double* og) {
    int in = layer.in_dim;
    int h = layer.hidden;
    int cols = in + h;
    std::vector<double> xh(static_cast<std::size_t>(cols));
    std::memcpy(xh.data(), x, sizeof(double) * static_cast<std::size_t>(in));
    std::memcpy(xh.data() + in, h_prev, sizeof(double) * static_cast<std::size_t>(h));
    const double* w = layer.w.data();
    for (int k = 0; k < h; ++k)
        ig[k] = sigmoid(layer.b[static_cast<std::size_t>(k)] + dot4(w + static_cast<std::size_t>(k) * cols, xh.data(), cols));
    for (int k = 0; k < h; ++k)
        fg[k] = sigmoid(layer.b[static_cast<std::size_t>(h + k)] + dot4(w + static_cast<std::size_t>(h + k) * cols, xh.data(), cols));
    for (int k = 0; k < h; ++k)
        gg[k] = std::tanh(layer.b[static_cast<std::size_t>(2 * h + k)] + dot4(w + static_cast<std::size_t>(2 * h + k) * cols, xh.data(), cols));
    for (int k = 0; k < h; ++k)
        og[k] = sigmoid(layer.b[static_cast<std::size_t>(3 * h + k)] + dot4(w + static_cast<std::size_t>(3 * h + k) * cols, xh.data(), cols));
}

} // namespace

void lstm_cell(const LstmLayer& layer, const double* x, const double* h_prev, const double* c_prev,
               double* h_out, double* c_out) {
    int h = layer.hidden;
    std::vector<double> ig(static_cast<std::size_t>(h)), fg(static_cast<std::size_t>(h)),
        gg(static_cast<std::size_t>(h)), og(static_cast<std::size_t>(h));
    lstm_gates(layer, x, h_prev, ig.data(), fg.data(), gg.data(), og.data());
    for (int k = 0; k < h; ++k) {
        c_out[k] = fg[static_cast<std::size_t>(k)] * c_prev[k] + ig[static_cast<std::size_t>(k)] * gg[static_cast<std::size_t>(k)];
        h_out[k] = og[static_cast<std::size_t>(k)] * std::tanh(c_out[k]);
    }
}

Matrix lstm_forward(const LstmNet& net, const Matrix& seq) {
    if (net.layers.empty()) throw Error(ErrorCode::BadModel, "empty lstm");
    if (static_cast<int>(seq.cols) != net.input_dim())
        throw Error(ErrorCode::DimensionMismatch, "sequence feature dim does not match lstm input");
    std::size_t L = net.layers.size();
    std::vector<std::vector<double>> hstate(L), cstate(L), hnext(L), cnext(L);
    for (std::size_t l = 0; l < L; ++l) {
        hstate[l].assign(static_cast<std::size_t>(net.layers[l].hidden), 0.0);
        cstate[l].assign(static_cast<std::size_t>(net.layers[l].hidden), 0.0);
        hnext[l] = hstate[l];
        cnext[l] = cstate[l];
    }
    Matrix probs(seq.rows, static_cast<std::size_t>(net.output_dim()));
    for (std::size_t t = 0; t < seq.rows; ++t) {
        const double* x = seq.row(t);
        for (std::size_t l = 0; l < L; ++l) {
            lstm_cell(net.layers[l], x, hstate[l].data(), cstate[l].data(), hnext[l].data(),
                      cnext[l].data());
            hstate[l].swap(hnext[l]);
            cstate[l].swap(cnext[l]);
            x = hstate[l].data();
        }
        dense_layer_eval(net.head, x, probs.row(t));
    }
    return probs;
}

namespace {

// per-layer activation record over one BPTT chunk
struct LayerTape {
    int h = 0;
    std::vector<double> i, f, g, o, c, tc, hv; // T x H each
    std::vector<double> h0, c0;                // state entering the chunk

    void resize(int hidden, int T) {
        h = hidden;
        std::size_t sz = static_cast<std::size_t>(T) * hidden;
        i.resize(sz); f.resize(sz); g.resize(sz); o.resize(sz);
        c.resize(sz); tc.resize(sz); hv.resize(sz);
    }
};

struct LstmScratch {
    std::vector<LayerTape> tapes;
    std::vector<double> logits; // T x classes
    std::vector<double> probs;  // T x classes
};

// forward a chunk starting from the given states; states are updated to the
// end-of-chunk values; returns weighted CE sum (not yet normalized)
double lstm_chunk_forward(const LstmNet& net, const Matrix& seq, int t0, int T,
                          const std::vector<int>& y, const std::vector<double>& cw,
                          std::vector<std::vector<double>>& hstate,
                          std::vector<std::vector<double>>& cstate, LstmScratch& s,
                          double* weight_sum) {
    std::size_t L = net.layers.size();
    int classes = net.output_dim();
    s.tapes.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        s.tapes[l].resize(net.layers[l].hidden, T);
        s.tapes[l].h0 = hstate[l];
        s.tapes[l].c0 = cstate[l];
    }
    s.logits.resize(static_cast<std::size_t>(T) * classes);
    s.probs.resize(static_cast<std::size_t>(T) * classes);

    double loss = 0.0, wsum = 0.0;
    for (int t = 0; t < T; ++t) {
        const double* x = seq.row(static_cast<std::size_t>(t0 + t));
        for (std::size_t l = 0; l < L; ++l) {
            auto& tp = s.tapes[l];
            int h = tp.h;
            double* ig = tp.i.data() + static_cast<std::size_t>(t) * h;
            double* fg = tp.f.data() + static_cast<std::size_t>(t) * h;
            double* gg = tp.g.data() + static_cast<std::size_t>(t) * h;
            double* og = tp.o.data() + static_cast<std::size_t>(t) * h;
            double* cv = tp.c.data() + static_cast<std::size_t>(t) * h;
            double* tc = tp.tc.data() + static_cast<std::size_t>(t) * h;
            double* hv = tp.hv.data() + static_cast<std::size_t>(t) * h;
            lstm_gates(net.layers[l], x, hstate[l].data(), ig, fg, gg, og);
            for (int k = 0; k < h; ++k) {
                cv[k] = fg[k] * cstate[l][static_cast<std::size_t>(k)] + ig[k] * gg[k];
                tc[k] = std::tanh(cv[k]);
                hv[k] = og[k] * tc[k];
            }
            std::copy(hv, hv + h, hstate[l].begin());
            std::copy(cv, cv + h, cstate[l].begin());
            x = hv;
        }
        double* z = s.logits.data() + static_cast<std::size_t>(t) * classes;
        for (int i = 0; i < classes; ++i)
            z[i] = net.head.b[static_cast<std::size_t>(i)] +
                   dot4(net.head.w.data() + static_cast<std::size_t>(i) * net.head.spec.in_dim, x,
                        net.head.spec.in_dim);
        double mx = z[0];
        for (int i = 1; i < classes; ++i) mx = std::max(mx, z[i]);
        double sum = 0.0;
        double* p = s.probs.data() + static_cast<std::size_t>(t) * classes;
        for (int i = 0; i < classes; ++i) {
            p[i] = std::exp(z[i] - mx);
            sum += p[i];
        }
        for (int i = 0; i < classes; ++i) p[i] /= sum;
        int label = y[static_cast<std::size_t>(t0 + t)];
        double w = cw[static_cast<std::size_t>(label)];
        loss += w * (std::log(sum) + mx - z[label]);
        wsum += w;
    }
    *weight_sum = wsum;
    return loss;
}

struct LstmGradBuffers {
    LstmGradients g;

    explicit LstmGradBuffers(const LstmNet& net) {
        for (const auto& layer : net.layers) {
            g.w.emplace_back(layer.w.size(), 0.0);
            g.b.emplace_back(layer.b.size(), 0.0);
        }
        g.head_w.assign(net.head.w.size(), 0.0);
        g.head_b.assign(net.head.b.size(), 0.0);
    }

    void zero() {
        for (auto& v : g.w) std::fill(v.begin(), v.end(), 0.0);
        for (auto& v : g.b) std::fill(v.begin(), v.end(), 0.0);
        std::fill(g.head_w.begin(), g.head_w.end(), 0.0);
        std::fill(g.head_b.begin(), g.head_b.end(), 0.0);
    }
};

// backward through one recorded chunk; gradients accumulate into gb
void lstm_chunk_backward(const LstmNet& net, const Matrix& seq, int t0, int T,
                         const std::vector<int>& y, const std::vector<double>& cw, double norm,
                         const LstmScratch& s, LstmGradBuffers& gb) {
    std::size_t L = net.layers.size();
    int classes = net.output_dim();
    std::vector<std::vector<double>> dh_carry(L), dc_carry(L), from_above(L);
    for (std::size_t l = 0; l < L; ++l) {
        dh_carry[l].assign(static_cast<std::size_t>(net.layers[l].hidden), 0.0);
        dc_carry[l].assign(static_cast<std::size_t>(net.layers[l].hidden), 0.0);
        from_above[l].assign(static_cast<std::size_t>(net.layers[l].hidden), 0.0);
    }
    int top = static_cast<int>(L) - 1;
    int hmax = 0;
    for (const auto& layer : net.layers) hmax = std::max(hmax, layer.hidden);
    std::vector<double> dz(static_cast<std::size_t>(4 * hmax));
    std::vector<double> delta(static_cast<std::size_t>(classes));

    for (int t = T - 1; t >= 0; --t) {
        // head loss gradient feeds the top layer's hidden state
        const double* p = s.probs.data() + static_cast<std::size_t>(t) * classes;
        int label = y[static_cast<std::size_t>(t0 + t)];
        double scale = cw[static_cast<std::size_t>(label)] / norm;
        for (int i = 0; i < classes; ++i)
            delta[static_cast<std::size_t>(i)] = (p[i] - (i == label ? 1.0 : 0.0)) * scale;
        const auto& toptape = s.tapes[static_cast<std::size_t>(top)];
        const double* htop = toptape.hv.data() + static_cast<std::size_t>(t) * toptape.h;
        std::fill(from_above[static_cast<std::size_t>(top)].begin(),
                  from_above[static_cast<std::size_t>(top)].end(), 0.0);
        for (int i = 0; i < classes; ++i) {
            double di = delta[static_cast<std::size_t>(i)];
            gb.g.head_b[static_cast<std::size_t>(i)] += di;
            double* gw = gb.g.head_w.data() + static_cast<std::size_t>(i) * net.head.spec.in_dim;
            const double* wr = net.head.w.data() + static_cast<std::size_t>(i) * net.head.spec.in_dim;
            auto& fa = from_above[static_cast<std::size_t>(top)];
            for (int j = 0; j < net.head.spec.in_dim; ++j) {
                gw[j] += di * htop[j];
                fa[static_cast<std::size_t>(j)] += wr[j] * di;
            }
        }

        for (int l = top; l >= 0; --l) {
            const auto& layer = net.layers[static_cast<std::size_t>(l)];
            const auto& tp = s.tapes[static_cast<std::size_t>(l)];
            int h = layer.hidden;
            int in = layer.in_dim;
            int cols = in + h;
            const double* ig = tp.i.data() + static_cast<std::size_t>(t) * h;
            const double* fg = tp.f.data() + static_cast<std::size_t>(t) * h;
            const double* gg = tp.g.data() + static_cast<std::size_t>(t) * h;
            const double* og = tp.o.data() + static_cast<std::size_t>(t) * h;
            const double* tc = tp.tc.data() + static_cast<std::size_t>(t) * h;
            const double* cprev = t > 0 ? tp.c.data() + static_cast<std::size_t>(t - 1) * h : tp.c0.data();
            const double* hprev = t > 0 ? tp.hv.data() + static_cast<std::size_t>(t - 1) * h : tp.h0.data();
            const double* x = l > 0
                                  ? s.tapes[static_cast<std::size_t>(l - 1)].hv.data() +
                                        static_cast<std::size_t>(t) * s.tapes[static_cast<std::size_t>(l - 1)].h
                                  : seq.row(static_cast<std::size_t>(t0 + t));

            auto& dh = from_above[static_cast<std::size_t>(l)];
            auto& dhc = dh_carry[static_cast<std::size_t>(l)];
            auto& dcc = dc_carry[static_cast<std::size_t>(l)];
            for (int k = 0; k < h; ++k) {
                double dht = dh[static_cast<std::size_t>(k)] + dhc[static_cast<std::size_t>(k)];
                double dct = dht * og[k] * (1.0 - tc[k] * tc[k]) + dcc[static_cast<std::size_t>(k)];
                double dzi = dct * gg[k] * ig[k] * (1.0 - ig[k]);
                double dzf = dct * cprev[k] * fg[k] * (1.0 - fg[k]);
                double dzg = dct * ig[k] * (1.0 - gg[k] * gg[k]);
                double dzo = dht * tc[k] * og[k] * (1.0 - og[k]);
                dz[static_cast<std::size_t>(k)] = dzi;
                dz[static_cast<std::size_t>(h + k)] = dzf;
                dz[static_cast<std::size_t>(2 * h + k)] = dzg;
                dz[static_cast<std::size_t>(3 * h + k)] = dzo;
                dcc[static_cast<std::size_t>(k)] = dct * fg[k];
            }
            auto& gw = gb.g.w[static_cast<std::size_t>(l)];
            auto& gbv = gb.g.b[static_cast<std::size_t>(l)];
            std::fill(dhc.begin(), dhc.end(), 0.0);
            if (l > 0)
                std::fill(from_above[static_cast<std::size_t>(l - 1)].begin(),
                          from_above[static_cast<std::size_t>(l - 1)].end(), 0.0);
            for (int r = 0; r < 4 * h; ++r) {
                double d = dz[static_cast<std::size_t>(r)];
                gbv[static_cast<std::size_t>(r)] += d;
                double* gwr = gw.data() + static_cast<std::size_t>(r) * cols;
                const double* wr = layer.w.data() + static_cast<std::size_t>(r) * cols;
                for (int j = 0; j < in; ++j) gwr[j] += d * x[j];
                for (int j = 0; j < h; ++j) {
                    gwr[in + j] += d * hprev[j];
                    dhc[static_cast<std::size_t>(j)] += wr[in + j] * d;
                }
                if (l > 0) {
                    auto& fa = from_above[static_cast<std::size_t>(l - 1)];
                    for (int j = 0; j < in; ++j) fa[static_cast<std::size_t>(j)] += wr[j] * d;
                }
            }
        }
    }
}

} // namespace

double lstm_loss_and_gradients(const LstmNet& net, const std::vector<Matrix>& seqs,
                               const std::vector<std::vector<int>>& ys,
                               const std::vector<double>& class_weights, LstmGradients* grads) {
    if (seqs.empty()) throw Error(ErrorCode::EmptyDataset, "no sequences");
    if (seqs.size() != ys.size())
        throw Error(ErrorCode::DimensionMismatch, "sequence and label counts differ");
    int classes = net.output_dim();
    std::vector<double> cw = class_weights;
    if (cw.empty()) cw.assign(static_cast<std::size_t>(classes), 1.0);

    double norm = 0.0;
    for (std::size_t n = 0; n < seqs.size(); ++n) {
        if (seqs[n].rows != ys[n].size())
            throw Error(ErrorCode::DimensionMismatch, "sequence rows and labels differ");
        for (int label : ys[n]) {
            if (label < 0 || label >= classes)
                throw Error(ErrorCode::DimensionMismatch, "label out of range");
            norm += cw[static_cast<std::size_t>(label)];
        }
    }
    if (norm <= 0.0) throw Error(ErrorCode::EmptyDataset, "all sample weights are zero");

    LstmGradBuffers gb(net);
    LstmScratch scratch;
    double loss = 0.0;
    for (std::size_t n = 0; n < seqs.size(); ++n) {
        if (seqs[n].rows == 0) continue;
        std::vector<std::vector<double>> hstate(net.layers.size()), cstate(net.layers.size());
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            hstate[l].assign(static_cast<std::size_t>(net.layers[l].hidden), 0.0);
            cstate[l].assign(static_cast<std::size_t>(net.layers[l].hidden), 0.0);
        }
        double wsum = 0.0;
        loss += lstm_chunk_forward(net, seqs[n], 0, static_cast<int>(seqs[n].rows), ys[n], cw,
                                   hstate, cstate, scratch, &wsum);
        if (grads != nullptr)
            lstm_chunk_backward(net, seqs[n], 0, static_cast<int>(seqs[n].rows), ys[n], cw, norm,
                                scratch, gb);
    }
    if (grads != nullptr) *grads = std::move(gb.g);
    return loss / norm;
}

namespace {

struct LstmAdam {
    std::vector<std::vector<double>> mw, vw, mb, vb;
    std::vector<double> mhw, vhw, mhb, vhb;
    long t = 0;

    explicit LstmAdam(const LstmNet& net) {
        for (const auto& layer : net.layers) {
            mw.emplace_back(layer.w.size(), 0.0);
            vw.emplace_back(layer.w.size(), 0.0);
            mb.emplace_back(layer.b.size(), 0.0);
            vb.emplace_back(layer.b.size(), 0.0);
        }
        mhw.assign(net.head.w.size(), 0.0);
        vhw.assign(net.head.w.size(), 0.0);
        mhb.assign(net.head.b.size(), 0.0);
        vhb.assign(net.head.b.size(), 0.0);
    }

    void step(LstmNet& net, const LstmGradients& g, const TrainConfig& cfg) {
        ++t;
        double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        auto upd = [&](std::vector<double>& p, const std::vector<double>& gr, std::vector<double>& m,
                       std::vector<double>& v) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gr[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gr[i] * gr[i];
                p[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
            }
        };
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            upd(net.layers[l].w, g.w[l], mw[l], vw[l]);
            upd(net.layers[l].b, g.b[l], mb[l], vb[l]);
        }
        upd(net.head.w, g.head_w, mhw, vhw);
        upd(net.head.b, g.head_b, mhb, vhb);
    }
};

std::vector<std::vector<double>> lstm_snapshot(const LstmNet& net) {
    std::vector<std::vector<double>> s;
    for (const auto& layer : net.layers) {
        s.push_back(layer.w);
        s.push_back(layer.b);
    }
    s.push_back(net.head.w);
    s.push_back(net.head.b);
    return s;
}

void lstm_restore(LstmNet& net, const std::vector<std::vector<double>>& s) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        net.layers[l].w = s[2 * l];
        net.layers[l].b = s[2 * l + 1];
    }
    net.head.w = s[s.size() - 2];
    net.head.b = s[s.size() - 1];
}

double lstm_eval_loss(const LstmNet& net, const std::vector<Matrix>& seqs,
                      const std::vector<std::vector<int>>& ys, const std::vector<int>& idx,
                      const std::vector<double>& cw) {
    int classes = net.output_dim();
    double loss = 0.0, norm = 0.0;
    for (int n : idx) {
        const Matrix& seq = seqs[static_cast<std::size_t>(n)];
        const auto& y = ys[static_cast<std::size_t>(n)];
        Matrix p = lstm_forward(net, seq);
        for (std::size_t t = 0; t < seq.rows; ++t) {
            double w = cw[static_cast<std::size_t>(y[t])];
            double pv = std::max(p.at(t, static_cast<std::size_t>(y[t])), 1e-300);
            loss += -w * std::log(pv);
            norm += w;
        }
        (void)classes;
    }
    return norm > 0.0 ? loss / norm : 0.0;
}

} // namespace

TrainHistory lstm_train(LstmNet& net, const std::vector<Matrix>& seqs,
                        const std::vector<std::vector<int>>& ys, const TrainConfig& cfg,
                        int truncation) {
    cfg.validate();
    if (truncation < 1) throw Error(ErrorCode::UsageError, "truncation must be at least 1");
    if (seqs.empty()) throw Error(ErrorCode::EmptyDataset, "no training sequences");
    if (seqs.size() != ys.size())
        throw Error(ErrorCode::DimensionMismatch, "sequence and label counts differ");
    int classes = net.output_dim();
    for (std::size_t n = 0; n < seqs.size(); ++n) {
        if (seqs[n].rows != ys[n].size())
            throw Error(ErrorCode::DimensionMismatch, "sequence rows and labels differ");
        if (static_cast<int>(seqs[n].cols) != net.input_dim())
            throw Error(ErrorCode::DimensionMismatch, "sequence feature dim does not match lstm input");
        for (int label : ys[n])
            if (label < 0 || label >= classes)
                throw Error(ErrorCode::DimensionMismatch, "label out of range");
    }

    Rng rng(derive_seed(cfg.seed, "lstm-train"));
    init_lstm_weights(net, rng);

    // hold out whole nights for early stopping
    std::vector<int> order(seqs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    std::size_t nv = 0;
    if (cfg.validation_fraction > 0.0 && order.size() >= 2) {
        nv = static_cast<std::size_t>(
            std::floor(cfg.validation_fraction * static_cast<double>(order.size()) + 0.5));
        nv = std::min(std::max<std::size_t>(nv, 1), order.size() - 1);
    }
    std::vector<int> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(nv));
    std::vector<int> val_idx(order.end() - static_cast<std::ptrdiff_t>(nv), order.end());
    std::sort(val_idx.begin(), val_idx.end());

    std::vector<double> cw(static_cast<std::size_t>(classes), 1.0);
    if (cfg.balanced_class_weights) {
        std::vector<int> flat;
        for (int n : train_idx)
            flat.insert(flat.end(), ys[static_cast<std::size_t>(n)].begin(),
                        ys[static_cast<std::size_t>(n)].end());
        cw = inverse_frequency_weights(flat, classes);
    }

    LstmAdam adam(net);
    LstmGradBuffers gb(net);
    LstmScratch scratch;
    EarlyStopper stopper(cfg.patience);
    TrainHistory hist;
    bool has_val = !val_idx.empty();
    auto best = lstm_snapshot(net);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(train_idx);
        double epoch_loss = 0.0, epoch_weight = 0.0;
        for (int n : train_idx) {
            const Matrix& seq = seqs[static_cast<std::size_t>(n)];
            const auto& y = ys[static_cast<std::size_t>(n)];
            if (seq.rows == 0) continue;
            std::vector<std::vector<double>> hstate(net.layers.size()), cstate(net.layers.size());
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                hstate[l].assign(static_cast<std::size_t>(net.layers[l].hidden), 0.0);
                cstate[l].assign(static_cast<std::size_t>(net.layers[l].hidden), 0.0);
            }
            for (int t0 = 0; t0 < static_cast<int>(seq.rows); t0 += truncation) {
                int T = std::min(truncation, static_cast<int>(seq.rows) - t0);
                double wsum = 0.0;
                double loss =
                    lstm_chunk_forward(net, seq, t0, T, y, cw, hstate, cstate, scratch, &wsum);
                if (wsum <= 0.0) continue;
                double mean_loss = loss / wsum;
                if (!std::isfinite(mean_loss))
                    throw Error(ErrorCode::NonFiniteLoss,
                                "loss became non-finite at epoch " + std::to_string(epoch));
                gb.zero();
                lstm_chunk_backward(net, seq, t0, T, y, cw, wsum, scratch, gb);
                adam.step(net, gb.g, cfg);
                epoch_loss += loss;
                epoch_weight += wsum;
            }
        }
        hist.train_loss.push_back(epoch_weight > 0.0 ? epoch_loss / epoch_weight : 0.0);
        hist.epochs_run = epoch;
        if (has_val) {
            double vl = lstm_eval_loss(net, seqs, ys, val_idx, cw);
            if (!std::isfinite(vl))
                throw Error(ErrorCode::NonFiniteLoss,
                            "validation loss became non-finite at epoch " + std::to_string(epoch));
            hist.val_loss.push_back(vl);
            bool stop = stopper.observe(vl);
            if (stopper.best_epoch() == epoch) best = lstm_snapshot(net);
            if (stop) {
                hist.early_stopped = true;
                break;
            }
        }
    }
    if (has_val) {
        lstm_restore(net, best);
        hist.best_epoch = stopper.best_epoch();
        hist.best_val_loss = stopper.best_loss();
    }
    return hist;
}

std::string lstm_to_bytes(const LstmNet& net) {
    std::vector<WeightRecord> records;
    for (const auto& layer : net.layers) {
        WeightRecord rec;
        rec.in_dim = static_cast<std::uint16_t>(layer.in_dim + layer.hidden);
        rec.out_dim = static_cast<std::uint16_t>(4 * layer.hidden);
        rec.activation = static_cast<std::uint8_t>(Activation::Lstm);
        rec.w.assign(layer.w.begin(), layer.w.end());
        rec.b.assign(layer.b.begin(), layer.b.end());
        records.push_back(std::move(rec));
    }
    WeightRecord head;
    head.in_dim = static_cast<std::uint16_t>(net.head.spec.in_dim);
    head.out_dim = static_cast<std::uint16_t>(net.head.spec.out_dim);
    head.activation = static_cast<std::uint8_t>(Activation::Softmax);
    head.w.assign(net.head.w.begin(), net.head.w.end());
    head.b.assign(net.head.b.begin(), net.head.b.end());
    records.push_back(std::move(head));
    return encode_weight_records(records);
}

LstmNet lstm_from_bytes(const std::string& bytes) {
    auto records = decode_weight_records(bytes);
    if (records.size() < 2) throw Error(ErrorCode::TopologyMismatch, "lstm blob needs layers and a head");
    LstmNet net;
    int prev_hidden = 0;
    for (std::size_t k = 0; k + 1 < records.size(); ++k) {
        const auto& rec = records[k];
        if (rec.activation != static_cast<std::uint8_t>(Activation::Lstm))
            throw Error(ErrorCode::TopologyMismatch, "expected an lstm layer record");
        if (rec.out_dim % 4 != 0) throw Error(ErrorCode::TopologyMismatch, "lstm gate rows not divisible by 4");
        int h = rec.out_dim / 4;
        int in = rec.in_dim - h;
        if (in < 1) throw Error(ErrorCode::TopologyMismatch, "lstm layer input underflows");
        if (k > 0 && in != prev_hidden)
            throw Error(ErrorCode::TopologyMismatch, "lstm layer input does not chain");
        LstmLayer layer;
        layer.in_dim = in;
        layer.hidden = h;
        layer.w.assign(rec.w.begin(), rec.w.end());
        layer.b.assign(rec.b.begin(), rec.b.end());
        net.layers.push_back(std::move(layer));
        prev_hidden = h;
    }
    const auto& head = records.back();
    if (head.activation != static_cast<std::uint8_t>(Activation::Softmax) || head.in_dim != prev_hidden)
        throw Error(ErrorCode::TopologyMismatch, "lstm head record mismatch");
    net.head.spec = {head.in_dim, head.out_dim, Activation::Softmax};
    net.head.w.assign(head.w.begin(), head.w.end());
    net.head.b.assign(head.b.begin(), head.b.end());
    return net;
}

void save_lstm(const LstmNet& net, const std::string& path) { write_file(path, lstm_to_bytes(net)); }

LstmNet load_lstm(const std::string& path) { return lstm_from_bytes(read_file(path)); }

} // namespace sleepstack
