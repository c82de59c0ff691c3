#pragma once

// central finite differences over every learnable parameter, for both net
// kinds. Returns the worst relative disagreement against the analytic
// gradients.

#include "sleepstack/baselines.hpp"
#include "sleepstack/nncore.hpp"
#include "sleepstack/util.hpp"

#include <cmath>
#include <vector>

namespace gradcheck {

inline double rel(double a, double g) {
    const double denom = std::max(std::max(std::fabs(a), std::fabs(g)), 1e-10);
    return std::fabs(a - g) / denom;
}

inline double dense_max_rel(sleepstack::DenseNet& net, const sleepstack::Matrix& X,
                            const std::vector<int>& y, const std::vector<double>& cw,
                            double h = 1e-4) {
    using namespace sleepstack;
    Gradients grads;
    loss_and_gradients(net, X, y, cw, &grads);
    double worst = 0.0;
    auto probe = [&](double& param, double analytic) {
        const double keep = param;
        param = keep + h;
        const double up = loss_and_gradients(net, X, y, cw, nullptr);
        param = keep - h;
        const double down = loss_and_gradients(net, X, y, cw, nullptr);
        param = keep;
        worst = std::max(worst, rel(analytic, (up - down) / (2.0 * h)));
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        for (std::size_t k = 0; k < net.layers[l].w.size(); ++k)
            probe(net.layers[l].w[k], grads.w[l][k]);
        for (std::size_t k = 0; k < net.layers[l].b.size(); ++k)
            probe(net.layers[l].b[k], grads.b[l][k]);
    }
    return worst;
}

inline double lstm_max_rel(sleepstack::LstmNet& net, const std::vector<sleepstack::Matrix>& seqs,
                           const std::vector<std::vector<int>>& ys, const std::vector<double>& cw,
                           double h = 1e-4) {
    using namespace sleepstack;
    LstmGradients grads;
    lstm_loss_and_gradients(net, seqs, ys, cw, &grads);
    double worst = 0.0;
    auto probe = [&](double& param, double analytic) {
        const double keep = param;
        param = keep + h;
        const double up = lstm_loss_and_gradients(net, seqs, ys, cw, nullptr);
        param = keep - h;
        const double down = lstm_loss_and_gradients(net, seqs, ys, cw, nullptr);
        param = keep;
        worst = std::max(worst, rel(analytic, (up - down) / (2.0 * h)));
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        for (std::size_t k = 0; k < net.layers[l].w.size(); ++k)
            probe(net.layers[l].w[k], grads.w[l][k]);
        for (std::size_t k = 0; k < net.layers[l].b.size(); ++k)
            probe(net.layers[l].b[k], grads.b[l][k]);
    }
    for (std::size_t k = 0; k < net.head.w.size(); ++k) probe(net.head.w[k], grads.head_w[k]);
    for (std::size_t k = 0; k < net.head.b.size(); ++k) probe(net.head.b[k], grads.head_b[k]);
    return worst;
}

// relu nets are only differentiable away from the kinks; the checks demand a
// margin between every hidden preactivation and zero so the two-sided probe
// never crosses one
inline double min_relu_margin(const sleepstack::DenseNet& net, const sleepstack::Matrix& X) {
    using namespace sleepstack;
    double margin = 1e300;
    std::vector<double> cur, next;
    for (std::size_t r = 0; r < X.rows; ++r) {
        cur.assign(X.row(r), X.row(r) + X.cols);
        for (const auto& layer : net.layers) {
            const std::size_t out_n = static_cast<std::size_t>(layer.spec.out_dim);
            next.assign(out_n, 0.0);
            for (std::size_t o = 0; o < out_n; ++o) {
                double z = layer.b[o];
                for (std::size_t i = 0; i < cur.size(); ++i)
                    z += layer.w[o * cur.size() + i] * cur[i];
                if (layer.spec.activation == Activation::Relu)
                    margin = std::min(margin, std::fabs(z));
                next[o] = layer.spec.activation == Activation::Relu ? std::max(0.0, z)
                          : layer.spec.activation == Activation::Tanh ? std::tanh(z)
                                                                      : z;
            }
            cur = next;
        }
    }
    return margin;
}

} // namespace gradcheck
