#pragma once

#include "sleepstack/nncore.hpp"
#include "sleepstack/util.hpp"

#include <array>
#include <vector>

namespace sleepstack {

/// Six-layer comparison net, 2223 parameters. The widths are frozen here;
/// see README for how they were chosen.
constexpr std::array<int, 7> kAnnBigDims = {22, 26, 24, 20, 14, 10, 3};

DenseNet build_ann_big();

/// One stacked LSTM layer. Weights are gate-major rows [i; f; g; o], each row
/// holding the input block then the recurrent block: w is 4H x (in + H).
struct LstmLayer {
    int in_dim = 0;
    int hidden = 0;
    std::vector<double> w; // 4H x (in + H), row-major
    std::vector<double> b; // 4H, forget-gate block initialized to 1
};

struct LstmNet {
    std::vector<LstmLayer> layers;
    DenseLayer head; // hidden -> classes, softmax

    int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
    int output_dim() const { return head.spec.out_dim; }
};

LstmNet make_lstm(int input_dim, const std::vector<int>& hidden_sizes, int classes);
/// The Table-style comparison model: 2 layers of 25 units over the 22
/// features, dense softmax head.
LstmNet make_lstm_baseline();

void init_lstm_weights(LstmNet& net, Rng& rng);

std::size_t lstm_param_count(const LstmNet& net);

/// One cell step: h_out/c_out must hold `hidden` values each. Gates use
/// sigmoid, the candidate and cell output tanh.
void lstm_cell(const LstmLayer& layer, const double* x, const double* h_prev, const double* c_prev,
               double* h_out, double* c_out);

/// Per-step class probabilities for one sequence (rows of seq are steps).
/// State starts at zero; deterministic.
Matrix lstm_forward(const LstmNet& net, const Matrix& seq);

struct LstmGradients {
    std::vector<std::vector<double>> w, b; // per layer
    std::vector<double> head_w, head_b;
};

/// Weighted mean CE over every step of every sequence, full backprop through
/// time (no truncation); grads optional. Backs the finite-difference check.
double lstm_loss_and_gradients(const LstmNet& net, const std::vector<Matrix>& seqs,
                               const std::vector<std::vector<int>>& ys,
                               const std::vector<double>& class_weights, LstmGradients* grads);

/// Adam over truncated-BPTT chunks: each night is split into `truncation`-step
/// chunks, state carries across chunks, gradients stop at chunk boundaries,
/// one Adam step per chunk. Early stopping holds out whole nights. Sequences
/// are processed whole, so cfg.batch_size is ignored here.
TrainHistory lstm_train(LstmNet& net, const std::vector<Matrix>& seqs,
                        const std::vector<std::vector<int>>& ys, const TrainConfig& cfg,
                        int truncation = 64);

std::string lstm_to_bytes(const LstmNet& net);
LstmNet lstm_from_bytes(const std::string& bytes);
void save_lstm(const LstmNet& net, const std::string& path);
LstmNet load_lstm(const std::string& path);

} // namespace sleepstack
