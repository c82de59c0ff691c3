#pragma once

#include "sleepstack/rng.hpp"
#include "sleepstack/util.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sleepstack {

enum class Activation : std::uint8_t { Relu = 0, Tanh = 1, Linear = 2, Softmax = 3, Lstm = 4 };

const char* activation_name(Activation a);

struct LayerSpec {
    int in_dim = 0;
    int out_dim = 0;
    Activation activation = Activation::Linear;
};

struct DenseLayer {
    LayerSpec spec;
    std::vector<double> w; // out_dim x in_dim, row-major
    std::vector<double> b; // out_dim
};

/// Plain feed-forward classifier. Weights live as doubles in memory; the
/// on-disk format is 32-bit floats, so a loaded net round-trips bit-exactly.
struct DenseNet {
    std::vector<DenseLayer> layers;
    double dropout_rate = 0.0; // applied between hidden layers at train time

    int input_dim() const { return layers.empty() ? 0 : layers.front().spec.in_dim; }
    int output_dim() const { return layers.empty() ? 0 : layers.back().spec.out_dim; }
};

/// Build a net from boundary dims, e.g. {22, 9, 7, 3}: hidden layers use
/// `hidden`, the final layer `output`.
DenseNet make_dense_net(const std::vector<int>& dims, Activation hidden, Activation output,
                        double dropout_rate = 0.0);

/// Glorot-style uniform init, limit sqrt(6 / (fan_in + fan_out)); biases zero.
void init_weights(DenseNet& net, Rng& rng);

enum class RunMode { Train, Infer };

/// Evaluate one input. Train mode applies inverted dropout (consumes rng);
/// infer mode never touches the rng and is deterministic.
std::vector<double> forward(const DenseNet& net, std::span<const double> x, RunMode mode,
                            Rng* rng = nullptr);

/// y = activation(W x + b) for one layer; y must hold out_dim values.
/// Softmax layers are evaluated in a numerically stable form. The same
/// kernel backs forward(), predict_stack() and the arena path.
void dense_layer_eval(const DenseLayer& layer, const double* x, double* y);

std::size_t param_count(const DenseNet& net);
/// Values of the largest in+out activation buffer pair over all layers.
std::size_t activation_scratch_values(const DenseNet& net);
/// Parameter plus scratch bytes at the given width (embedded deployment
/// accounting; the default 4 matches 32-bit floats).
std::size_t ram_bytes(const DenseNet& net, std::size_t bytes_per_param = 4);

struct TrainConfig {
    double lr = 0.001;
    int batch_size = 32;
    int max_epochs = 50;
    int patience = 10;
    std::uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double validation_fraction = 0.15;
    bool balanced_class_weights = true;

    void validate() const; // throws UsageError on nonsense values
};

struct TrainHistory {
    std::vector<double> train_loss; // one per epoch run
    std::vector<double> val_loss;
    int best_epoch = 0; // 1-based; 0 when no validation split existed
    int epochs_run = 0;
    bool early_stopped = false;
    double best_val_loss = 0.0;
};

/// Early-stopping bookkeeping: observe(val_loss) returns true when patience
/// consecutive non-improvements have accumulated.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}
    bool observe(double val_loss);
    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    int bad_epochs_ = 0;
    double best_loss_ = 0.0;
};

/// Inverse-frequency class weights, w_c = N / (K * n_c); 0 for absent classes.
std::vector<double> inverse_frequency_weights(const std::vector<int>& y, int class_count);

/// Weighted softmax cross-entropy loss and parameter gradients over all rows
/// of X, dropout off. Gradient output is optional (loss-only evaluation backs
/// finite-difference checks). class_weights may be empty for uniform weights.
struct Gradients {
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;
};
double loss_and_gradients(const DenseNet& net, const Matrix& X, const std::vector<int>& y,
                          const std::vector<double>& class_weights, Gradients* grads);

/// Adam training with a stratified validation split for early stopping.
/// Initializes weights from cfg.seed; bit-reproducible for a fixed seed on
/// one thread. Restores the best-validation-loss weights before returning.
TrainHistory train(DenseNet& net, const Matrix& X, const std::vector<int>& y,
                   const TrainConfig& cfg);

/// Weight file, magic SSTK: little-endian, per layer u16 in, u16 out,
/// u8 activation, f32 weights row-major, f32 biases; trailing CRC32.
struct WeightRecord {
    std::uint16_t in_dim = 0;
    std::uint16_t out_dim = 0;
    std::uint8_t activation = 0;
    std::vector<float> w;
    std::vector<float> b;
};

std::string encode_weight_records(const std::vector<WeightRecord>& records);
std::vector<WeightRecord> decode_weight_records(const std::string& bytes);

std::string net_to_bytes(const DenseNet& net);
DenseNet net_from_bytes(const std::string& bytes);
void save_weights(const DenseNet& net, const std::string& path);
DenseNet load_weights(const std::string& path);

} // namespace sleepstack
