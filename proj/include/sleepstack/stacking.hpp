#pragma once

#include "sleepstack/nncore.hpp"
#include "sleepstack/signals.hpp"
#include "sleepstack/util.hpp"

#include <array>
#include <span>
#include <vector>

namespace sleepstack {

constexpr int kStackBases = 4;
constexpr int kBaseHidden1 = 9;
constexpr int kBaseHidden2 = 7;
constexpr int kMetaHidden = 5;
constexpr double kBaseDropout = 0.2;

/// Base classifier i of the ensemble: 22-9-7-3, relu hidden for the first
/// two, tanh for the other two, softmax output, dropout 0.2.
DenseNet make_base_ann(int index);
/// Combiner: 12-5(linear)-3 softmax over the concatenated base outputs.
DenseNet make_meta_ann(int base_count = kStackBases);

struct StackModel {
    std::vector<DenseNet> bases;
    DenseNet meta;
    ClassMode class_mode = ClassMode::Phase3;

    int meta_input_dim() const { return meta.input_dim(); }
};

StackModel make_stack(ClassMode mode);

/// Row r = [p1; p2; p3; p4]: each base's infer-mode probabilities, fixed
/// base order.
Matrix stack_meta_features(const std::vector<DenseNet>& bases, const Matrix& X);

struct StackPrediction {
    int class_index = 0;
    SleepPhase phase = SleepPhase::Wake;
    std::array<double, kClassCount> probs{};
};

/// argmax of the meta softmax; ties break toward the lower class index.
/// Bit-identical to manually composing forward() over bases then meta.
StackPrediction predict_stack(const StackModel& model, std::span<const double> x);

int argmax_lowest(std::span<const double> v);

/// Trains the combiner on out-of-fold base predictions (each base re-trained
/// per fold so its predictions for held-out rows never saw those rows), then
/// refits the bases on all data. Fold and per-base seeds derive from
/// cfg.seed, so the thread count cannot change the result.
StackModel train_stack(const Matrix& X, const std::vector<int>& y, const TrainConfig& cfg,
                       int folds = 5, ClassMode mode = ClassMode::Phase3, unsigned threads = 0);

/// Meta training alone, for pre-built bases (meta_X from stack_meta_features
/// or an out-of-fold assembly).
TrainHistory train_meta(StackModel& model, const Matrix& meta_X, const std::vector<int>& y,
                        const TrainConfig& cfg);

} // namespace sleepstack
