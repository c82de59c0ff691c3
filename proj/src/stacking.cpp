#include "sleepstack/stacking.hpp"

#include "sleepstack/errors.hpp"
#include "sleepstack/features.hpp"

#include <algorithm>
#include <string>

namespace sleepstack {

DenseNet make_base_ann(int index) {
    if (index < 0 || index >= kStackBases)
        throw Error(ErrorCode::DimensionMismatch, "base index out of range");
    Activation hidden = index < 2 ? Activation::Relu : Activation::Tanh;
    return make_dense_net({kFeatureDim, kBaseHidden1, kBaseHidden2, kClassCount}, hidden,
                          Activation::Softmax, kBaseDropout);
}

DenseNet make_meta_ann(int base_count) {
    return make_dense_net({base_count * kClassCount, kMetaHidden, kClassCount}, Activation::Linear,
                          Activation::Softmax, 0.0);
}

StackModel make_stack(ClassMode mode) {
    StackModel model;
    model.class_mode = mode;
    for (int i = 0; i < kStackBases; ++i) model.bases.push_back(make_base_ann(i));
    model.meta = make_meta_ann(kStackBases);
    return model;
}

Matrix stack_meta_features(const std::vector<DenseNet>& bases, const Matrix& X) {
    if (bases.empty()) throw Error(ErrorCode::BadModel, "no bases");
    std::size_t cols = 0;
    for (const auto& b : bases) cols += static_cast<std::size_t>(b.output_dim());
    Matrix M(X.rows, cols);
    for (std::size_t r = 0; r < X.rows; ++r) {
        std::span<const double> x(X.row(r), X.cols);
        double* dst = M.row(r);
        for (const auto& base : bases) {
            auto p = forward(base, x, RunMode::Infer);
            std::copy(p.begin(), p.end(), dst);
            dst += p.size();
        }
    }
    return M;
}

int argmax_lowest(std::span<const double> v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
    return best;
}

StackPrediction predict_stack(const StackModel& model, std::span<const double> x) {
    if (static_cast<int>(x.size()) != model.bases.front().input_dim())
        throw Error(ErrorCode::DimensionMismatch, "feature vector size does not match base input");
    std::vector<double> meta_in;
    meta_in.reserve(static_cast<std::size_t>(model.meta_input_dim()));
    for (const auto& base : model.bases) {
        auto p = forward(base, x, RunMode::Infer);
        meta_in.insert(meta_in.end(), p.begin(), p.end());
    }
    auto probs = forward(model.meta, meta_in, RunMode::Infer);
    StackPrediction pred;
    pred.class_index = argmax_lowest(probs);
    pred.phase = class_phase(pred.class_index, model.class_mode);
    std::copy(probs.begin(), probs.end(), pred.probs.begin());
    return pred;
}

namespace {

// Per-class round-robin dealing after a seeded shuffle: every fold gets an
// even share of every class.
std::vector<int> assign_folds(const std::vector<int>& y, int folds, Rng& rng) {
    std::vector<std::vector<int>> by_class(kClassCount);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || y[i] >= kClassCount)
            throw Error(ErrorCode::DimensionMismatch, "label out of range");
        by_class[static_cast<std::size_t>(y[i])].push_back(static_cast<int>(i));
    }
    for (int c = 0; c < kClassCount; ++c)
        if (static_cast<int>(by_class[static_cast<std::size_t>(c)].size()) < folds)
            throw Error(ErrorCode::FoldTooSmall,
                        std::string("class ") + std::to_string(c) + " has " +
                            std::to_string(by_class[static_cast<std::size_t>(c)].size()) +
                            " rows, fewer than " + std::to_string(folds) + " folds");
    std::vector<int> fold_of(y.size(), 0);
    for (auto& grp : by_class) {
        rng.shuffle(grp);
        for (std::size_t i = 0; i < grp.size(); ++i)
            fold_of[static_cast<std::size_t>(grp[i])] = static_cast<int>(i % static_cast<std::size_t>(folds));
    }
    return fold_of;
}

void gather(const Matrix& X, const std::vector<int>& y, const std::vector<int>& idx, Matrix& Xo,
            std::vector<int>& yo) {
    Xo = Matrix(idx.size(), X.cols);
    yo.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double* src = X.row(static_cast<std::size_t>(idx[i]));
        std::copy(src, src + X.cols, Xo.row(i));
        yo[i] = y[static_cast<std::size_t>(idx[i])];
    }
}

} // namespace

StackModel train_stack(const Matrix& X, const std::vector<int>& y, const TrainConfig& cfg,
                       int folds, ClassMode mode, unsigned threads) {
    cfg.validate();
    if (X.rows == 0) throw Error(ErrorCode::EmptyDataset, "no training rows");
    if (X.rows != y.size()) throw Error(ErrorCode::DimensionMismatch, "X and y row counts differ");
    if (folds < 2) throw Error(ErrorCode::UsageError, "stacking needs at least 2 folds");

    Rng fold_rng(derive_seed(cfg.seed, "stack-folds"));
    std::vector<int> fold_of = assign_folds(y, folds, fold_rng);

    std::vector<std::vector<int>> in_fold(static_cast<std::size_t>(folds));
    std::vector<std::vector<int>> out_fold(static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < y.size(); ++i)
        for (int f = 0; f < folds; ++f)
            (fold_of[i] == f ? in_fold : out_fold)[static_cast<std::size_t>(f)].push_back(
                static_cast<int>(i));

    // one task per (fold, base): train on the fold complement, predict the
    // held-out rows into the meta feature matrix
    Matrix meta_X(X.rows, static_cast<std::size_t>(kStackBases) * kClassCount);
    std::size_t tasks = static_cast<std::size_t>(folds) * kStackBases;
    parallel_for(tasks, threads, [&](std::size_t t) {
        int f = static_cast<int>(t) / kStackBases;
        int b = static_cast<int>(t) % kStackBases;
        Matrix Xtr;
        std::vector<int> ytr;
        gather(X, y, out_fold[static_cast<std::size_t>(f)], Xtr, ytr);
        DenseNet net = make_base_ann(b);
        TrainConfig sub = cfg;
        sub.seed = derive_seed(cfg.seed, "fold:" + std::to_string(f) + ":base:" + std::to_string(b));
        train(net, Xtr, ytr, sub);
        for (int row : in_fold[static_cast<std::size_t>(f)]) {
            std::span<const double> x(X.row(static_cast<std::size_t>(row)), X.cols);
            auto p = forward(net, x, RunMode::Infer);
            std::copy(p.begin(), p.end(),
                      meta_X.row(static_cast<std::size_t>(row)) + static_cast<std::size_t>(b) * kClassCount);
        }
    });

    StackModel model = make_stack(mode);
    train_meta(model, meta_X, y, cfg);

    // final bases see all rows; their seeds differ per base
    parallel_for(static_cast<std::size_t>(kStackBases), threads, [&](std::size_t b) {
        TrainConfig sub = cfg;
        sub.seed = derive_seed(cfg.seed, "base:" + std::to_string(b));
        train(model.bases[b], X, y, sub);
    });
    return model;
}

TrainHistory train_meta(StackModel& model, const Matrix& meta_X, const std::vector<int>& y,
                        const TrainConfig& cfg) {
    if (static_cast<int>(meta_X.cols) != model.meta_input_dim())
        throw Error(ErrorCode::DimensionMismatch, "meta feature width does not match meta input");
    TrainConfig sub = cfg;
    sub.seed = derive_seed(cfg.seed, "meta");
    return train(model.meta, meta_X, y, sub);
}

} // namespace sleepstack
