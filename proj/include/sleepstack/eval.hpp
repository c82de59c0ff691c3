#pragma once

#include "sleepstack/dataset.hpp"
#include "sleepstack/features.hpp"
#include "sleepstack/nncore.hpp"
#include "sleepstack/signals.hpp"
#include "sleepstack/util.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sleepstack {

struct ConfusionMatrix {
    ClassMode mode = ClassMode::Phase3;
    std::array<std::array<long, kClassCount>, kClassCount> counts{}; // [ref][pred]

    long total() const;
    long row_sum(int ref_class) const;
};

struct MetricReport {
    ClassMode mode = ClassMode::Phase3;
    std::array<double, kClassCount> per_class_d{};  // class-wise recall
    std::array<double, kClassCount> per_class_f1{};
    double ud = 0.0;
    double uf1 = 0.0;
    std::vector<std::string> warnings; // absent-class notes
};

struct ScoreResult {
    MetricReport metrics;
    ConfusionMatrix confusion;
};

/// Per-class recall and F1 plus their unweighted means over the 3 classes.
/// A class absent from both ref and pred scores 0 and adds a warning.
ScoreResult score(const std::vector<int>& ref, const std::vector<int>& pred, ClassMode mode);

enum class CvScheme { LeaveOneNightOut, KFoldBySubject };

const char* cv_scheme_name(CvScheme s);

/// What a fold's builder gets: scaled training rows plus the same rows
/// regrouped as per-night sequences (recurrent models need order).
struct TrainInputs {
    const Matrix& X;
    const std::vector<int>& y;
    const std::vector<Matrix>& seqs;
    const std::vector<std::vector<int>>& seq_y;
    std::uint64_t seed = 0;
};

/// Fold-trained predictor: maps one scaled night sequence to per-epoch class
/// indices.
struct NightClassifier {
    std::function<std::vector<int>(const Matrix& seq)> predict_seq;
};

using ModelBuilder = std::function<NightClassifier(const TrainInputs&)>;

struct CvConfig {
    CvScheme scheme = CvScheme::LeaveOneNightOut;
    int k = 6; // folds for the by-subject scheme
    ScalingMode scaling = ScalingMode::GlobalZscore;
    FeatureConfig features;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    // test hook: fit the scaler on all rows including test (the audit must
    // catch exactly this mistake)
    bool leak_scaler_for_testing = false;
};

struct FoldResult {
    int fold = 0;
    std::vector<std::string> test_nights;
    MetricReport metrics;
    ConfusionMatrix confusion;
    std::uint32_t scaler_checksum = 0;       // checksum of the scaler used
    std::uint32_t train_only_checksum = 0;   // recomputed from train rows only
};

struct CvReport {
    CvScheme scheme = CvScheme::LeaveOneNightOut;
    ClassMode mode = ClassMode::Phase3;
    ScalingMode scaling = ScalingMode::GlobalZscore;
    std::vector<FoldResult> folds;
    double ud_mean = 0.0, ud_std = 0.0;
    double uf1_mean = 0.0, uf1_std = 0.0;
    bool scaler_leak_detected = false;
};

/// Per-fold feature scaling is refit on training rows only and audited by a
/// bitwise checksum comparison. Per-subject scaling self-fits stats from a
/// test night's own rows when its subject never appears in training.
CvReport cross_validate(const std::vector<LabeledNight>& nights, const ModelBuilder& builder,
                        const CvConfig& cfg);

/// Same, starting from an already assembled raw (unscaled) dataset.
CvReport cross_validate(const Dataset& ds, const ModelBuilder& builder, const CvConfig& cfg);

/// Builders for the shipped models; cfg is copied into the closure and the
/// fold seed replaces cfg.seed.
ModelBuilder make_stack_builder(const TrainConfig& cfg, ClassMode mode, int folds = 5);
ModelBuilder make_ann_big_builder(const TrainConfig& cfg);
ModelBuilder make_base_ann_builder(const TrainConfig& cfg, int base_index);
ModelBuilder make_lstm_builder(const TrainConfig& cfg, int truncation = 64);

/// Step plot of both hypnograms (SVG with exactly two polylines) plus a
/// plain-text two-row strip next to it. svg_path ending in .svg gets the
/// text at <stem>.txt, anything else at <path>.txt.
void render_hypnogram(const std::vector<int>& ref, const std::vector<int>& pred, ClassMode mode,
                      const std::string& svg_path);

std::string hypnogram_svg(const std::vector<int>& ref, const std::vector<int>& pred, ClassMode mode);
std::string hypnogram_text(const std::vector<int>& ref, const std::vector<int>& pred, ClassMode mode);

std::string score_json(const ScoreResult& result);
std::string cv_report_json(const CvReport& report);
std::string cv_report_table(const CvReport& report);

} // namespace sleepstack
