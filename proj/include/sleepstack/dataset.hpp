#pragma once

#include "sleepstack/features.hpp"
#include "sleepstack/signals.hpp"
#include "sleepstack/util.hpp"

#include <array>
#include <string>
#include <vector>

namespace sleepstack {

struct EpochRow {
    std::string subject;
    std::string night;
    int epoch_index = 0;
    int label = 0; // class index in the dataset's mode
    std::array<double, kFeatureDim> f{};
};

struct Dataset {
    ClassMode mode = ClassMode::Phase3;
    std::vector<EpochRow> rows;
    std::size_t skipped_early = 0; // epochs without enough signal history

    Matrix feature_matrix() const;
    std::vector<int> labels() const;
};

/// Raw (unscaled) per-epoch features for every usable epoch. Epochs that
/// predate a full long window are skipped and counted; 3-phase mode drops
/// WAKE epochs. All nights must share the requested class mode.
Dataset assemble(const std::vector<LabeledNight>& nights, const FeatureConfig& fc, ClassMode mode);

/// Same rows regrouped per night, in night order, for sequence models.
void dataset_sequences(const Dataset& ds, std::vector<Matrix>* seqs,
                       std::vector<std::vector<int>>* seq_labels,
                       std::vector<std::string>* night_ids = nullptr);

/// Feature CSV: header lines (#FEATURES v1, #CLASSMODE, #SCALING), then
/// subject,night,epoch,label,<22 named feature columns>. Values are written
/// in shortest round-trip form, so write-read-write is byte-stable.
void write_features_csv(const std::string& path, const Dataset& ds,
                        const std::string& scaling = "none");
Dataset read_features_csv(const std::string& path, std::string* scaling = nullptr);

std::vector<LabeledNight> load_nights(const std::vector<std::string>& paths);

} // namespace sleepstack
