#pragma once

#include "sleepstack/baselines.hpp"
#include "sleepstack/features.hpp"
#include "sleepstack/nncore.hpp"
#include "sleepstack/stacking.hpp"

#include <map>
#include <string>

namespace sleepstack {

/// Everything inference needs in one file: weight blobs plus a manifest with
/// the class mode, the fitted scaler and the feature map version. Binary
/// container, magic SSBN, CRC32-terminated (format in the README).
struct Bundle {
    std::string kind; // "stacking" | "ann-big" | "base-ann" | "lstm"
    ClassMode mode = ClassMode::Phase3;
    int feature_map_version = kFeatureMapVersion;
    Scaler scaler;
    std::map<std::string, std::string> blobs; // entry name -> weight file bytes

    static constexpr const char* kStackNames[5] = {"base0", "base1", "base2", "base3", "meta"};
};

std::string bundle_to_bytes(const Bundle& bundle);
Bundle bundle_from_bytes(const std::string& bytes);
void write_bundle(const std::string& path, const Bundle& bundle);
Bundle read_bundle(const std::string& path);

Bundle make_stack_bundle(const StackModel& model, const Scaler& scaler);
StackModel stack_from_bundle(const Bundle& bundle);

Bundle make_dense_bundle(const std::string& kind, const DenseNet& net, const Scaler& scaler,
                         ClassMode mode);
DenseNet dense_from_bundle(const Bundle& bundle);

Bundle make_lstm_bundle(const LstmNet& net, const Scaler& scaler, ClassMode mode);
LstmNet lstm_from_bundle(const Bundle& bundle);

} // namespace sleepstack
