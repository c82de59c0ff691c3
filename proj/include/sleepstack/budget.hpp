#pragma once

#include "sleepstack/baselines.hpp"
#include "sleepstack/nncore.hpp"
#include "sleepstack/stacking.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sleepstack {

constexpr std::size_t kTargetRamBytes = 98304; // 96 kB
constexpr std::size_t kBytesPerValue = 4;      // 32-bit values on the target device

struct MemoryReport {
    std::string model_kind;
    std::size_t params = 0;
    std::size_t weight_bytes = 0;
    std::size_t scratch_bytes = 0;
    std::size_t total_bytes = 0;
    std::size_t target_ram_bytes = kTargetRamBytes;
    double utilization_percent = 0.0;
};

/// Pure topology accounting at 4 bytes per value. Scratch for a dense net is
/// the largest in+out activation pair; the stack adds a staging slot for the
/// concatenated base outputs; the LSTM adds persistent h/c state per layer
/// plus the widest gate workspace.
MemoryReport budget_report(const DenseNet& net);
MemoryReport budget_report(const StackModel& model);
MemoryReport budget_report(const LstmNet& net);

std::size_t stack_scratch_values(const StackModel& model);

std::string memory_report_table(const MemoryReport& report);
std::string memory_report_json(const MemoryReport& report);

/// Fixed-capacity workspace for the embedded inference path. Capacity is
/// accounted in 4-byte values: an arena built with N bytes holds N/4 values.
class Arena {
public:
    explicit Arena(std::size_t bytes) : slab_(bytes / kBytesPerValue, 0.0), bytes_(bytes) {}

    std::size_t byte_capacity() const { return bytes_; }
    std::size_t value_capacity() const { return slab_.size(); }
    double* data() { return slab_.data(); }

private:
    std::vector<double> slab_;
    std::size_t bytes_ = 0;
};

/// predict_stack without any allocation: every intermediate lives in the
/// arena (ArenaTooSmall if it cannot hold the model's scratch report).
/// Bit-identical to predict_stack on every input.
StackPrediction arena_infer(const StackModel& model, std::span<const double> x, Arena& arena);

} // namespace sleepstack
