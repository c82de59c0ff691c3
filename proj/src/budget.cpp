#include "sleepstack/budget.hpp"

#include "sleepstack/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstring>

namespace sleepstack {

namespace {

MemoryReport finish(MemoryReport r) {
    r.total_bytes = r.weight_bytes + r.scratch_bytes;
    r.utilization_percent =
        100.0 * static_cast<double>(r.total_bytes) / static_cast<double>(r.target_ram_bytes);
    return r;
}

} // namespace

MemoryReport budget_report(const DenseNet& net) {
    MemoryReport r;
    r.model_kind = "dense";
    r.params = param_count(net);
    r.weight_bytes = r.params * kBytesPerValue;
    r.scratch_bytes = activation_scratch_values(net) * kBytesPerValue;
    return finish(r);
}

std::size_t stack_scratch_values(const StackModel& model) {
    // one region sized to the largest in+out pair (ping-pong from either
    // end), plus a staging slot holding all base outputs for the combiner
    std::size_t region = activation_scratch_values(model.meta);
    for (const auto& base : model.bases) region = std::max(region, activation_scratch_values(base));
    return static_cast<std::size_t>(model.meta_input_dim()) + region;
}

MemoryReport budget_report(const StackModel& model) {
    MemoryReport r;
    r.model_kind = "stacking";
    r.params = param_count(model.meta);
    for (const auto& base : model.bases) r.params += param_count(base);
    r.weight_bytes = r.params * kBytesPerValue;
    r.scratch_bytes = stack_scratch_values(model) * kBytesPerValue;
    return finish(r);
}

MemoryReport budget_report(const LstmNet& net) {
    MemoryReport r;
    r.model_kind = "lstm";
    r.params = lstm_param_count(net);
    r.weight_bytes = r.params * kBytesPerValue;
    // persistent h and c per layer, the widest [x;h] staging plus gate
    // vectors, and the head's in+out pair
    std::size_t state = 0, work = 0;
    for (const auto& layer : net.layers) {
        state += 2 * static_cast<std::size_t>(layer.hidden);
        work = std::max(work, static_cast<std::size_t>(layer.in_dim) + 5 * static_cast<std::size_t>(layer.hidden));
    }
    work = std::max(work, static_cast<std::size_t>(net.head.spec.in_dim) + net.head.spec.out_dim);
    r.scratch_bytes = (state + work) * kBytesPerValue;
    return finish(r);
}

std::string memory_report_table(const MemoryReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "model          %s\n"
                  "parameters     %zu\n"
                  "weight bytes   %zu\n"
                  "scratch bytes  %zu\n"
                  "total bytes    %zu\n"
                  "target RAM     %zu\n"
                  "utilization    %.2f%%\n",
                  r.model_kind.c_str(), r.params, r.weight_bytes, r.scratch_bytes, r.total_bytes,
                  r.target_ram_bytes, r.utilization_percent);
    return buf;
}

std::string memory_report_json(const MemoryReport& r) {
    nlohmann::json j{{"format_version", 1},
                     {"model", r.model_kind},
                     {"params", r.params},
                     {"weight_bytes", r.weight_bytes},
                     {"scratch_bytes", r.scratch_bytes},
                     {"total_bytes", r.total_bytes},
                     {"target_ram_bytes", r.target_ram_bytes},
                     {"utilization_percent", r.utilization_percent}};
    return j.dump(2) + "\n";
}

StackPrediction arena_infer(const StackModel& model, std::span<const double> x, Arena& arena) {
    if (model.bases.empty()) throw Error(ErrorCode::BadModel, "stack has no bases");
    if (static_cast<int>(x.size()) != model.bases.front().input_dim())
        throw Error(ErrorCode::DimensionMismatch, "feature vector size does not match base input");
    const std::size_t need = stack_scratch_values(model);
    if (arena.value_capacity() < need)
        throw Error(ErrorCode::ArenaTooSmall,
                    "arena holds " + std::to_string(arena.value_capacity()) + " values, model needs " +
                        std::to_string(need));

    const std::size_t staging_n = static_cast<std::size_t>(model.meta_input_dim());
    double* staging = arena.data();
    double* region = arena.data() + staging_n;
    const std::size_t region_n = need - staging_n;

    // ping-pong between the two ends of the region; in+out always fits
    double* stage_out = staging;
    for (const auto& base : model.bases) {
        std::memcpy(region, x.data(), x.size() * sizeof(double));
        const double* in = region;
        for (const auto& layer : base.layers) {
            double* out = (in == region) ? region + region_n - layer.spec.out_dim : region;
            dense_layer_eval(layer, in, out);
            in = out;
        }
        std::memcpy(stage_out, in, static_cast<std::size_t>(base.output_dim()) * sizeof(double));
        stage_out += base.output_dim();
    }
    const double* in = staging;
    for (const auto& layer : model.meta.layers) {
        double* out = (in == region) ? region + region_n - layer.spec.out_dim : region;
        dense_layer_eval(layer, in, out);
        in = out;
    }

    StackPrediction pred;
    pred.class_index = argmax_lowest(std::span<const double>(in, static_cast<std::size_t>(model.meta.output_dim())));
    pred.phase = class_phase(pred.class_index, model.class_mode);
    for (int i = 0; i < model.meta.output_dim() && i < kClassCount; ++i)
        pred.probs[static_cast<std::size_t>(i)] = in[i];
    return pred;
}

} // namespace sleepstack
