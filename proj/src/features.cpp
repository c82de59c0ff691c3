#include "sleepstack/features.hpp"

#include "sleepstack/errors.hpp"

#include <algorithm>
#include <cmath>

namespace sleepstack {

double mean_of(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        const double d = x - m;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(v.size()));
}

double percentile(std::vector<double> v, double q) {
    if (v.empty())
        throw Error(ErrorCode::EmptyWindow, "percentile of empty window");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

const std::array<FeatureDef, kFeatureDim>& feature_map() {
    static const std::array<FeatureDef, kFeatureDim> map = {{
        {"ibi_cv", "ratio"},
        {"ibi_std", "ms"},
        {"ibi_diff_std", "ms"},
        {"ibi_rmssd", "ms"},
        {"ibi_nn50", "count"},
        {"ibi_pnn50", "ratio"},
        {"ibi_nn20", "count"},
        {"ibi_pnn20", "ratio"},
        {"ibi_mean", "ms"},
        {"ibi_diff_mean", "ms"},
        {"hr600_mean", "bpm"},
        {"hr600_std", "bpm"},
        {"hr600_min", "bpm"},
        {"hr600_max", "bpm"},
        {"hr600_p25", "bpm"},
        {"hr600_p75", "bpm"},
        {"hr90_mean", "bpm"},
        {"hr90_std", "bpm"},
        {"hr90_min", "bpm"},
        {"hr90_max", "bpm"},
        {"hr90_p25", "bpm"},
        {"hr90_p75", "bpm"},
    }};
    return map;
}

std::string feature_header() {
    std::string out;
    for (int i = 0; i < kFeatureDim; ++i) {
        if (i) out += ',';
        out += feature_map()[i].name;
    }
    return out;
}

std::array<double, 6> hr_window_features(const std::vector<double>& window) {
    if (window.empty())
        throw Error(ErrorCode::EmptyWindow, "hr window is empty");
    const double m = mean_of(window);
    const double sd = population_std(window);
    double lo = window[0], hi = window[0];
    for (double x : window) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    std::vector<double> sorted(window);
    std::sort(sorted.begin(), sorted.end());
    auto pct = [&](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const std::size_t at = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(at);
        if (at + 1 >= sorted.size()) return sorted.back();
        return sorted[at] + frac * (sorted[at + 1] - sorted[at]);
    };
    return {m, sd, lo, hi, pct(0.25), pct(0.75)};
}

std::array<double, 10> hrv_features(const std::vector<double>& intervals_ms) {
    if (intervals_ms.size() < 3)
        throw Error(ErrorCode::InsufficientBeats,
                    "need >= 3 intervals, got " + std::to_string(intervals_ms.size()));
    std::vector<double> diff(intervals_ms.size() - 1);
    for (std::size_t i = 0; i + 1 < intervals_ms.size(); ++i)
        diff[i] = intervals_ms[i + 1] - intervals_ms[i];

    const double mean_i = mean_of(intervals_ms);
    const double std_i = population_std(intervals_ms);
    const double cv = std_i / mean_i;
    const double std_d = population_std(diff);
    double sum_sq = 0.0;
    double nn50 = 0.0, nn20 = 0.0;
    for (double d : diff) {
        sum_sq += d * d;
        if (std::fabs(d) > 50.0) nn50 += 1.0;
        if (std::fabs(d) > 20.0) nn20 += 1.0;
    }
    const double n_d = static_cast<double>(diff.size());
    const double rmssd = std::sqrt(sum_sq / n_d);
    return {cv,   std_i,      std_d,       rmssd,  nn50,
            nn50 / n_d, nn20, nn20 / n_d, mean_i, mean_of(diff)};
}

std::vector<double> hr_window_samples(const LabeledNight& night, std::int64_t end_ms,
                                      const HrWindowSpec& spec) {
    const double fs = night.hr.sample_rate_hz;
    const double start_ms = static_cast<double>(end_ms) - spec.duration_s * 1000.0;
    std::vector<double> out;
    // sample i is timestamped i/fs seconds from night start
    std::int64_t i0 = static_cast<std::int64_t>(std::ceil(std::max(0.0, start_ms) * fs / 1000.0));
    if (i0 < 0) i0 = 0;
    std::vector<std::int64_t> bucket_sec;
    for (std::int64_t i = i0; i < static_cast<std::int64_t>(night.hr.samples.size()); ++i) {
        const double t_ms = static_cast<double>(i) * 1000.0 / fs;
        if (t_ms < start_ms) continue;
        if (t_ms >= static_cast<double>(end_ms)) break;
        out.push_back(night.hr.samples[static_cast<std::size_t>(i)]);
        if (spec.decimation == Decimation::PerSecondMean)
            bucket_sec.push_back(static_cast<std::int64_t>(t_ms / 1000.0));
    }
    if (spec.decimation == Decimation::Native || out.empty()) return out;

    std::vector<double> decimated;
    decimated.reserve(static_cast<std::size_t>(spec.duration_s) + 1);
    std::size_t run_start = 0;
    for (std::size_t i = 1; i <= out.size(); ++i) {
        if (i == out.size() || bucket_sec[i] != bucket_sec[run_start]) {
            double sum = 0.0;
            for (std::size_t j = run_start; j < i; ++j) sum += out[j];
            decimated.push_back(sum / static_cast<double>(i - run_start));
            run_start = i;
        }
    }
    return decimated;
}

std::vector<double> ibi_window_values(const LabeledNight& night, std::int64_t end_ms,
                                      double window_s) {
    const std::int64_t start_ms = end_ms - static_cast<std::int64_t>(window_s * 1000.0);
    std::vector<double> out;
    for (const auto& beat : night.ibi.beats) {
        if (beat.t_ms < start_ms) continue;
        if (beat.t_ms >= end_ms) break;
        out.push_back(beat.interval_ms);
    }
    return out;
}

FeatureVector extract_epoch(const LabeledNight& night, std::size_t epoch_index,
                            const FeatureConfig& cfg) {
    if (epoch_index >= night.labels.size())
        throw Error(ErrorCode::DimensionMismatch,
                    "epoch " + std::to_string(epoch_index) + " out of range");
    const std::int64_t end_ms = static_cast<std::int64_t>(epoch_index + 1) * kEpochLenMs;
    if (static_cast<double>(end_ms) < cfg.short_window.duration_s * 1000.0)
        throw Error(ErrorCode::InsufficientHistory,
                    "epoch " + std::to_string(epoch_index) + " has " +
                        format_double(static_cast<double>(end_ms) / 1000.0) + " s of history, needs " +
                        format_double(cfg.short_window.duration_s) + " s");

    const std::vector<double> ibis = ibi_window_values(night, end_ms, cfg.long_window.duration_s);
    if (ibis.size() < 3)
        throw Error(ErrorCode::InsufficientHistory,
                    "epoch " + std::to_string(epoch_index) + " has only " +
                        std::to_string(ibis.size()) + " beats in the trailing window");
    const std::vector<double> hr_long = hr_window_samples(night, end_ms, cfg.long_window);
    const std::vector<double> hr_short = hr_window_samples(night, end_ms, cfg.short_window);
    if (hr_long.empty() || hr_short.empty())
        throw Error(ErrorCode::InsufficientHistory,
                    "epoch " + std::to_string(epoch_index) + " has an empty hr window");

    const auto ibi_block = hrv_features(ibis);
    const auto long_block = hr_window_features(hr_long);
    const auto short_block = hr_window_features(hr_short);

    FeatureVector f;
    f.epoch_index = epoch_index;
    std::size_t at = 0;
    for (double v : ibi_block) f.values[at++] = v;
    for (double v : long_block) f.values[at++] = v;
    for (double v : short_block) f.values[at++] = v;
    for (double v : f.values)
        if (!std::isfinite(v))
            throw Error(ErrorCode::RangeViolation,
                        "non-finite feature at epoch " + std::to_string(epoch_index));
    return f;
}

const char* scaling_mode_name(ScalingMode m) {
    return m == ScalingMode::GlobalZscore ? "global" : "per-subject";
}

bool parse_scaling_mode(const std::string& name, ScalingMode& out) {
    if (name == "global") { out = ScalingMode::GlobalZscore; return true; }
    if (name == "per-subject") { out = ScalingMode::PerSubjectZscore; return true; }
    return false;
}

namespace {

ScalerStats fit_stats(const Matrix& x, const std::vector<std::size_t>& rows,
                      const std::string& scope) {
    ScalerStats stats;
    stats.mean.assign(x.cols, 0.0);
    stats.stdev.assign(x.cols, 0.0);
    const double n = static_cast<double>(rows.size());
    for (std::size_t r : rows) {
        const double* row = x.row(r);
        for (std::size_t c = 0; c < x.cols; ++c) stats.mean[c] += row[c];
    }
    for (std::size_t c = 0; c < x.cols; ++c) stats.mean[c] /= n;
    for (std::size_t r : rows) {
        const double* row = x.row(r);
        for (std::size_t c = 0; c < x.cols; ++c) {
            const double d = row[c] - stats.mean[c];
            stats.stdev[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < x.cols; ++c) {
        stats.stdev[c] = std::sqrt(stats.stdev[c] / n);
        if (stats.stdev[c] <= 0.0) {
            const char* fname = c < static_cast<std::size_t>(kFeatureDim)
                                    ? feature_map()[c].name
                                    : "column";
            throw Error(ErrorCode::DegenerateFeature,
                        std::string(fname) + " #" + std::to_string(c) +
                            " has zero variance in scope '" + scope + "'");
        }
    }
    return stats;
}

} // namespace

Scaler fit_scaler(const Matrix& features, const std::vector<std::string>& subjects,
                  ScalingMode mode) {
    if (features.rows == 0)
        throw Error(ErrorCode::EmptyDataset, "cannot fit a scaler on zero rows");
    if (subjects.size() != features.rows)
        throw Error(ErrorCode::DimensionMismatch, "subject list does not match feature rows");
    Scaler scaler;
    scaler.mode = mode;
    scaler.dim = features.cols;
    if (mode == ScalingMode::GlobalZscore) {
        std::vector<std::size_t> all(features.rows);
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        scaler.global = fit_stats(features, all, "global");
        return scaler;
    }
    std::map<std::string, std::vector<std::size_t>> by_subject;
    for (std::size_t r = 0; r < features.rows; ++r) by_subject[subjects[r]].push_back(r);
    for (const auto& [subject, rows] : by_subject)
        scaler.per_subject[subject] = fit_stats(features, rows, subject);
    return scaler;
}

namespace {

const ScalerStats& stats_for(const Scaler& scaler, const std::string& subject) {
    if (scaler.mode == ScalingMode::GlobalZscore) return scaler.global;
    auto it = scaler.per_subject.find(subject);
    if (it == scaler.per_subject.end())
        throw Error(ErrorCode::DimensionMismatch,
                    "scaler has no statistics for subject '" + subject + "'");
    return it->second;
}

} // namespace

void apply_scaler_row(const Scaler& scaler, const std::string& subject, const double* in,
                      double* out) {
    const ScalerStats& stats = stats_for(scaler, subject);
    for (std::size_t c = 0; c < scaler.dim; ++c)
        out[c] = (in[c] - stats.mean[c]) / stats.stdev[c];
}

FeatureVector apply_scaler(const Scaler& scaler, const std::string& subject,
                           const FeatureVector& f) {
    if (scaler.dim != static_cast<std::size_t>(kFeatureDim))
        throw Error(ErrorCode::DimensionMismatch, "scaler dimension != feature dimension");
    FeatureVector out = f;
    apply_scaler_row(scaler, subject, f.values.data(), out.values.data());
    return out;
}

Matrix apply_scaler(const Scaler& scaler, const std::vector<std::string>& subjects,
                    const Matrix& features) {
    if (subjects.size() != features.rows)
        throw Error(ErrorCode::DimensionMismatch, "subject list does not match feature rows");
    if (features.cols != scaler.dim)
        throw Error(ErrorCode::DimensionMismatch, "scaler dimension != matrix columns");
    Matrix out(features.rows, features.cols);
    for (std::size_t r = 0; r < features.rows; ++r)
        apply_scaler_row(scaler, subjects[r], features.row(r), out.row(r));
    return out;
}

void fit_subject_stats(Scaler& scaler, const std::string& subject, const Matrix& rows) {
    if (scaler.mode != ScalingMode::PerSubjectZscore)
        throw Error(ErrorCode::DimensionMismatch, "fit_subject_stats requires per-subject mode");
    if (rows.rows == 0)
        throw Error(ErrorCode::EmptyDataset, "no rows for subject '" + subject + "'");
    std::vector<std::size_t> all(rows.rows);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    scaler.per_subject[subject] = fit_stats(rows, all, subject);
}

std::uint32_t Scaler::checksum() const {
    std::string blob;
    blob += scaling_mode_name(mode);
    blob += '|';
    blob += std::to_string(dim);
    auto add_stats = [&blob](const std::string& scope, const ScalerStats& s) {
        blob += '|';
        blob += scope;
        for (double v : s.mean) { blob += ','; blob += format_double(v); }
        for (double v : s.stdev) { blob += ','; blob += format_double(v); }
    };
    if (mode == ScalingMode::GlobalZscore) {
        add_stats("global", global);
    } else {
        for (const auto& [subject, s] : per_subject) add_stats(subject, s);
    }
    return crc32(blob);
}

} // namespace sleepstack
