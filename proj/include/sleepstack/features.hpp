#pragma once

#include "sleepstack/signals.hpp"
#include "sleepstack/util.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace sleepstack {

constexpr int kFeatureDim = 22;
constexpr int kFeatureMapVersion = 1;

/// All spreads in this toolkit are population (1/N) standard deviations.
double mean_of(const std::vector<double>& v);
double population_std(const std::vector<double>& v);
/// Percentile by linear interpolation between closest ranks (inclusive),
/// q in [0,1]; input need not be sorted.
double percentile(std::vector<double> v, double q);

struct FeatureDef {
    const char* name;
    const char* unit;
};

/// Index map of the 22-entry feature vector:
///   0-9   inter-beat-interval statistics over the trailing 600 s
///   10-15 heart-rate window statistics over the trailing 600 s
///   16-21 heart-rate window statistics over the trailing 90 s
const std::array<FeatureDef, kFeatureDim>& feature_map();
/// CSV header piece: feature names joined by ','.
std::string feature_header();

struct FeatureVector {
    std::array<double, kFeatureDim> values{};
    std::size_t epoch_index = 0;
};

enum class Decimation : std::uint8_t {
    Native = 0,        // window statistics over raw samples
    PerSecondMean = 1, // bucket samples into 1-s means first (default)
};

struct HrWindowSpec {
    double duration_s = 600.0;
    Decimation decimation = Decimation::PerSecondMean;
};

/// [mean, std, min, max, p25, p75] of an HR window. Throws EmptyWindow.
std::array<double, 6> hr_window_features(const std::vector<double>& window);

/// Ten interval statistics, in order:
/// [cv, std, std(diff), rmssd, nn50, pnn50, nn20, pnn20, mean, mean(diff)]
/// where diff are successive differences. Requires >= 3 intervals
/// (InsufficientBeats otherwise).
std::array<double, 10> hrv_features(const std::vector<double>& intervals_ms);

struct FeatureConfig {
    HrWindowSpec short_window{90.0, Decimation::PerSecondMean};
    HrWindowSpec long_window{600.0, Decimation::PerSecondMean};
};

/// HR samples of `night` whose timestamps fall in [end_ms - duration, end_ms),
/// after the spec's decimation. Exposed for compositional tests.
std::vector<double> hr_window_samples(const LabeledNight& night, std::int64_t end_ms,
                                      const HrWindowSpec& spec);
/// Interval values of beats with timestamp in [end_ms - window_s*1000, end_ms).
std::vector<double> ibi_window_values(const LabeledNight& night, std::int64_t end_ms,
                                      double window_s);

/// Feature vector of one epoch: HRV block over the trailing long window,
/// HR stats over the long window, HR stats over the short window.
/// Early-night windows shrink to the available history; throws
/// InsufficientHistory when less than the short window of HR history exists
/// or fewer than 3 beats fall inside the long window.
FeatureVector extract_epoch(const LabeledNight& night, std::size_t epoch_index,
                            const FeatureConfig& cfg = {});

enum class ScalingMode : std::uint8_t { GlobalZscore = 0, PerSubjectZscore = 1 };

const char* scaling_mode_name(ScalingMode m);
bool parse_scaling_mode(const std::string& name, ScalingMode& out);

struct ScalerStats {
    std::vector<double> mean;
    std::vector<double> stdev;
};

/// Per-feature z-score parameters. Global mode holds one stats set; the
/// per-subject mode holds one per subject and rows are scaled with their own
/// subject's statistics.
struct Scaler {
    ScalingMode mode = ScalingMode::GlobalZscore;
    std::size_t dim = kFeatureDim;
    ScalerStats global;
    std::map<std::string, ScalerStats> per_subject;

    bool has_subject(const std::string& subject) const {
        return per_subject.find(subject) != per_subject.end();
    }
    /// CRC32 over the canonical parameter serialization.
    std::uint32_t checksum() const;
};

/// Fit z-score parameters on the given rows (training rows only; the eval
/// module audits this). Throws DegenerateFeature on a zero-variance column
/// and EmptyDataset on zero rows.
Scaler fit_scaler(const Matrix& features, const std::vector<std::string>& subjects,
                  ScalingMode mode);

/// Scale one row. Per-subject mode requires the subject to be known to the
/// scaler (DimensionMismatch otherwise); see fit_subject_stats for unseen
/// subjects at inference time.
void apply_scaler_row(const Scaler& scaler, const std::string& subject, const double* in,
                      double* out);
FeatureVector apply_scaler(const Scaler& scaler, const std::string& subject,
                           const FeatureVector& f);
Matrix apply_scaler(const Scaler& scaler, const std::vector<std::string>& subjects,
                    const Matrix& features);

/// Fit one subject's stats from that subject's own rows and add them to the
/// scaler (per-subject mode; used when a night from an unseen subject is
/// scored).
void fit_subject_stats(Scaler& scaler, const std::string& subject, const Matrix& rows);

} // namespace sleepstack
