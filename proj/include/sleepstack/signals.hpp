#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sleepstack {

/// Uniformly sampled instantaneous heart rate, beats per minute.
struct HeartRateSeries {
    std::vector<double> samples;
    double sample_rate_hz = 25.0;

    double duration_s() const {
        return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
    }
};

struct IbiSample {
    std::int64_t t_ms = 0;      // beat timestamp from night start
    double interval_ms = 0.0;
};

/// Irregularly timed inter-beat intervals; timestamps strictly increasing.
struct IbiSeries {
    std::vector<IbiSample> beats;
};

enum class SleepPhase : std::uint8_t { Wake = 0, Rem = 1, Light = 2, Deep = 3, Nrem = 4 };

/// Label vocabulary of a night. PHASE3 scores {REM, LIGHT, DEEP} and keeps
/// WAKE epochs in the file (they are dropped at dataset assembly); WRN3
/// scores {WAKE, REM, NREM}.
enum class ClassMode : std::uint8_t { Phase3 = 0, Wrn3 = 1 };

constexpr int kClassCount = 3;
constexpr int kEpochLenS = 30;
constexpr std::int64_t kEpochLenMs = 30000;

const char* phase_name(SleepPhase p);
bool parse_phase(const std::string& name, SleepPhase& out);
const char* class_mode_name(ClassMode m);
bool parse_class_mode(const std::string& name, ClassMode& out);

/// Class index of a phase under a mode, or -1 when the phase is not a class
/// of that mode (WAKE under PHASE3). Index order fixes tie-breaks and the
/// confusion-matrix layout: PHASE3 = [REM, LIGHT, DEEP], WRN3 = [WAKE, REM, NREM].
int class_index(SleepPhase p, ClassMode mode);
SleepPhase class_phase(int index, ClassMode mode);
const char* class_name(int index, ClassMode mode);

/// Is `p` a legal label inside a night file of the given mode?
bool phase_in_mode(SleepPhase p, ClassMode mode);

struct LabeledNight {
    std::string subject_id;
    std::string night_id;
    ClassMode class_mode = ClassMode::Phase3;
    int epoch_len_s = kEpochLenS;
    std::vector<SleepPhase> labels;  // one per epoch
    HeartRateSeries hr;
    IbiSeries ibi;
};

/// Physiologic ingestion bounds; out-of-range samples are rejected, not clamped.
constexpr double kHrMinBpm = 20.0;
constexpr double kHrMaxBpm = 300.0;
constexpr double kIbiMinMs = 200.0;
constexpr double kIbiMaxMs = 3000.0;

/// Parse and validate a Night CSV v1 file.
/// Throws MalformedFile, RangeViolation, LabelMismatch.
LabeledNight load_night(const std::string& path);
LabeledNight parse_night(const std::string& contents, const std::string& origin);

/// Canonical Night CSV v1 form; save_night(load_night(p)) is byte-identical
/// for canonical inputs. HR is written at 6 decimals, IBI at 3.
std::string night_to_string(const LabeledNight& night);
void save_night(const LabeledNight& night, const std::string& path);

struct EpochSlice {
    std::size_t epoch_index;
    std::int64_t hr_window_end_ms;
    SleepPhase label;
};

/// One entry per label; epoch k ends at (k+1)*30000 ms from night start.
std::vector<EpochSlice> epoch_slices(const LabeledNight& night);

} // namespace sleepstack
