#pragma once

#include "sleepstack/signals.hpp"

#include <array>
#include <cstdint>
#include <string>

namespace sleepstack {

struct PhaseParams {
    double hr_mean_bpm = 0.0;
    double hr_std_bpm = 0.0;
    double ibi_mean_ms = 0.0;
    double ibi_sdnn_ms = 0.0;
    double rmssd_ms = 0.0; // successive-difference RMS target; must be < 2*sdnn
};

/// Markov hypnogram plus phase-conditioned HR/IBI generator parameters.
/// Indexing follows SleepPhase: 0 Wake, 1 REM, 2 Light, 3 Deep.
struct PhaseModel {
    std::array<PhaseParams, 4> phases{};
    std::array<std::array<double, 4>, 4> transition{}; // row-stochastic, per 30-s epoch
    std::array<double, 4> dwell_epochs{};              // mean epochs between jumps
    double ar_rho = 0.95;                              // HR AR(1) coefficient
    double hr_rate_hz = 1.0;
    SleepPhase start = SleepPhase::Wake;
};

/// Defaults calibrated so a 380-min night reproduces the reference duration
/// mix (wake 22 %, REM 21 %, light 41 %, deep 16 %). Deep sleep carries slow
/// heart rate with high beat-to-beat variability, REM sits close to wake.
PhaseModel default_phase_model();

/// Throws BadModel: rows must sum to 1 within 1e-12 with non-negative
/// entries, spreads positive, rmssd < 2*sdnn.
void validate_model(const PhaseModel& model);

/// One night: hypnogram from the chain at 30-s resolution, HR as phase mean
/// plus AR(1) noise, IBIs with per-phase mean/sdnn/rmssd. Deterministic per
/// seed; values are pre-quantized to file precision so saving and reloading
/// is byte-stable. duration >= 10 min.
LabeledNight gen_night(const PhaseModel& model, double duration_min, std::uint64_t seed,
                       const std::string& subject_id = "s01", const std::string& night_id = "n01",
                       ClassMode mode = ClassMode::Phase3);

struct CorpusSpec {
    int subjects = 24;
    int nights = 31;
    double duration_min = 380.0;
    ClassMode mode = ClassMode::Phase3;
    double subject_offset_bpm = 8.0; // per-subject baseline shift ~ U(-x, x)
    unsigned threads = 0;
};

/// Writes night files plus manifest.json into out_dir and returns the
/// manifest JSON. Nights are dealt to subjects round-robin; each subject
/// carries a baseline HR offset (IBI means rescaled to match) so per-subject
/// scaling has something to correct.
std::string gen_corpus(const PhaseModel& model, const CorpusSpec& spec, const std::string& out_dir,
                       std::uint64_t seed);

} // namespace sleepstack
