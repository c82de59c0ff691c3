#include "sleepstack/synth.hpp"

#include "sleepstack/errors.hpp"
#include "sleepstack/rng.hpp"
#include "sleepstack/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace sleepstack {

namespace {

constexpr double kHrClampLo = 30.0, kHrClampHi = 200.0;
constexpr double kIbiClampLo = 300.0, kIbiClampHi = 2500.0;

double quantize(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    double out = 0.0;
    parse_double(buf, out);
    return out;
}

} // namespace

PhaseModel default_phase_model() {
    PhaseModel m;
    // bpm / ms figures: deep sleep slow and steady on HR but with the largest
    // beat-to-beat swings; REM close to wake, as HR-based stagers expect
    m.phases[0] = {74.0, 6.0, 810.0, 55.0, 30.0};  // wake
    m.phases[1] = {71.0, 5.0, 845.0, 50.0, 24.0};  // rem
    m.phases[2] = {62.0, 4.0, 968.0, 45.0, 42.0};  // light
    m.phases[3] = {55.0, 3.0, 1091.0, 55.0, 72.0}; // deep
    m.dwell_epochs = {10.0, 16.0, 13.0, 11.0};
    // where a phase jumps when it leaves; calibrated against the reference
    // duration mix (stationary fractions W .219, R .213, L .411, D .157)
    const double jump[4][4] = {
        {0.0, 0.3776, 0.6224, 0.0},    // wake -> rem | light
        {0.45, 0.0, 0.55, 0.0},        // rem -> wake | light
        {0.3914, 0.1584, 0.0, 0.4502}, // light -> wake | rem | deep
        {0.25, 0.0, 0.75, 0.0},        // deep -> wake | light
    };
    for (int i = 0; i < 4; ++i) {
        double leave = 1.0 / m.dwell_epochs[static_cast<std::size_t>(i)];
        for (int j = 0; j < 4; ++j)
            m.transition[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                i == j ? 1.0 - leave : jump[i][j] * leave;
    }
    return m;
}

void validate_model(const PhaseModel& model) {
    for (int i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 4; ++j) {
            double p = model.transition[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (p < 0.0 || !std::isfinite(p))
                throw Error(ErrorCode::BadModel, "negative or non-finite transition probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw Error(ErrorCode::BadModel,
                        "transition row " + std::to_string(i) + " sums to " + format_double(sum));
        const auto& p = model.phases[static_cast<std::size_t>(i)];
        if (!(p.hr_mean_bpm > 0.0) || !(p.hr_std_bpm > 0.0) || !(p.ibi_mean_ms > 0.0) ||
            !(p.ibi_sdnn_ms > 0.0) || !(p.rmssd_ms > 0.0))
            throw Error(ErrorCode::BadModel, "phase parameters must be positive");
        if (p.rmssd_ms >= 2.0 * p.ibi_sdnn_ms)
            throw Error(ErrorCode::BadModel, "rmssd must be below twice the sdnn");
    }
    if (!(model.ar_rho >= 0.0 && model.ar_rho < 1.0))
        throw Error(ErrorCode::BadModel, "AR coefficient must be in [0, 1)");
    if (!(model.hr_rate_hz > 0.0)) throw Error(ErrorCode::BadModel, "HR rate must be positive");
}

LabeledNight gen_night(const PhaseModel& model, double duration_min, std::uint64_t seed,
                       const std::string& subject_id, const std::string& night_id, ClassMode mode) {
    validate_model(model);
    if (!(duration_min >= 10.0))
        throw Error(ErrorCode::BadModel, "night duration must be at least 10 minutes");

    const std::size_t epochs = static_cast<std::size_t>(std::floor(duration_min * 60.0 / kEpochLenS));
    const double duration_ms = static_cast<double>(epochs) * kEpochLenMs;

    // hypnogram over the 4 raw phases
    Rng hyp_rng(derive_seed(seed, "hypnogram"));
    std::vector<int> phase_idx(epochs);
    int state = static_cast<int>(model.start);
    for (std::size_t e = 0; e < epochs; ++e) {
        phase_idx[e] = state;
        double u = hyp_rng.uniform();
        double acc = 0.0;
        int next = 3;
        for (int j = 0; j < 4; ++j) {
            acc += model.transition[static_cast<std::size_t>(state)][static_cast<std::size_t>(j)];
            if (u < acc) {
                next = j;
                break;
            }
        }
        state = next;
    }

    LabeledNight night;
    night.subject_id = subject_id;
    night.night_id = night_id;
    night.class_mode = mode;
    night.labels.resize(epochs);
    for (std::size_t e = 0; e < epochs; ++e) {
        SleepPhase p = static_cast<SleepPhase>(phase_idx[e]);
        if (mode == ClassMode::Wrn3 && (p == SleepPhase::Light || p == SleepPhase::Deep))
            p = SleepPhase::Nrem;
        night.labels[e] = p;
    }

    // HR: phase mean plus AR(1) deviation, clamped and quantized to the
    // 6-decimal file precision
    Rng hr_rng(derive_seed(seed, "hr"));
    night.hr.sample_rate_hz = model.hr_rate_hz;
    const std::size_t n_samples = static_cast<std::size_t>(
        std::llround(static_cast<double>(epochs) * kEpochLenS * model.hr_rate_hz));
    night.hr.samples.resize(n_samples);
    double rho = model.ar_rho;
    double innov = std::sqrt(1.0 - rho * rho);
    double dev = model.phases[static_cast<std::size_t>(phase_idx[0])].hr_std_bpm * hr_rng.normal();
    for (std::size_t n = 0; n < n_samples; ++n) {
        double t_s = static_cast<double>(n) / model.hr_rate_hz;
        std::size_t e = std::min(static_cast<std::size_t>(t_s / kEpochLenS), epochs - 1);
        const auto& pp = model.phases[static_cast<std::size_t>(phase_idx[e])];
        double v = pp.hr_mean_bpm + dev;
        v = std::clamp(v, kHrClampLo, kHrClampHi);
        night.hr.samples[n] = quantize(v, 6);
        dev = rho * dev + pp.hr_std_bpm * innov * hr_rng.normal();
    }

    // IBIs: per-phase AR(1) whose autocorrelation hits the rmssd target,
    // timestamps accumulate the quantized intervals
    Rng ibi_rng(derive_seed(seed, "ibi"));
    double cum_ms = 0.0;
    double ibi_dev = 0.0;
    {
        const auto& p0 = model.phases[static_cast<std::size_t>(phase_idx[0])];
        ibi_dev = p0.ibi_sdnn_ms * ibi_rng.normal();
    }
    while (true) {
        std::size_t e = std::min(static_cast<std::size_t>(cum_ms / kEpochLenMs), epochs - 1);
        const auto& pp = model.phases[static_cast<std::size_t>(phase_idx[e])];
        double interval = pp.ibi_mean_ms + ibi_dev;
        interval = std::clamp(interval, kIbiClampLo, kIbiClampHi);
        interval = quantize(interval, 3);
        if (cum_ms + interval >= duration_ms) break;
        cum_ms += interval;
        night.ibi.beats.push_back({std::llround(cum_ms), interval});
        double rho_p = 1.0 - (pp.rmssd_ms * pp.rmssd_ms) / (2.0 * pp.ibi_sdnn_ms * pp.ibi_sdnn_ms);
        ibi_dev = rho_p * ibi_dev + pp.ibi_sdnn_ms * std::sqrt(1.0 - rho_p * rho_p) * ibi_rng.normal();
    }
    return night;
}

std::string gen_corpus(const PhaseModel& model, const CorpusSpec& spec, const std::string& out_dir,
                       std::uint64_t seed) {
    validate_model(model);
    if (spec.subjects < 1 || spec.nights < 1)
        throw Error(ErrorCode::BadModel, "corpus needs at least one subject and one night");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir + ": " + ec.message());

    auto pad2 = [](int v) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%02d", v);
        return std::string(buf);
    };

    struct NightJob {
        std::string subject, night, file;
        std::uint64_t seed = 0;
        std::uint32_t checksum = 0;
    };
    std::vector<NightJob> jobs(static_cast<std::size_t>(spec.nights));
    for (int n = 0; n < spec.nights; ++n) {
        auto& job = jobs[static_cast<std::size_t>(n)];
        job.subject = "s" + pad2(n % spec.subjects + 1);
        job.night = "n" + pad2(n + 1);
        job.file = "night_" + job.night + "_" + job.subject + ".csv";
        job.seed = derive_seed(seed, "night:" + job.night);
    }

    parallel_for(jobs.size(), spec.threads, [&](std::size_t n) {
        auto& job = jobs[n];
        // subject baseline shift; IBI means rescale so the two signals agree
        Rng subj_rng(derive_seed(seed, "subject:" + job.subject));
        double off = subj_rng.uniform(-spec.subject_offset_bpm, spec.subject_offset_bpm);
        PhaseModel shifted = model;
        for (auto& pp : shifted.phases) {
            double old_mean = pp.hr_mean_bpm;
            pp.hr_mean_bpm += off;
            pp.ibi_mean_ms = pp.ibi_mean_ms * old_mean / (old_mean + off);
        }
        LabeledNight night =
            gen_night(shifted, spec.duration_min, job.seed, job.subject, job.night, spec.mode);
        std::string contents = night_to_string(night);
        job.checksum = crc32(contents);
        write_file(out_dir + "/" + job.file, contents);
    });

    nlohmann::json rows = nlohmann::json::array();
    for (const auto& job : jobs) {
        rows.push_back({{"subject", job.subject},
                        {"night", job.night},
                        {"file", job.file},
                        {"seed", job.seed},
                        {"crc32", job.checksum}});
    }
    nlohmann::json manifest{{"format_version", 1},
                            {"class_mode", class_mode_name(spec.mode)},
                            {"subjects", spec.subjects},
                            {"nights", spec.nights},
                            {"duration_min", spec.duration_min},
                            {"seed", seed},
                            {"files", rows}};
    std::string text = manifest.dump(2) + "\n";
    write_file(out_dir + "/manifest.json", text);
    return text;
}

} // namespace sleepstack
