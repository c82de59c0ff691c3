#include "sleepstack/signals.hpp"

#include "sleepstack/errors.hpp"
#include "sleepstack/util.hpp"

#include <cctype>
#include <cmath>

namespace sleepstack {

const char* phase_name(SleepPhase p) {
    switch (p) {
        case SleepPhase::Wake: return "WAKE";
        case SleepPhase::Rem: return "REM";
        case SleepPhase::Light: return "LIGHT";
        case SleepPhase::Deep: return "DEEP";
        case SleepPhase::Nrem: return "NREM";
    }
    return "?";
}

bool parse_phase(const std::string& name, SleepPhase& out) {
    if (name == "WAKE") { out = SleepPhase::Wake; return true; }
    if (name == "REM") { out = SleepPhase::Rem; return true; }
    if (name == "LIGHT") { out = SleepPhase::Light; return true; }
    if (name == "DEEP") { out = SleepPhase::Deep; return true; }
    if (name == "NREM") { out = SleepPhase::Nrem; return true; }
    return false;
}

const char* class_mode_name(ClassMode m) {
    return m == ClassMode::Phase3 ? "PHASE3" : "WRN3";
}

bool parse_class_mode(const std::string& name, ClassMode& out) {
    std::string up = name;
    for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (up == "PHASE3") { out = ClassMode::Phase3; return true; }
    if (up == "WRN3") { out = ClassMode::Wrn3; return true; }
    return false;
}

int class_index(SleepPhase p, ClassMode mode) {
    if (mode == ClassMode::Phase3) {
        switch (p) {
            case SleepPhase::Rem: return 0;
            case SleepPhase::Light: return 1;
            case SleepPhase::Deep: return 2;
            default: return -1;
        }
    }
    switch (p) {
        case SleepPhase::Wake: return 0;
        case SleepPhase::Rem: return 1;
        case SleepPhase::Nrem: return 2;
        default: return -1;
    }
}

SleepPhase class_phase(int index, ClassMode mode) {
    static const SleepPhase phase3[] = {SleepPhase::Rem, SleepPhase::Light, SleepPhase::Deep};
    static const SleepPhase wrn3[] = {SleepPhase::Wake, SleepPhase::Rem, SleepPhase::Nrem};
    if (index < 0 || index >= kClassCount)
        throw Error(ErrorCode::DimensionMismatch, "class index out of range");
    return mode == ClassMode::Phase3 ? phase3[index] : wrn3[index];
}

const char* class_name(int index, ClassMode mode) {
    return phase_name(class_phase(index, mode));
}

bool phase_in_mode(SleepPhase p, ClassMode mode) {
    if (mode == ClassMode::Phase3)
        return p == SleepPhase::Wake || p == SleepPhase::Rem || p == SleepPhase::Light ||
               p == SleepPhase::Deep;
    return p == SleepPhase::Wake || p == SleepPhase::Rem || p == SleepPhase::Nrem;
}

namespace {

[[noreturn]] void malformed(const std::string& origin, std::size_t line_no, const std::string& why) {
    throw Error(ErrorCode::MalformedFile,
                origin + ":" + std::to_string(line_no) + ": " + why);
}

// Header lines are "#KEY value" with exactly one space.
std::string header_value(const std::string& line, const std::string& key,
                         const std::string& origin, std::size_t line_no) {
    const std::string prefix = "#" + key + " ";
    if (line.size() <= prefix.size() || line.compare(0, prefix.size(), prefix) != 0)
        malformed(origin, line_no, "expected '" + prefix + "<value>'");
    const std::string value = line.substr(prefix.size());
    if (value.find(' ') != std::string::npos)
        malformed(origin, line_no, "value must not contain spaces");
    return value;
}

} // namespace

LabeledNight parse_night(const std::string& contents, const std::string& origin) {
    std::vector<std::string> lines;
    {
        std::size_t start = 0;
        for (std::size_t i = 0; i <= contents.size(); ++i) {
            if (i == contents.size() || contents[i] == '\n') {
                lines.push_back(contents.substr(start, i - start));
                start = i + 1;
            }
        }
        // A trailing newline leaves one empty pseudo-line; drop it.
        if (!lines.empty() && lines.back().empty()) lines.pop_back();
    }

    LabeledNight night;
    std::size_t ln = 0;
    auto need_line = [&]() -> const std::string& {
        if (ln >= lines.size())
            malformed(origin, ln + 1, "unexpected end of file");
        return lines[ln++];
    };

    if (need_line() != "#NIGHT v1")
        malformed(origin, 1, "missing '#NIGHT v1' header");
    night.subject_id = header_value(need_line(), "SUBJECT", origin, ln);
    night.night_id = header_value(need_line(), "NIGHT_ID", origin, ln);
    {
        const std::string mode = header_value(need_line(), "CLASSMODE", origin, ln);
        if (!parse_class_mode(mode, night.class_mode))
            malformed(origin, ln, "unknown class mode '" + mode + "'");
    }
    {
        const std::string rate = header_value(need_line(), "HR_RATE_HZ", origin, ln);
        if (!parse_double(rate, night.hr.sample_rate_hz) || !(night.hr.sample_rate_hz > 0) ||
            !std::isfinite(night.hr.sample_rate_hz))
            malformed(origin, ln, "bad HR_RATE_HZ '" + rate + "'");
    }
    if (need_line() != "HR")
        malformed(origin, ln, "expected 'HR' section");

    while (ln < lines.size() && lines[ln] != "IBI") {
        const std::string& tok = lines[ln++];
        double bpm;
        if (!parse_double(tok, bpm))
            malformed(origin, ln, "bad HR sample '" + tok + "'");
        if (!std::isfinite(bpm) || bpm <= kHrMinBpm || bpm >= kHrMaxBpm)
            throw Error(ErrorCode::RangeViolation,
                        origin + ":" + std::to_string(ln) + ": hr sample " + format_double(bpm) +
                            " bpm outside (" + format_double(kHrMinBpm) + ", " +
                            format_double(kHrMaxBpm) + ")");
        night.hr.samples.push_back(bpm);
    }
    if (ln >= lines.size())
        malformed(origin, ln + 1, "missing 'IBI' section");
    ++ln; // "IBI"

    std::int64_t prev_t = -1;
    while (ln < lines.size() && lines[ln] != "LABELS") {
        const std::string& row = lines[ln++];
        const auto parts = split(row, ',');
        std::int64_t t_ms;
        double interval;
        if (parts.size() != 2 || !parse_i64(parts[0], t_ms) || !parse_double(parts[1], interval))
            malformed(origin, ln, "bad IBI row '" + row + "'");
        if (t_ms <= prev_t)
            malformed(origin, ln, "IBI timestamps must be strictly increasing");
        if (!std::isfinite(interval) || interval <= kIbiMinMs || interval >= kIbiMaxMs)
            throw Error(ErrorCode::RangeViolation,
                        origin + ":" + std::to_string(ln) + ": ibi " + format_double(interval) +
                            " ms outside (" + format_double(kIbiMinMs) + ", " +
                            format_double(kIbiMaxMs) + ")");
        night.ibi.beats.push_back({t_ms, interval});
        prev_t = t_ms;
    }
    if (ln >= lines.size())
        malformed(origin, ln + 1, "missing 'LABELS' section");
    ++ln; // "LABELS"

    while (ln < lines.size()) {
        const std::string& tok = lines[ln++];
        SleepPhase phase;
        if (!parse_phase(tok, phase))
            malformed(origin, ln, "unknown label '" + tok + "'");
        if (!phase_in_mode(phase, night.class_mode))
            malformed(origin, ln, std::string("label ") + phase_name(phase) + " not allowed in " +
                                      class_mode_name(night.class_mode) + " mode");
        night.labels.push_back(phase);
    }

    const std::size_t expected =
        static_cast<std::size_t>(std::floor(night.hr.duration_s() / kEpochLenS));
    if (night.labels.size() != expected)
        throw Error(ErrorCode::LabelMismatch,
                    origin + ": " + std::to_string(night.labels.size()) + " labels but " +
                        format_double(night.hr.duration_s()) + " s of HR signal (expects " +
                        std::to_string(expected) + ")");
    return night;
}

LabeledNight load_night(const std::string& path) {
    return parse_night(read_file(path), path);
}

std::string night_to_string(const LabeledNight& night) {
    std::string out;
    out.reserve(16 * (night.hr.samples.size() + night.ibi.beats.size() + night.labels.size()) + 128);
    out += "#NIGHT v1\n";
    out += "#SUBJECT " + night.subject_id + "\n";
    out += "#NIGHT_ID " + night.night_id + "\n";
    out += std::string("#CLASSMODE ") + class_mode_name(night.class_mode) + "\n";
    out += "#HR_RATE_HZ " + format_double(night.hr.sample_rate_hz) + "\n";
    out += "HR\n";
    for (double bpm : night.hr.samples) {
        out += format_fixed(bpm, 6);
        out += '\n';
    }
    out += "IBI\n";
    for (const auto& beat : night.ibi.beats) {
        out += std::to_string(beat.t_ms);
        out += ',';
        out += format_fixed(beat.interval_ms, 3);
        out += '\n';
    }
    out += "LABELS\n";
    for (SleepPhase p : night.labels) {
        out += phase_name(p);
        out += '\n';
    }
    return out;
}

void save_night(const LabeledNight& night, const std::string& path) {
    write_file(path, night_to_string(night));
}

std::vector<EpochSlice> epoch_slices(const LabeledNight& night) {
    std::vector<EpochSlice> slices;
    slices.reserve(night.labels.size());
    for (std::size_t k = 0; k < night.labels.size(); ++k)
        slices.push_back({k, static_cast<std::int64_t>(k + 1) * kEpochLenMs, night.labels[k]});
    return slices;
}

} // namespace sleepstack
