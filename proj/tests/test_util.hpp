#pragma once

// shared fixtures: scratch directories and tiny hand-built nights

#include "sleepstack/signals.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

namespace testutil {

// unique scratch dir under the system temp root, wiped on destruction
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        namespace fs = std::filesystem;
        static int counter = 0;
        path_ = (fs::temp_directory_path() /
                 ("sleepstack_" + tag + "_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++)))
                    .string();
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const { return path_ + "/" + name; }

private:
    std::string path_;
};

// constant-HR night: `epochs` labels, HR at 1 Hz, IBIs every ibi_ms
inline sleepstack::LabeledNight flat_night(const std::vector<sleepstack::SleepPhase>& labels,
                                           double hr_bpm = 60.0, double ibi_ms = 1000.0,
                                           sleepstack::ClassMode mode = sleepstack::ClassMode::Phase3,
                                           const std::string& subject = "s01",
                                           const std::string& night = "n01") {
    sleepstack::LabeledNight n;
    n.subject_id = subject;
    n.night_id = night;
    n.class_mode = mode;
    n.labels = labels;
    n.hr.sample_rate_hz = 1.0;
    const std::int64_t dur_ms = static_cast<std::int64_t>(labels.size()) * sleepstack::kEpochLenMs;
    for (std::int64_t t = 0; t * 1000 < dur_ms; ++t) n.hr.samples.push_back(hr_bpm);
    for (double t = ibi_ms; t < static_cast<double>(dur_ms); t += ibi_ms)
        n.ibi.beats.push_back({static_cast<std::int64_t>(t), ibi_ms});
    return n;
}

} // namespace testutil
