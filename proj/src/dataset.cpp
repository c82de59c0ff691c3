#include "sleepstack/dataset.hpp"

#include "sleepstack/errors.hpp"

#include <algorithm>
#include <utility>

namespace sleepstack {

Matrix Dataset::feature_matrix() const {
    Matrix X(rows.size(), kFeatureDim);
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(rows[r].f.begin(), rows[r].f.end(), X.row(r));
    return X;
}

std::vector<int> Dataset::labels() const {
    std::vector<int> y(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) y[r] = rows[r].label;
    return y;
}

Dataset assemble(const std::vector<LabeledNight>& nights, const FeatureConfig& fc, ClassMode mode) {
    if (nights.empty()) throw Error(ErrorCode::EmptyDataset, "no nights to assemble");
    Dataset ds;
    ds.mode = mode;
    for (const auto& night : nights) {
        if (night.class_mode != mode)
            throw Error(ErrorCode::LabelMismatch,
                        "night " + night.night_id + " is " + class_mode_name(night.class_mode) +
                            " but the dataset is " + class_mode_name(mode));
        for (std::size_t e = 0; e < night.labels.size(); ++e) {
            SleepPhase phase = night.labels[e];
            if (mode == ClassMode::Phase3 && phase == SleepPhase::Wake) continue;
            FeatureVector f;
            try {
                f = extract_epoch(night, e, fc);
            } catch (const Error& err) {
                if (err.code() == ErrorCode::InsufficientHistory) {
                    ++ds.skipped_early;
                    continue;
                }
                throw;
            }
            EpochRow row;
            row.subject = night.subject_id;
            row.night = night.night_id;
            row.epoch_index = static_cast<int>(e);
            row.label = class_index(phase, mode);
            row.f = f.values;
            ds.rows.push_back(std::move(row));
        }
    }
    return ds;
}

void dataset_sequences(const Dataset& ds, std::vector<Matrix>* seqs,
                       std::vector<std::vector<int>>* seq_labels,
                       std::vector<std::string>* night_ids) {
    seqs->clear();
    seq_labels->clear();
    if (night_ids != nullptr) night_ids->clear();
    std::size_t r = 0;
    while (r < ds.rows.size()) {
        std::size_t start = r;
        const std::string& subj = ds.rows[start].subject;
        const std::string& night = ds.rows[start].night;
        while (r < ds.rows.size() && ds.rows[r].subject == subj && ds.rows[r].night == night) ++r;
        Matrix seq(r - start, kFeatureDim);
        std::vector<int> y(r - start);
        for (std::size_t i = start; i < r; ++i) {
            std::copy(ds.rows[i].f.begin(), ds.rows[i].f.end(), seq.row(i - start));
            y[i - start] = ds.rows[i].label;
        }
        seqs->push_back(std::move(seq));
        seq_labels->push_back(std::move(y));
        if (night_ids != nullptr) night_ids->push_back(subj + "/" + night);
    }
}

void write_features_csv(const std::string& path, const Dataset& ds, const std::string& scaling) {
    std::string out = "#FEATURES v1\n";
    out += std::string("#CLASSMODE ") + class_mode_name(ds.mode) + "\n";
    out += "#SCALING " + scaling + "\n";
    out += "subject,night,epoch,label," + feature_header() + "\n";
    for (const auto& row : ds.rows) {
        out += row.subject + "," + row.night + "," + std::to_string(row.epoch_index) + "," +
               class_name(row.label, ds.mode);
        for (double v : row.f) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    write_file(path, out);
}

namespace {

[[noreturn]] void malformed(const std::string& origin, std::size_t line_no, const std::string& why) {
    throw Error(ErrorCode::MalformedFile, origin + ":" + std::to_string(line_no) + ": " + why);
}

} // namespace

Dataset read_features_csv(const std::string& path, std::string* scaling) {
    const std::string text = read_file(path);
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    if (lines.size() < 4) throw Error(ErrorCode::MalformedFile, path + ": missing feature header");
    if (lines[0] != "#FEATURES v1") malformed(path, 1, "expected '#FEATURES v1'");
    Dataset ds;
    if (lines[1].rfind("#CLASSMODE ", 0) != 0 || !parse_class_mode(lines[1].substr(11), ds.mode))
        malformed(path, 2, "expected '#CLASSMODE PHASE3|WRN3'");
    if (lines[2].rfind("#SCALING ", 0) != 0) malformed(path, 3, "expected '#SCALING <mode>'");
    std::string scal = lines[2].substr(9);
    if (scal != "none" && scal != "global" && scal != "per-subject")
        malformed(path, 3, "unknown scaling '" + scal + "'");
    if (scaling != nullptr) *scaling = scal;
    const std::string expected_header = "subject,night,epoch,label," + feature_header();
    if (lines[3] != expected_header) malformed(path, 4, "bad column header");

    for (std::size_t ln = 4; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        auto cols = split(lines[ln], ',');
        if (cols.size() != 4 + kFeatureDim)
            malformed(path, ln + 1,
                      "expected " + std::to_string(4 + kFeatureDim) + " columns, got " +
                          std::to_string(cols.size()));
        EpochRow row;
        row.subject = cols[0];
        row.night = cols[1];
        std::int64_t epoch = 0;
        if (!parse_i64(cols[2], epoch) || epoch < 0) malformed(path, ln + 1, "bad epoch index '" + cols[2] + "'");
        row.epoch_index = static_cast<int>(epoch);
        int label = -1;
        for (int c = 0; c < kClassCount; ++c)
            if (cols[3] == class_name(c, ds.mode)) label = c;
        if (label < 0) malformed(path, ln + 1, "unknown label '" + cols[3] + "'");
        row.label = label;
        for (int i = 0; i < kFeatureDim; ++i) {
            double v = 0.0;
            if (!parse_double(cols[static_cast<std::size_t>(4 + i)], v))
                malformed(path, ln + 1, "bad feature value '" + cols[static_cast<std::size_t>(4 + i)] + "'");
            row.f[static_cast<std::size_t>(i)] = v;
        }
        ds.rows.push_back(std::move(row));
    }
    return ds;
}

std::vector<LabeledNight> load_nights(const std::vector<std::string>& paths) {
    if (paths.empty()) throw Error(ErrorCode::EmptyDataset, "no night files given");
    std::vector<LabeledNight> nights;
    nights.reserve(paths.size());
    for (const auto& p : paths) nights.push_back(load_night(p));
    return nights;
}

} // namespace sleepstack
