#include "sleepstack/eval.hpp"

#include "sleepstack/baselines.hpp"
#include "sleepstack/errors.hpp"
#include "sleepstack/stacking.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <utility>

namespace sleepstack {

long ConfusionMatrix::total() const {
    long n = 0;
    for (const auto& row : counts)
        for (long v : row) n += v;
    return n;
}

long ConfusionMatrix::row_sum(int ref_class) const {
    long n = 0;
    for (long v : counts[static_cast<std::size_t>(ref_class)]) n += v;
    return n;
}

ScoreResult score(const std::vector<int>& ref, const std::vector<int>& pred, ClassMode mode) {
    if (ref.size() != pred.size())
        throw Error(ErrorCode::LengthMismatch,
                    std::to_string(ref.size()) + " reference vs " + std::to_string(pred.size()) +
                        " predicted labels");
    if (ref.empty()) throw Error(ErrorCode::EmptyInput, "no labels to score");

    ScoreResult result;
    result.confusion.mode = mode;
    result.metrics.mode = mode;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        if (ref[i] < 0 || ref[i] >= kClassCount || pred[i] < 0 || pred[i] >= kClassCount)
            throw Error(ErrorCode::DimensionMismatch, "label out of class range");
        ++result.confusion.counts[static_cast<std::size_t>(ref[i])][static_cast<std::size_t>(pred[i])];
    }

    double ud = 0.0, uf1 = 0.0;
    for (int c = 0; c < kClassCount; ++c) {
        long tp = result.confusion.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
        long ref_n = result.confusion.row_sum(c);
        long pred_n = 0;
        for (int r = 0; r < kClassCount; ++r)
            pred_n += result.confusion.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        double recall = ref_n > 0 ? static_cast<double>(tp) / static_cast<double>(ref_n) : 0.0;
        double prec = pred_n > 0 ? static_cast<double>(tp) / static_cast<double>(pred_n) : 0.0;
        double f1 = (prec + recall) > 0.0 ? 2.0 * prec * recall / (prec + recall) : 0.0;
        if (ref_n == 0)
            result.metrics.warnings.push_back(std::string("class ") + class_name(c, mode) +
                                              " absent from reference; its scores count as 0");
        result.metrics.per_class_d[static_cast<std::size_t>(c)] = recall;
        result.metrics.per_class_f1[static_cast<std::size_t>(c)] = f1;
        ud += recall;
        uf1 += f1;
    }
    result.metrics.ud = ud / kClassCount;
    result.metrics.uf1 = uf1 / kClassCount;
    return result;
}

const char* cv_scheme_name(CvScheme s) {
    return s == CvScheme::LeaveOneNightOut ? "lono" : "ksubject";
}

namespace {

struct NightRows {
    std::string subject;
    std::string night_id;
    std::size_t begin = 0; // row range in the assembled dataset
    std::size_t end = 0;
};

std::vector<NightRows> night_ranges(const Dataset& ds) {
    std::vector<NightRows> ranges;
    std::size_t r = 0;
    while (r < ds.rows.size()) {
        NightRows nr;
        nr.subject = ds.rows[r].subject;
        nr.night_id = ds.rows[r].night;
        nr.begin = r;
        while (r < ds.rows.size() && ds.rows[r].subject == nr.subject &&
               ds.rows[r].night == nr.night_id)
            ++r;
        nr.end = r;
        ranges.push_back(std::move(nr));
    }
    return ranges;
}

Matrix gather_rows(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Matrix X(idx.size(), kFeatureDim);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(ds.rows[idx[i]].f.begin(), ds.rows[idx[i]].f.end(), X.row(i));
    return X;
}

} // namespace

CvReport cross_validate(const std::vector<LabeledNight>& nights, const ModelBuilder& builder,
                        const CvConfig& cfg) {
    if (nights.size() < 2)
        throw Error(ErrorCode::InsufficientData, "cross-validation needs at least 2 nights");
    ClassMode mode = nights.front().class_mode;
    return cross_validate(assemble(nights, cfg.features, mode), builder, cfg);
}

CvReport cross_validate(const Dataset& ds, const ModelBuilder& builder, const CvConfig& cfg) {
    if (ds.rows.empty()) throw Error(ErrorCode::InsufficientData, "no usable epochs in the corpus");
    ClassMode mode = ds.mode;
    auto ranges = night_ranges(ds);
    if (ranges.size() < 2)
        throw Error(ErrorCode::InsufficientData, "cross-validation needs at least 2 nights");

    // fold id per night
    std::vector<int> night_fold(ranges.size(), -1);
    int folds = 0;
    if (cfg.scheme == CvScheme::LeaveOneNightOut) {
        folds = static_cast<int>(ranges.size());
        for (std::size_t i = 0; i < ranges.size(); ++i) night_fold[i] = static_cast<int>(i);
    } else {
        if (cfg.k < 2) throw Error(ErrorCode::UsageError, "by-subject folds need k >= 2");
        std::set<std::string> subject_set;
        for (const auto& nr : ranges) subject_set.insert(nr.subject);
        std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
        if (static_cast<int>(subjects.size()) < cfg.k)
            throw Error(ErrorCode::InsufficientData,
                        std::to_string(subjects.size()) + " subjects cannot fill " +
                            std::to_string(cfg.k) + " folds");
        Rng rng(derive_seed(cfg.seed, "cv-folds"));
        rng.shuffle(subjects);
        std::map<std::string, int> fold_of;
        for (std::size_t i = 0; i < subjects.size(); ++i)
            fold_of[subjects[i]] = static_cast<int>(i % static_cast<std::size_t>(cfg.k));
        folds = cfg.k;
        for (std::size_t i = 0; i < ranges.size(); ++i) night_fold[i] = fold_of[ranges[i].subject];
    }

    CvReport report;
    report.scheme = cfg.scheme;
    report.mode = mode;
    report.scaling = cfg.scaling;
    report.folds.resize(static_cast<std::size_t>(folds));

    std::vector<std::size_t> all_rows(ds.rows.size());
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
    std::vector<std::string> all_subjects(ds.rows.size());
    for (std::size_t i = 0; i < ds.rows.size(); ++i) all_subjects[i] = ds.rows[i].subject;

    parallel_for(static_cast<std::size_t>(folds), cfg.threads, [&](std::size_t f) {
        std::vector<std::size_t> train_idx;
        std::vector<const NightRows*> test_nights;
        for (std::size_t n = 0; n < ranges.size(); ++n) {
            if (night_fold[n] == static_cast<int>(f)) {
                test_nights.push_back(&ranges[n]);
            } else {
                for (std::size_t r = ranges[n].begin; r < ranges[n].end; ++r) train_idx.push_back(r);
            }
        }
        if (train_idx.empty() || test_nights.empty())
            throw Error(ErrorCode::InsufficientData,
                        "fold " + std::to_string(f) + " has an empty train or test side");

        Matrix Xtrain_raw = gather_rows(ds, train_idx);
        std::vector<std::string> train_subjects;
        std::vector<int> ytrain;
        train_subjects.reserve(train_idx.size());
        for (std::size_t r : train_idx) {
            train_subjects.push_back(ds.rows[r].subject);
            ytrain.push_back(ds.rows[r].label);
        }

        Scaler train_only = fit_scaler(Xtrain_raw, train_subjects, cfg.scaling);
        Scaler used = cfg.leak_scaler_for_testing
                          ? fit_scaler(gather_rows(ds, all_rows), all_subjects, cfg.scaling)
                          : train_only;

        Matrix Xtrain = apply_scaler(used, train_subjects, Xtrain_raw);

        // regroup scaled train rows into per-night sequences
        std::vector<Matrix> seqs;
        std::vector<std::vector<int>> seq_y;
        for (std::size_t n = 0; n < ranges.size(); ++n) {
            if (night_fold[n] == static_cast<int>(f)) continue;
            const auto& nr = ranges[n];
            Matrix seq(nr.end - nr.begin, kFeatureDim);
            std::vector<int> y(nr.end - nr.begin);
            for (std::size_t r = nr.begin; r < nr.end; ++r) {
                FeatureVector fv;
                std::copy(ds.rows[r].f.begin(), ds.rows[r].f.end(), fv.values.begin());
                FeatureVector scaled = apply_scaler(used, ds.rows[r].subject, fv);
                std::copy(scaled.values.begin(), scaled.values.end(), seq.row(r - nr.begin));
                y[r - nr.begin] = ds.rows[r].label;
            }
            seqs.push_back(std::move(seq));
            seq_y.push_back(std::move(y));
        }

        TrainInputs inputs{Xtrain, ytrain, seqs, seq_y,
                           derive_seed(cfg.seed, "fold:" + std::to_string(f))};
        NightClassifier clf = builder(inputs);

        std::vector<int> refs, preds;
        for (const NightRows* nr : test_nights) {
            std::vector<std::size_t> rows_idx;
            for (std::size_t r = nr->begin; r < nr->end; ++r) rows_idx.push_back(r);
            Matrix raw = gather_rows(ds, rows_idx);
            Scaler night_scaler = used;
            if (cfg.scaling == ScalingMode::PerSubjectZscore && !night_scaler.has_subject(nr->subject))
                fit_subject_stats(night_scaler, nr->subject, raw);
            std::vector<std::string> subj(rows_idx.size(), nr->subject);
            Matrix scaled = apply_scaler(night_scaler, subj, raw);
            std::vector<int> p = clf.predict_seq(scaled);
            if (p.size() != rows_idx.size())
                throw Error(ErrorCode::DimensionMismatch, "classifier returned wrong label count");
            for (std::size_t i = 0; i < rows_idx.size(); ++i) {
                refs.push_back(ds.rows[rows_idx[i]].label);
                preds.push_back(p[i]);
            }
        }

        ScoreResult sr = score(refs, preds, mode);
        FoldResult& out = report.folds[f];
        out.fold = static_cast<int>(f);
        for (const NightRows* nr : test_nights) out.test_nights.push_back(nr->night_id);
        out.metrics = sr.metrics;
        out.confusion = sr.confusion;
        out.scaler_checksum = used.checksum();
        out.train_only_checksum = train_only.checksum();
    });

    std::vector<double> uds, uf1s;
    for (const auto& fr : report.folds) {
        uds.push_back(fr.metrics.ud);
        uf1s.push_back(fr.metrics.uf1);
        if (fr.scaler_checksum != fr.train_only_checksum) report.scaler_leak_detected = true;
    }
    report.ud_mean = mean_of(uds);
    report.ud_std = population_std(uds);
    report.uf1_mean = mean_of(uf1s);
    report.uf1_std = population_std(uf1s);
    return report;
}

namespace {

std::vector<int> predict_rows_argmax(const DenseNet& net, const Matrix& seq) {
    std::vector<int> out(seq.rows);
    for (std::size_t r = 0; r < seq.rows; ++r) {
        auto p = forward(net, std::span<const double>(seq.row(r), seq.cols), RunMode::Infer);
        out[r] = argmax_lowest(p);
    }
    return out;
}

} // namespace

ModelBuilder make_stack_builder(const TrainConfig& cfg, ClassMode mode, int folds) {
    return [cfg, mode, folds](const TrainInputs& in) {
        TrainConfig sub = cfg;
        sub.seed = in.seed;
        auto model = std::make_shared<StackModel>(train_stack(in.X, in.y, sub, folds, mode, 1));
        NightClassifier clf;
        clf.predict_seq = [model](const Matrix& seq) {
            std::vector<int> out(seq.rows);
            for (std::size_t r = 0; r < seq.rows; ++r)
                out[r] = predict_stack(*model, std::span<const double>(seq.row(r), seq.cols)).class_index;
            return out;
        };
        return clf;
    };
}

ModelBuilder make_ann_big_builder(const TrainConfig& cfg) {
    return [cfg](const TrainInputs& in) {
        TrainConfig sub = cfg;
        sub.seed = in.seed;
        auto net = std::make_shared<DenseNet>(build_ann_big());
        train(*net, in.X, in.y, sub);
        NightClassifier clf;
        clf.predict_seq = [net](const Matrix& seq) { return predict_rows_argmax(*net, seq); };
        return clf;
    };
}

ModelBuilder make_base_ann_builder(const TrainConfig& cfg, int base_index) {
    return [cfg, base_index](const TrainInputs& in) {
        TrainConfig sub = cfg;
        sub.seed = derive_seed(in.seed, "base:" + std::to_string(base_index));
        auto net = std::make_shared<DenseNet>(make_base_ann(base_index));
        train(*net, in.X, in.y, sub);
        NightClassifier clf;
        clf.predict_seq = [net](const Matrix& seq) { return predict_rows_argmax(*net, seq); };
        return clf;
    };
}

ModelBuilder make_lstm_builder(const TrainConfig& cfg, int truncation) {
    return [cfg, truncation](const TrainInputs& in) {
        TrainConfig sub = cfg;
        sub.seed = in.seed;
        auto net = std::make_shared<LstmNet>(make_lstm_baseline());
        lstm_train(*net, in.seqs, in.seq_y, sub, truncation);
        NightClassifier clf;
        clf.predict_seq = [net](const Matrix& seq) {
            Matrix p = lstm_forward(*net, seq);
            std::vector<int> out(p.rows);
            for (std::size_t r = 0; r < p.rows; ++r)
                out[r] = argmax_lowest(std::span<const double>(p.row(r), p.cols));
            return out;
        };
        return clf;
    };
}

namespace {

// step-plot points: one polyline per trace, y is the class row
std::string step_points(const std::vector<int>& labels, double x0, double step_w, double y_top,
                        double row_h, double dy) {
    std::string pts;
    auto add = [&](double x, double y) {
        if (!pts.empty()) pts += ' ';
        pts += format_fixed(x, 1) + "," + format_fixed(y, 1);
    };
    auto ylevel = [&](int c) { return y_top + row_h * static_cast<double>(c) + dy; };
    add(x0, ylevel(labels[0]));
    for (std::size_t e = 1; e < labels.size(); ++e) {
        if (labels[e] != labels[e - 1]) {
            double x = x0 + step_w * static_cast<double>(e);
            add(x, ylevel(labels[e - 1]));
            add(x, ylevel(labels[e]));
        }
    }
    add(x0 + step_w * static_cast<double>(labels.size()), ylevel(labels.back()));
    return pts;
}

} // namespace

std::string hypnogram_svg(const std::vector<int>& ref, const std::vector<int>& pred, ClassMode mode) {
    if (ref.size() != pred.size())
        throw Error(ErrorCode::LengthMismatch, "reference and prediction lengths differ");
    if (ref.empty()) throw Error(ErrorCode::EmptyInput, "nothing to plot");
    for (std::size_t i = 0; i < ref.size(); ++i)
        if (ref[i] < 0 || ref[i] >= kClassCount || pred[i] < 0 || pred[i] >= kClassCount)
            throw Error(ErrorCode::DimensionMismatch, "label out of class range");

    const double ml = 70.0, mr = 20.0, mt = 40.0, mb = 50.0;
    const double row_h = 40.0;
    const double plot_h = row_h * (kClassCount - 1) + 20.0;
    double n = static_cast<double>(ref.size());
    double step_w = std::min(12.0, std::max(1.0, 1000.0 / n));
    double plot_w = step_w * n;
    double width = ml + plot_w + mr;
    double height = mt + plot_h + mb;
    double y_top = mt + 10.0;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_fixed(width, 0) +
           "\" height=\"" + format_fixed(height, 0) + "\" viewBox=\"0 0 " + format_fixed(width, 0) +
           " " + format_fixed(height, 0) + "\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + format_fixed(width, 0) + "\" height=\"" +
           format_fixed(height, 0) + "\" fill=\"#ffffff\"/>\n";
    svg += "<text x=\"" + format_fixed(ml, 1) + "\" y=\"22\" font-family=\"monospace\" font-size=\"14\">"
           "hypnogram: reference (blue) vs predicted (red), 30 s per step</text>\n";

    // y grid: one labeled line per class
    for (int c = 0; c < kClassCount; ++c) {
        double y = y_top + row_h * static_cast<double>(c);
        svg += "<line x1=\"" + format_fixed(ml, 1) + "\" y1=\"" + format_fixed(y, 1) + "\" x2=\"" +
               format_fixed(ml + plot_w, 1) + "\" y2=\"" + format_fixed(y, 1) +
               "\" stroke=\"#dddddd\"/>\n";
        svg += "<text x=\"6\" y=\"" + format_fixed(y + 4.0, 1) +
               "\" font-family=\"monospace\" font-size=\"12\">" + class_name(c, mode) + "</text>\n";
    }
    // x axis with minute ticks every 20 epochs (10 min)
    double y_axis = y_top + row_h * (kClassCount - 1) + 10.0;
    svg += "<line x1=\"" + format_fixed(ml, 1) + "\" y1=\"" + format_fixed(y_axis, 1) + "\" x2=\"" +
           format_fixed(ml + plot_w, 1) + "\" y2=\"" + format_fixed(y_axis, 1) +
           "\" stroke=\"#000000\"/>\n";
    for (std::size_t e = 0; e <= ref.size(); e += 20) {
        double x = ml + step_w * static_cast<double>(e);
        svg += "<line x1=\"" + format_fixed(x, 1) + "\" y1=\"" + format_fixed(y_axis, 1) + "\" x2=\"" +
               format_fixed(x, 1) + "\" y2=\"" + format_fixed(y_axis + 5.0, 1) +
               "\" stroke=\"#000000\"/>\n";
        svg += "<text x=\"" + format_fixed(x - 8.0, 1) + "\" y=\"" + format_fixed(y_axis + 18.0, 1) +
               "\" font-family=\"monospace\" font-size=\"11\">" +
               format_double(static_cast<double>(e) * 0.5) + "</text>\n";
    }
    svg += "<text x=\"" + format_fixed(ml + plot_w / 2.0 - 30.0, 1) + "\" y=\"" +
           format_fixed(y_axis + 36.0, 1) +
           "\" font-family=\"monospace\" font-size=\"12\">minutes</text>\n";

    svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" +
           step_points(ref, ml, step_w, y_top, row_h, 0.0) + "\"/>\n";
    svg += "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"" +
           step_points(pred, ml, step_w, y_top, row_h, 4.0) + "\"/>\n";
    svg += "</svg>\n";
    return svg;
}

std::string hypnogram_text(const std::vector<int>& ref, const std::vector<int>& pred, ClassMode mode) {
    if (ref.size() != pred.size())
        throw Error(ErrorCode::LengthMismatch, "reference and prediction lengths differ");
    std::string out = "ref  ";
    for (int c : ref) out += class_name(c, mode)[0];
    out += "\npred ";
    for (int c : pred) out += class_name(c, mode)[0];
    out += '\n';
    return out;
}

void render_hypnogram(const std::vector<int>& ref, const std::vector<int>& pred, ClassMode mode,
                      const std::string& svg_path) {
    write_file(svg_path, hypnogram_svg(ref, pred, mode));
    std::string txt_path = svg_path;
    if (txt_path.size() > 4 && txt_path.substr(txt_path.size() - 4) == ".svg")
        txt_path = txt_path.substr(0, txt_path.size() - 4) + ".txt";
    else
        txt_path += ".txt";
    write_file(txt_path, hypnogram_text(ref, pred, mode));
}

namespace {

nlohmann::json metrics_to_json(const MetricReport& m) {
    nlohmann::json per_class = nlohmann::json::array();
    for (int c = 0; c < kClassCount; ++c) {
        per_class.push_back({{"class", class_name(c, m.mode)},
                             {"d", m.per_class_d[static_cast<std::size_t>(c)]},
                             {"f1", m.per_class_f1[static_cast<std::size_t>(c)]}});
    }
    nlohmann::json j{{"per_class", per_class}, {"ud", m.ud}, {"uf1", m.uf1}};
    if (!m.warnings.empty()) j["warnings"] = m.warnings;
    return j;
}

nlohmann::json confusion_to_json(const ConfusionMatrix& cm) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < kClassCount; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < kClassCount; ++c)
            row.push_back(cm.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
        rows.push_back(row);
    }
    return {{"rows_are_reference", true}, {"counts", rows}};
}

} // namespace

std::string score_json(const ScoreResult& result) {
    nlohmann::json j = metrics_to_json(result.metrics);
    j["format_version"] = 1;
    j["class_mode"] = class_mode_name(result.metrics.mode);
    j["confusion"] = confusion_to_json(result.confusion);
    return j.dump(2) + "\n";
}

std::string cv_report_json(const CvReport& report) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& fr : report.folds) {
        nlohmann::json f = metrics_to_json(fr.metrics);
        f["fold"] = fr.fold;
        f["test_nights"] = fr.test_nights;
        f["confusion"] = confusion_to_json(fr.confusion);
        folds.push_back(f);
    }
    nlohmann::json j{{"format_version", 1},
                     {"scheme", cv_scheme_name(report.scheme)},
                     {"class_mode", class_mode_name(report.mode)},
                     {"scaling", scaling_mode_name(report.scaling)},
                     {"ud", {{"mean", report.ud_mean}, {"std", report.ud_std}}},
                     {"uf1", {{"mean", report.uf1_mean}, {"std", report.uf1_std}}},
                     {"scaler_leak_detected", report.scaler_leak_detected},
                     {"folds", folds}};
    return j.dump(2) + "\n";
}

std::string cv_report_table(const CvReport& report) {
    std::string out;
    out += "fold  test nights                     UD      UF1\n";
    for (const auto& fr : report.folds) {
        std::string nights;
        for (std::size_t i = 0; i < fr.test_nights.size(); ++i) {
            if (i > 0) nights += ',';
            if (nights.size() > 28) {
                nights += "...";
                break;
            }
            nights += fr.test_nights[i];
        }
        char line[128];
        std::snprintf(line, sizeof(line), "%-5d %-30s %7.4f %7.4f\n", fr.fold, nights.c_str(),
                      fr.metrics.ud, fr.metrics.uf1);
        out += line;
    }
    char tail[160];
    std::snprintf(tail, sizeof(tail), "mean  %-30s %7.4f %7.4f\nstd   %-30s %7.4f %7.4f\n", "",
                  report.ud_mean, report.uf1_mean, "", report.ud_std, report.uf1_std);
    out += tail;
    if (report.scaler_leak_detected) out += "WARNING: scaler leak detected (fit included test rows)\n";
    return out;
}

} // namespace sleepstack
