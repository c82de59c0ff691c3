// command line front end: synth -> features -> train -> eval/infer, plus the
// memory report. stdout carries machine-readable results, stderr the resolved
// config and progress notes, so piping stdout stays clean.

#include <CLI11.hpp>
#include <json.hpp>

#include "sleepstack/baselines.hpp"
#include "sleepstack/budget.hpp"
#include "sleepstack/bundle.hpp"
#include "sleepstack/dataset.hpp"
#include "sleepstack/errors.hpp"
#include "sleepstack/eval.hpp"
#include "sleepstack/features.hpp"
#include "sleepstack/signals.hpp"
#include "sleepstack/stacking.hpp"
#include "sleepstack/synth.hpp"
#include "sleepstack/util.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sleepstack;

namespace {

bool is_arch_name(const std::string& s) {
    return s == "stacking" || s == "ann-big" || s == "lstm" || s == "base-ann";
}

void log_line(const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); }

// result goes to stdout, optionally mirrored to a file
void emit(const std::string& text, const std::string& out_path) {
    std::string body = text;
    if (body.empty() || body.back() != '\n') body += '\n';
    std::fputs(body.c_str(), stdout);
    if (!out_path.empty()) write_file(out_path, body);
}

ClassMode parse_mode_flag(const std::string& name) {
    ClassMode mode;
    if (!parse_class_mode(name, mode))
        throw Error(ErrorCode::UsageError, "unknown class mode '" + name + "'");
    return mode;
}

ScalingMode parse_scaling_flag(const std::string& name) {
    ScalingMode mode;
    if (!parse_scaling_mode(name, mode))
        throw Error(ErrorCode::UsageError, "unknown scaling mode '" + name + "'");
    return mode;
}

// night files of a corpus directory: manifest order when present, otherwise
// sorted *.csv
std::vector<std::string> corpus_paths(const std::string& dir) {
    fs::path d(dir);
    if (!fs::is_directory(d)) throw Error(ErrorCode::IoError, dir + " is not a directory");
    std::vector<std::string> paths;
    fs::path manifest = d / "manifest.json";
    if (fs::exists(manifest)) {
        try {
            nlohmann::json j = nlohmann::json::parse(read_file(manifest.string()));
            for (const auto& f : j.at("files"))
                paths.push_back((d / f.at("file").get<std::string>()).string());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedFile,
                        manifest.string() + ": " + std::string(e.what()));
        }
    } else {
        for (const auto& entry : fs::directory_iterator(d))
            if (entry.path().extension() == ".csv") paths.push_back(entry.path().string());
        std::sort(paths.begin(), paths.end());
    }
    if (paths.empty()) throw Error(ErrorCode::EmptyDataset, "no night files in " + dir);
    return paths;
}

Dataset read_raw_features(const std::string& path, const char* who) {
    std::string scaling;
    Dataset ds = read_features_csv(path, &scaling);
    if (scaling != "none")
        throw Error(ErrorCode::UsageError, std::string(who) + " fits its own scaler and needs an "
                                                             "unscaled feature file, got scaling=" +
                                               scaling);
    if (ds.rows.empty()) throw Error(ErrorCode::EmptyDataset, "no rows in " + path);
    return ds;
}

std::vector<std::string> row_subjects(const Dataset& ds) {
    std::vector<std::string> s;
    s.reserve(ds.rows.size());
    for (const auto& row : ds.rows) s.push_back(row.subject);
    return s;
}

void scale_rows(Dataset& ds, const Scaler& scaler) {
    for (auto& row : ds.rows) apply_scaler_row(scaler, row.subject, row.f.data(), row.f.data());
}

struct NightSpan {
    std::string subject;
    std::string night;
    std::size_t begin = 0;
    std::size_t end = 0;
};

std::vector<NightSpan> night_spans(const Dataset& ds) {
    std::vector<NightSpan> spans;
    std::size_t r = 0;
    while (r < ds.rows.size()) {
        NightSpan sp;
        sp.subject = ds.rows[r].subject;
        sp.night = ds.rows[r].night;
        sp.begin = r;
        while (r < ds.rows.size() && ds.rows[r].subject == sp.subject &&
               ds.rows[r].night == sp.night)
            ++r;
        sp.end = r;
        spans.push_back(std::move(sp));
    }
    return spans;
}

// a trained bundle pulled back into whichever model type it holds
struct LoadedModel {
    std::string kind;
    ClassMode mode = ClassMode::Phase3;
    Scaler scaler;
    StackModel stack;
    DenseNet dense;
    LstmNet lstm;
};

LoadedModel load_model(const std::string& path) {
    if (!fs::exists(path))
        throw Error(ErrorCode::UsageError,
                    "--model wants a bundle file or one of stacking|ann-big|lstm|base-ann, got '" +
                        path + "'");
    Bundle b = read_bundle(path);
    LoadedModel m;
    m.kind = b.kind;
    m.mode = b.mode;
    m.scaler = b.scaler;
    if (b.kind == "stacking")
        m.stack = stack_from_bundle(b);
    else if (b.kind == "lstm")
        m.lstm = lstm_from_bundle(b);
    else
        m.dense = dense_from_bundle(b);
    return m;
}

std::vector<int> predict_night(const LoadedModel& m, const Matrix& seq) {
    std::vector<int> out(seq.rows);
    if (m.kind == "stacking") {
        for (std::size_t r = 0; r < seq.rows; ++r)
            out[r] = predict_stack(m.stack, std::span<const double>(seq.row(r), seq.cols)).class_index;
    } else if (m.kind == "lstm") {
        Matrix probs = lstm_forward(m.lstm, seq);
        for (std::size_t r = 0; r < seq.rows; ++r)
            out[r] = argmax_lowest(std::span<const double>(probs.row(r), probs.cols));
    } else {
        for (std::size_t r = 0; r < seq.rows; ++r) {
            auto p = forward(m.dense, std::span<const double>(seq.row(r), seq.cols), RunMode::Infer);
            out[r] = argmax_lowest(p);
        }
    }
    return out;
}

// scale one night with the model's scaler, self-fitting stats for a subject
// the scaler has never seen (per-subject mode only)
Matrix scale_night(const LoadedModel& m, const NightSpan& sp, const Dataset& ds) {
    Matrix raw(sp.end - sp.begin, kFeatureDim);
    for (std::size_t r = sp.begin; r < sp.end; ++r)
        std::copy(ds.rows[r].f.begin(), ds.rows[r].f.end(), raw.row(r - sp.begin));
    Scaler s = m.scaler;
    if (s.mode == ScalingMode::PerSubjectZscore && !s.has_subject(sp.subject))
        fit_subject_stats(s, sp.subject, raw);
    std::vector<std::string> subj(raw.rows, sp.subject);
    return apply_scaler(s, subj, raw);
}

nlohmann::json history_json(const TrainHistory& h) {
    return {{"epochs_run", h.epochs_run},
            {"best_epoch", h.best_epoch},
            {"early_stopped", h.early_stopped},
            {"best_val_loss", h.best_val_loss},
            {"final_train_loss", h.train_loss.empty() ? 0.0 : h.train_loss.back()}};
}

// ---- synth ----

struct SynthOpts {
    std::string out;
    int subjects = 24;
    int nights = 31;
    double duration_min = 380.0;
    std::string mode = "phase3";
    double offset_bpm = 8.0;
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

int cmd_synth(const SynthOpts& o) {
    CorpusSpec spec;
    spec.subjects = o.subjects;
    spec.nights = o.nights;
    spec.duration_min = o.duration_min;
    spec.mode = parse_mode_flag(o.mode);
    spec.subject_offset_bpm = o.offset_bpm;
    spec.threads = o.threads;
    log_line("config: command=synth out=" + o.out + " subjects=" + std::to_string(o.subjects) +
             " nights=" + std::to_string(o.nights) + " duration-min=" +
             format_double(o.duration_min) + " mode=" + o.mode + " offset-bpm=" +
             format_double(o.offset_bpm) + " seed=" + std::to_string(o.seed) +
             " threads=" + std::to_string(o.threads));
    std::string manifest = gen_corpus(default_phase_model(), spec, o.out, o.seed);
    emit(manifest, "");
    return 0;
}

// ---- features ----

struct FeaturesOpts {
    std::string in_dir;
    std::string out;
    std::string scaling = "none";
};

int cmd_features(const FeaturesOpts& o) {
    log_line("config: command=features in=" + o.in_dir + " out=" + o.out +
             " scaling=" + o.scaling);
    auto nights = load_nights(corpus_paths(o.in_dir));
    ClassMode mode = nights.front().class_mode;
    Dataset ds = assemble(nights, FeatureConfig{}, mode);
    if (ds.rows.empty())
        throw Error(ErrorCode::InsufficientData, "no usable epochs in " + o.in_dir);
    if (o.scaling != "none") {
        Scaler scaler = fit_scaler(ds.feature_matrix(), row_subjects(ds), parse_scaling_flag(o.scaling));
        scale_rows(ds, scaler);
    }
    write_features_csv(o.out, ds, o.scaling);
    nlohmann::json j{{"format_version", 1},
                     {"nights", nights.size()},
                     {"rows", ds.rows.size()},
                     {"skipped_early", ds.skipped_early},
                     {"class_mode", class_mode_name(mode)},
                     {"scaling", o.scaling},
                     {"out", o.out}};
    emit(j.dump(2), "");
    return 0;
}

// ---- train ----

struct TrainOpts {
    std::string model;
    std::string features;
    std::string out;
    std::string scaling = "global";
    double lr = 0.001;
    int batch = 32;
    int epochs = 50;
    int patience = 10;
    double val_fraction = 0.15;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    int folds = 5;
    int base_index = 0;
    int truncation = 64;
};

TrainConfig fit_config(const TrainOpts& o) {
    TrainConfig cfg;
    cfg.lr = o.lr;
    cfg.batch_size = o.batch;
    cfg.max_epochs = o.epochs;
    cfg.patience = o.patience;
    cfg.validation_fraction = o.val_fraction;
    cfg.seed = o.seed;
    cfg.validate();
    return cfg;
}

int cmd_train(const TrainOpts& o) {
    log_line("config: command=train model=" + o.model + " features=" + o.features + " out=" +
             o.out + " scaling=" + o.scaling + " lr=" + format_double(o.lr) + " batch=" +
             std::to_string(o.batch) + " epochs=" + std::to_string(o.epochs) + " patience=" +
             std::to_string(o.patience) + " val-fraction=" + format_double(o.val_fraction) +
             " seed=" + std::to_string(o.seed) + " threads=" + std::to_string(o.threads));
    Dataset ds = read_raw_features(o.features, "train");
    ScalingMode sm = parse_scaling_flag(o.scaling);
    Scaler scaler = fit_scaler(ds.feature_matrix(), row_subjects(ds), sm);
    scale_rows(ds, scaler);
    TrainConfig cfg = fit_config(o);

    nlohmann::json j{{"format_version", 1},
                     {"model", o.model},
                     {"class_mode", class_mode_name(ds.mode)},
                     {"scaling", o.scaling},
                     {"rows", ds.rows.size()},
                     {"out", o.out}};
    Bundle bundle;
    if (o.model == "stacking") {
        StackModel m =
            train_stack(ds.feature_matrix(), ds.labels(), cfg, o.folds, ds.mode, o.threads);
        bundle = make_stack_bundle(m, scaler);
        j["params"] = budget_report(m).params;
    } else if (o.model == "ann-big" || o.model == "base-ann") {
        DenseNet net = o.model == "ann-big" ? build_ann_big() : make_base_ann(o.base_index);
        TrainHistory h = train(net, ds.feature_matrix(), ds.labels(), cfg);
        bundle = make_dense_bundle(o.model, net, scaler, ds.mode);
        j["params"] = param_count(net);
        j["history"] = history_json(h);
    } else {
        std::vector<Matrix> seqs;
        std::vector<std::vector<int>> seq_y;
        dataset_sequences(ds, &seqs, &seq_y);
        LstmNet net = make_lstm_baseline();
        TrainHistory h = lstm_train(net, seqs, seq_y, cfg, o.truncation);
        bundle = make_lstm_bundle(net, scaler, ds.mode);
        j["params"] = lstm_param_count(net);
        j["history"] = history_json(h);
    }
    write_bundle(o.out, bundle);
    emit(j.dump(2), "");
    return 0;
}

// ---- eval ----

struct EvalOpts {
    std::string model;
    std::string features;
    std::string scheme = "lono";
    int k = 6;
    std::string scaling = "global";
    std::string out;
    double lr = 0.001;
    int batch = 32;
    int epochs = 50;
    int patience = 10;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    int folds = 5;
    int base_index = 0;
    int truncation = 64;
};

int cmd_eval(const EvalOpts& o) {
    if (is_arch_name(o.model)) {
        // cross-validated retraining of a named architecture
        log_line("config: command=eval model=" + o.model + " features=" + o.features +
                 " scheme=" + o.scheme + " k=" + std::to_string(o.k) + " scaling=" + o.scaling +
                 " lr=" + format_double(o.lr) + " batch=" + std::to_string(o.batch) + " epochs=" +
                 std::to_string(o.epochs) + " patience=" + std::to_string(o.patience) + " seed=" +
                 std::to_string(o.seed) + " threads=" + std::to_string(o.threads));
        Dataset ds = read_raw_features(o.features, "eval");
        TrainConfig tc;
        tc.lr = o.lr;
        tc.batch_size = o.batch;
        tc.max_epochs = o.epochs;
        tc.patience = o.patience;
        tc.seed = o.seed;
        tc.validate();
        CvConfig cc;
        cc.scheme = o.scheme == "lono" ? CvScheme::LeaveOneNightOut : CvScheme::KFoldBySubject;
        cc.k = o.k;
        cc.scaling = parse_scaling_flag(o.scaling);
        cc.seed = o.seed;
        cc.threads = o.threads;
        ModelBuilder builder;
        if (o.model == "stacking")
            builder = make_stack_builder(tc, ds.mode, o.folds);
        else if (o.model == "ann-big")
            builder = make_ann_big_builder(tc);
        else if (o.model == "base-ann")
            builder = make_base_ann_builder(tc, o.base_index);
        else
            builder = make_lstm_builder(tc, o.truncation);
        CvReport rep = cross_validate(ds, builder, cc);
        std::fputs(cv_report_table(rep).c_str(), stderr);
        emit(cv_report_json(rep), o.out);
        return 0;
    }

    // stored bundle scored directly on the given features
    log_line("config: command=eval model=" + o.model + " features=" + o.features +
             " (stored bundle; scheme/training flags unused)");
    LoadedModel m = load_model(o.model);
    Dataset ds = read_raw_features(o.features, "eval");
    if (ds.mode != m.mode)
        throw Error(ErrorCode::LabelMismatch,
                    std::string("model is ") + class_mode_name(m.mode) + ", features are " +
                        class_mode_name(ds.mode));
    std::vector<int> refs, preds;
    for (const auto& sp : night_spans(ds)) {
        Matrix scaled = scale_night(m, sp, ds);
        std::vector<int> p = predict_night(m, scaled);
        for (std::size_t i = 0; i < p.size(); ++i) {
            refs.push_back(ds.rows[sp.begin + i].label);
            preds.push_back(p[i]);
        }
    }
    ScoreResult sr = score(refs, preds, ds.mode);
    for (const auto& w : sr.metrics.warnings) log_line("warning: " + w);
    emit(score_json(sr), o.out);
    return 0;
}

// ---- infer ----

struct InferOpts {
    std::string model;
    std::string night;
    std::string hypnogram;
    std::string out;
};

int cmd_infer(const InferOpts& o) {
    log_line("config: command=infer model=" + o.model + " night=" + o.night +
             (o.hypnogram.empty() ? "" : " hypnogram=" + o.hypnogram));
    LoadedModel m = load_model(o.model);
    LabeledNight night = load_night(o.night);
    if (night.class_mode != m.mode)
        throw Error(ErrorCode::LabelMismatch,
                    std::string("model is ") + class_mode_name(m.mode) + ", night is " +
                        class_mode_name(night.class_mode));
    Dataset ds = assemble({night}, FeatureConfig{}, m.mode);
    if (ds.rows.empty())
        throw Error(ErrorCode::InsufficientData, "night has no usable epochs");
    auto spans = night_spans(ds);
    Matrix scaled = scale_night(m, spans.front(), ds);
    std::vector<int> preds = predict_night(m, scaled);
    std::vector<int> refs = ds.labels();
    ScoreResult sr = score(refs, preds, m.mode);

    nlohmann::json epochs = nlohmann::json::array();
    for (std::size_t i = 0; i < preds.size(); ++i)
        epochs.push_back({{"epoch", ds.rows[i].epoch_index},
                          {"ref", class_name(refs[i], m.mode)},
                          {"pred", class_name(preds[i], m.mode)}});
    nlohmann::json j{{"format_version", 1},
                     {"subject", night.subject_id},
                     {"night", night.night_id},
                     {"class_mode", class_mode_name(m.mode)},
                     {"model", m.kind},
                     {"skipped_early", ds.skipped_early},
                     {"epochs", epochs},
                     {"score", nlohmann::json::parse(score_json(sr))}};
    if (!o.hypnogram.empty()) render_hypnogram(refs, preds, m.mode, o.hypnogram);
    emit(j.dump(2), o.out);
    return 0;
}

// ---- report-memory ----

struct MemOpts {
    std::string model = "stacking";
    double max_percent = -1.0; // gate disabled when negative
};

int cmd_report_memory(const MemOpts& o) {
    log_line("config: command=report-memory model=" + o.model +
             (o.max_percent >= 0.0 ? " max-percent=" + format_double(o.max_percent) : ""));
    MemoryReport rep;
    if (o.model == "stacking")
        rep = budget_report(make_stack(ClassMode::Phase3));
    else if (o.model == "ann-big")
        rep = budget_report(build_ann_big());
    else if (o.model == "base-ann")
        rep = budget_report(make_base_ann(0));
    else if (o.model == "lstm")
        rep = budget_report(make_lstm_baseline());
    else {
        LoadedModel m = load_model(o.model);
        if (m.kind == "stacking")
            rep = budget_report(m.stack);
        else if (m.kind == "lstm")
            rep = budget_report(m.lstm);
        else
            rep = budget_report(m.dense);
    }
    std::fputs(memory_report_table(rep).c_str(), stdout);
    emit(memory_report_json(rep), "");
    if (o.max_percent >= 0.0 && rep.utilization_percent > o.max_percent) {
        log_line("gate: utilization " + format_double(rep.utilization_percent) + "% exceeds " +
                 format_double(o.max_percent) + "%");
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sleep phase toolkit: synthetic corpus, HR/HRV features, stacked nets, evaluation"};
    app.require_subcommand(1);

    SynthOpts so;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
    synth->add_option("--out", so.out, "output directory")->required();
    synth->add_option("--subjects", so.subjects, "distinct subjects")->check(CLI::PositiveNumber);
    synth->add_option("--nights", so.nights, "total nights")->check(CLI::PositiveNumber);
    synth->add_option("--duration-min", so.duration_min, "night length in minutes");
    synth->add_option("--mode", so.mode, "label scheme")->check(CLI::IsMember({"phase3", "wrn3"}));
    synth->add_option("--offset-bpm", so.offset_bpm, "per-subject baseline HR shift bound");
    synth->add_option("--seed", so.seed, "corpus seed");
    synth->add_option("--threads", so.threads, "parallel night generation (0 = all cores)");

    FeaturesOpts fo;
    CLI::App* feat = app.add_subcommand("features", "extract per-epoch feature rows");
    feat->add_option("--in", fo.in_dir, "corpus directory")->required();
    feat->add_option("--out", fo.out, "feature csv path")->required();
    feat->add_option("--scaling", fo.scaling, "z-score the written rows")
        ->check(CLI::IsMember({"none", "global", "per-subject"}));

    TrainOpts to;
    CLI::App* train_cmd = app.add_subcommand("train", "fit a model and write a bundle");
    train_cmd->add_option("--model", to.model, "architecture")
        ->required()
        ->check(CLI::IsMember({"stacking", "ann-big", "lstm", "base-ann"}));
    train_cmd->add_option("--features", to.features, "unscaled feature csv")->required();
    train_cmd->add_option("--out", to.out, "bundle path")->required();
    train_cmd->add_option("--scaling", to.scaling, "scaler fit on the training rows")
        ->check(CLI::IsMember({"global", "per-subject"}));
    train_cmd->add_option("--lr", to.lr, "Adam learning rate");
    train_cmd->add_option("--batch", to.batch, "minibatch size");
    train_cmd->add_option("--epochs", to.epochs, "epoch cap");
    train_cmd->add_option("--patience", to.patience, "early stopping patience");
    train_cmd->add_option("--val-fraction", to.val_fraction, "validation split fraction");
    train_cmd->add_option("--seed", to.seed, "training seed");
    train_cmd->add_option("--threads", to.threads, "fold parallelism (stacking)");
    train_cmd->add_option("--folds", to.folds, "out-of-fold splits (stacking)");
    train_cmd->add_option("--base-index", to.base_index, "which base net (base-ann)")
        ->check(CLI::Range(0, kStackBases - 1));
    train_cmd->add_option("--truncation", to.truncation, "BPTT chunk length (lstm)");

    EvalOpts eo;
    CLI::App* eval_cmd = app.add_subcommand("eval", "cross-validate an architecture or score a bundle");
    eval_cmd->add_option("--model", eo.model, "architecture name or bundle path")->required();
    eval_cmd->add_option("--features", eo.features, "unscaled feature csv")->required();
    eval_cmd->add_option("--scheme", eo.scheme, "fold scheme")
        ->check(CLI::IsMember({"lono", "ksubject"}));
    eval_cmd->add_option("--k", eo.k, "folds for the by-subject scheme");
    eval_cmd->add_option("--scaling", eo.scaling, "per-fold scaler kind")
        ->check(CLI::IsMember({"global", "per-subject"}));
    eval_cmd->add_option("--out", eo.out, "also write the report here");
    eval_cmd->add_option("--lr", eo.lr, "Adam learning rate");
    eval_cmd->add_option("--batch", eo.batch, "minibatch size");
    eval_cmd->add_option("--epochs", eo.epochs, "epoch cap");
    eval_cmd->add_option("--patience", eo.patience, "early stopping patience");
    eval_cmd->add_option("--seed", eo.seed, "fold and training seed");
    eval_cmd->add_option("--threads", eo.threads, "fold parallelism");
    eval_cmd->add_option("--folds", eo.folds, "stacking out-of-fold splits");
    eval_cmd->add_option("--base-index", eo.base_index, "which base net (base-ann)")
        ->check(CLI::Range(0, kStackBases - 1));
    eval_cmd->add_option("--truncation", eo.truncation, "BPTT chunk length (lstm)");

    InferOpts io;
    CLI::App* infer_cmd = app.add_subcommand("infer", "predict one night with a stored bundle");
    infer_cmd->add_option("--model", io.model, "bundle path")->required();
    infer_cmd->add_option("--night", io.night, "night csv")->required();
    infer_cmd->add_option("--hypnogram", io.hypnogram, "write an SVG step plot here");
    infer_cmd->add_option("--out", io.out, "also write the predictions here");

    MemOpts mo;
    CLI::App* mem_cmd = app.add_subcommand("report-memory", "embedded RAM accounting for a model");
    mem_cmd->add_option("--model", mo.model, "architecture name or bundle path");
    mem_cmd->add_option("--max-percent", mo.max_percent, "fail (exit 1) above this utilization");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(so);
        if (feat->parsed()) return cmd_features(fo);
        if (train_cmd->parsed()) return cmd_train(to);
        if (eval_cmd->parsed()) return cmd_eval(eo);
        if (infer_cmd->parsed()) return cmd_infer(io);
        if (mem_cmd->parsed()) return cmd_report_memory(mo);
    } catch (const Error& e) {
        ErrorCategory cat = error_category(e.code());
        const char* cat_name = cat == ErrorCategory::Usage ? "usage"
                               : cat == ErrorCategory::Gate ? "gate"
                                                            : "data";
        std::fprintf(stderr, "error: %s: %s: %s\n", cat_name, e.code_name(), e.what());
        return cat == ErrorCategory::Usage ? 2 : cat == ErrorCategory::Gate ? 1 : 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: data: Unhandled: %s\n", e.what());
        return 3;
    }
    return 0;
}
