#include <doctest.h>

#include "sleepstack/dataset.hpp"
#include "sleepstack/errors.hpp"
#include "sleepstack/eval.hpp"
#include "sleepstack/rng.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

using namespace sleepstack;

namespace {

// night with a per-night HR baseline and a within-night 3-level pattern:
// 5-epoch blocks cycling REM (low), LIGHT (mid), DEEP (high). A small
// deterministic wobble keeps every feature column away from zero variance.
LabeledNight drift_night(const std::string& subject, const std::string& night, double base_bpm,
                         int epochs = 300) {
    LabeledNight n;
    n.subject_id = subject;
    n.night_id = night;
    n.class_mode = ClassMode::Phase3;
    auto bpm_of = [&](int e) {
        const int c = (e / 5) % 3;
        const double wobble = static_cast<double>((e * 7 + 3) % 11 - 5) * 0.05;
        return base_bpm + 6.0 * (c - 1) + wobble;
    };
    const SleepPhase order[3] = {SleepPhase::Rem, SleepPhase::Light, SleepPhase::Deep};
    for (int e = 0; e < epochs; ++e) n.labels.push_back(order[(e / 5) % 3]);

    n.hr.sample_rate_hz = 1.0;
    const std::int64_t dur_ms = static_cast<std::int64_t>(epochs) * kEpochLenMs;
    for (std::int64_t s = 0; s * 1000 < dur_ms; ++s)
        n.hr.samples.push_back(bpm_of(static_cast<int>(s / 30)));

    double t = 0.0;
    while (true) {
        const int e = static_cast<int>(t / 30000.0);
        const double interval = 60000.0 / bpm_of(std::min(e, epochs - 1));
        t += interval;
        if (t >= static_cast<double>(dur_ms)) break;
        n.ibi.beats.push_back({static_cast<std::int64_t>(t), interval});
    }
    return n;
}

std::vector<int> random_labels(Rng& rng, std::size_t count) {
    std::vector<int> v(count);
    for (auto& x : v) x = static_cast<int>(rng.below(3));
    return v;
}

// classifier with hard-coded cut points in scaled space; it believes the
// scaler centered each subject properly, which is exactly what a leaked fit
// fakes and an honest fold-wise fit cannot do for a drifted night
ModelBuilder stump_builder(std::size_t feature, double cut_low, double cut_high) {
    return [feature, cut_low, cut_high](const TrainInputs&) {
        NightClassifier clf;
        clf.predict_seq = [feature, cut_low, cut_high](const Matrix& seq) {
            std::vector<int> out;
            for (std::size_t r = 0; r < seq.rows; ++r) {
                const double z = seq.at(r, feature);
                out.push_back(z < cut_low ? 0 : (z < cut_high ? 1 : 2));
            }
            return out;
        };
        return clf;
    };
}

ModelBuilder constant_builder(int cls, std::vector<std::size_t>* train_rows_seen) {
    return [cls, train_rows_seen](const TrainInputs& in) {
        if (train_rows_seen) train_rows_seen->push_back(in.X.rows);
        NightClassifier clf;
        clf.predict_seq = [cls](const Matrix& seq) {
            return std::vector<int>(seq.rows, cls);
        };
        return clf;
    };
}

} // namespace

TEST_CASE("score matches the counting oracle") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(400);
        auto ref = random_labels(rng, n);
        auto pred = random_labels(rng, n);
        ScoreResult got = score(ref, pred, ClassMode::Phase3);
        oracle::ScoreRef want = oracle::score(ref, pred);
        for (int a = 0; a < 3; ++a) {
            CHECK(got.confusion.row_sum(a) ==
                  want.counts[a][0] + want.counts[a][1] + want.counts[a][2]);
            for (int b = 0; b < 3; ++b)
                CHECK(got.confusion.counts[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] ==
                      want.counts[a][b]);
            CHECK(got.metrics.per_class_d[static_cast<std::size_t>(a)] == want.recall[a]);
            CHECK(got.metrics.per_class_f1[static_cast<std::size_t>(a)] == want.f1[a]);
        }
        CHECK(got.metrics.ud == want.ud);
        CHECK(got.metrics.uf1 == want.uf1);
        CHECK(got.confusion.total() == static_cast<long>(n));
    }
}

TEST_CASE("score hand cases") {
    SUBCASE("perfect prediction") {
        std::vector<int> y = {0, 1, 2, 0, 1, 2};
        ScoreResult r = score(y, y, ClassMode::Phase3);
        CHECK(r.metrics.ud == 1.0);
        CHECK(r.metrics.uf1 == 1.0);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                CHECK(r.confusion.counts[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] ==
                      (a == b ? 2 : 0));
        CHECK(r.metrics.warnings.empty());
    }
    SUBCASE("one-class predictor on balanced labels") {
        std::vector<int> ref = {0, 0, 1, 1, 2, 2};
        std::vector<int> pred(6, 1);
        ScoreResult r = score(ref, pred, ClassMode::Phase3);
        CHECK(r.metrics.per_class_d[1] == 1.0);
        CHECK(r.metrics.per_class_d[0] == 0.0);
        CHECK(r.metrics.ud == 1.0 / 3.0); // exact: (0 + 1 + 0) / 3
    }
    SUBCASE("class absent from both sides warns and scores zero") {
        std::vector<int> ref = {0, 1, 0, 1};
        std::vector<int> pred = {0, 1, 1, 0};
        ScoreResult r = score(ref, pred, ClassMode::Phase3);
        CHECK(r.metrics.per_class_f1[2] == 0.0);
        REQUIRE(!r.metrics.warnings.empty());
        bool mentions = false;
        for (const auto& w : r.metrics.warnings)
            if (w.find(class_name(2, ClassMode::Phase3)) != std::string::npos) mentions = true;
        CHECK(mentions);
    }
    SUBCASE("pair order is irrelevant") {
        Rng rng(5);
        auto ref = random_labels(rng, 100);
        auto pred = random_labels(rng, 100);
        std::vector<std::size_t> idx(100);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng shuf(6);
        shuf.shuffle(idx);
        std::vector<int> ref2, pred2;
        for (std::size_t i : idx) {
            ref2.push_back(ref[i]);
            pred2.push_back(pred[i]);
        }
        ScoreResult a = score(ref, pred, ClassMode::Phase3);
        ScoreResult b = score(ref2, pred2, ClassMode::Phase3);
        CHECK(a.metrics.ud == b.metrics.ud);
        CHECK(a.metrics.uf1 == b.metrics.uf1);
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(score({}, {}, ClassMode::Phase3), Error);
        CHECK_THROWS_AS(score({0, 1}, {0}, ClassMode::Phase3), Error);
        try {
            score({0, 1}, {0}, ClassMode::Phase3);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::LengthMismatch);
        }
    }
}

TEST_CASE("leave-one-night-out fold structure") {
    std::vector<LabeledNight> nights = {drift_night("s1", "n1", 58, 60),
                                        drift_night("s1", "n2", 60, 60),
                                        drift_night("s2", "n3", 62, 60)};
    CvConfig cfg;
    cfg.scheme = CvScheme::LeaveOneNightOut;
    std::vector<std::size_t> train_rows_seen;
    CvReport rep = cross_validate(nights, constant_builder(0, &train_rows_seen), cfg);

    REQUIRE(rep.folds.size() == 3);
    std::set<std::string> tested;
    const std::size_t per_night = 58; // 60 epochs minus the 2 without history
    for (const auto& fr : rep.folds) {
        REQUIRE(fr.test_nights.size() == 1);
        tested.insert(fr.test_nights[0]);
        CHECK(fr.confusion.total() == static_cast<long>(per_night));
    }
    CHECK(tested == std::set<std::string>{"n1", "n2", "n3"});
    REQUIRE(train_rows_seen.size() == 3);
    for (std::size_t rows : train_rows_seen) CHECK(rows == 2 * per_night);
    CHECK(!rep.scaler_leak_detected);
    // constant predictor: recall 1 on class 0, 0 elsewhere
    CHECK(rep.ud_mean == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("by-subject folds never split a subject") {
    std::vector<LabeledNight> nights = {
        drift_night("s1", "n1", 56, 60), drift_night("s1", "n2", 57, 60),
        drift_night("s2", "n3", 60, 60), drift_night("s2", "n4", 61, 60),
        drift_night("s3", "n5", 64, 60), drift_night("s3", "n6", 65, 60)};
    CvConfig cfg;
    cfg.scheme = CvScheme::KFoldBySubject;
    cfg.k = 2;
    CvReport rep = cross_validate(nights, constant_builder(1, nullptr), cfg);
    REQUIRE(rep.folds.size() == 2);

    auto subject_of = [](const std::string& night) {
        if (night == "n1" || night == "n2") return std::string("s1");
        if (night == "n3" || night == "n4") return std::string("s2");
        return std::string("s3");
    };
    std::set<std::string> fold_subjects[2];
    std::size_t nights_seen = 0;
    for (std::size_t f = 0; f < 2; ++f) {
        for (const auto& night : rep.folds[f].test_nights)
            fold_subjects[f].insert(subject_of(night));
        nights_seen += rep.folds[f].test_nights.size();
        // a subject's nights travel together, so both of them show up
        for (const auto& s : fold_subjects[f]) {
            int count = 0;
            for (const auto& night : rep.folds[f].test_nights)
                if (subject_of(night) == s) ++count;
            CHECK(count == 2);
        }
    }
    CHECK(nights_seen == 6);
    std::set<std::string> overlap;
    std::set_intersection(fold_subjects[0].begin(), fold_subjects[0].end(),
                          fold_subjects[1].begin(), fold_subjects[1].end(),
                          std::inserter(overlap, overlap.begin()));
    CHECK(overlap.empty());
}

TEST_CASE("cross validation input validation") {
    std::vector<LabeledNight> one = {drift_night("s1", "n1", 60, 60)};
    CvConfig cfg;
    CHECK_THROWS_AS(cross_validate(one, constant_builder(0, nullptr), cfg), Error);

    std::vector<LabeledNight> nights = {drift_night("s1", "n1", 58, 60),
                                        drift_night("s2", "n2", 62, 60)};
    cfg.scheme = CvScheme::KFoldBySubject;
    cfg.k = 1;
    try {
        cross_validate(nights, constant_builder(0, nullptr), cfg);
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UsageError);
    }
    cfg.k = 5; // more folds than subjects
    try {
        cross_validate(nights, constant_builder(0, nullptr), cfg);
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientData);
    }
}

TEST_CASE("dataset overload gives the night overload's answer") {
    std::vector<LabeledNight> nights = {drift_night("s1", "n1", 58, 60),
                                        drift_night("s1", "n2", 60, 60),
                                        drift_night("s2", "n3", 62, 60)};
    CvConfig cfg;
    CvReport a = cross_validate(nights, stump_builder(16, -0.5, 0.5), cfg);
    CvReport b = cross_validate(assemble(nights, cfg.features, ClassMode::Phase3),
                                stump_builder(16, -0.5, 0.5), cfg);
    CHECK(a.folds.size() == b.folds.size());
    CHECK(a.uf1_mean == b.uf1_mean);
    CHECK(a.ud_std == b.ud_std);
}

TEST_CASE("scaler leak audit") {
    // two nights per subject whose baselines drift 24 bpm apart: an honest
    // per-subject fit only ever sees the training night, so the test night
    // lands far off center; a fit that peeked at the test rows splits the
    // difference and the hard-coded cuts line up again
    std::vector<LabeledNight> nights = {
        drift_night("s1", "n1", 55), drift_night("s1", "n2", 79),
        drift_night("s2", "n3", 60), drift_night("s2", "n4", 84)};
    Dataset ds = assemble(nights, FeatureConfig{}, ClassMode::Phase3);

    CvConfig cfg;
    cfg.scheme = CvScheme::LeaveOneNightOut;
    cfg.scaling = ScalingMode::PerSubjectZscore;
    ModelBuilder builder = stump_builder(16, 0.7, 1.2); // hr90_mean

    CvReport honest = cross_validate(ds, builder, cfg);
    CHECK(!honest.scaler_leak_detected);

    cfg.leak_scaler_for_testing = true;
    CvReport leaked = cross_validate(ds, builder, cfg);
    CHECK(leaked.scaler_leak_detected);

    // the leak buys a flatly better-looking score
    CHECK(leaked.uf1_mean > honest.uf1_mean + 0.2);
    for (std::size_t f = 0; f < honest.folds.size(); ++f)
        CHECK(honest.folds[f].scaler_checksum == honest.folds[f].train_only_checksum);
}

TEST_CASE("report serialization") {
    std::vector<LabeledNight> nights = {drift_night("s1", "n1", 58, 60),
                                        drift_night("s2", "n2", 62, 60)};
    CvConfig cfg;
    CvReport rep = cross_validate(nights, constant_builder(0, nullptr), cfg);

    auto j = nlohmann::json::parse(cv_report_json(rep));
    CHECK(j["format_version"] == 1);
    CHECK(j["scheme"] == "lono");
    CHECK(j["folds"].size() == 2);
    CHECK(j["uf1"]["mean"].get<double>() == rep.uf1_mean);
    CHECK(j["scaler_leak_detected"] == false);

    std::string table = cv_report_table(rep);
    CHECK(table.find("fold") != std::string::npos);
    CHECK(table.find("n1") != std::string::npos);
    CHECK(table.find("mean") != std::string::npos);

    ScoreResult sr = score({0, 1, 2, 1}, {0, 1, 2, 2}, ClassMode::Phase3);
    auto sj = nlohmann::json::parse(score_json(sr));
    CHECK(sj["format_version"] == 1);
    CHECK(sj["ud"].get<double>() == sr.metrics.ud);
    CHECK(sj["confusion"]["counts"].size() == 3);
    CHECK(sj["confusion"]["counts"][0].size() == 3);
}

TEST_CASE("hypnogram output") {
    std::vector<int> ref = {0, 0, 1, 2, 2, 1, 0, 1};
    std::vector<int> pred = {0, 1, 1, 2, 0, 1, 0, 2};

    SUBCASE("svg structure") {
        std::string svg = hypnogram_svg(ref, pred, ClassMode::Phase3);
        std::size_t polylines = 0, pos = 0;
        while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
            ++polylines;
            pos += 9;
        }
        CHECK(polylines == 2);
        CHECK(svg.find("30 s per step") != std::string::npos);
        CHECK(svg.find("<svg") != std::string::npos);
    }
    SUBCASE("identical sequences draw the same shape") {
        // the predicted trace sits 4 px lower so a perfect match stays
        // visible; same xs, every y shifted by the same amount
        std::string svg = hypnogram_svg(ref, ref, ClassMode::Phase3);
        const std::string key = "points=\"";
        std::size_t p1 = svg.find(key);
        REQUIRE(p1 != std::string::npos);
        std::size_t e1 = svg.find('"', p1 + key.size());
        std::size_t p2 = svg.find(key, e1);
        REQUIRE(p2 != std::string::npos);
        std::size_t e2 = svg.find('"', p2 + key.size());
        auto parse = [](const std::string& pts) {
            std::vector<double> vals;
            std::size_t i = 0;
            while (i < pts.size()) {
                std::size_t used = 0;
                vals.push_back(std::stod(pts.substr(i), &used));
                i += used + 1; // the ',' or ' ' separator
            }
            return vals;
        };
        auto a = parse(svg.substr(p1 + key.size(), e1 - p1 - key.size()));
        auto b = parse(svg.substr(p2 + key.size(), e2 - p2 - key.size()));
        REQUIRE(a.size() == b.size());
        REQUIRE(a.size() >= 4);
        const double dy = b[1] - a[1];
        for (std::size_t i = 0; i < a.size(); i += 2) {
            CHECK(a[i] == b[i]);              // x
            CHECK(b[i + 1] - a[i + 1] == dy); // y
        }
    }
    SUBCASE("text strip") {
        std::string text = hypnogram_text(ref, pred, ClassMode::Phase3);
        CHECK(text.find("ref ") != std::string::npos);
        CHECK(text.find("pred ") != std::string::npos);
    }
    SUBCASE("files land next to each other") {
        testutil::TempDir tmp("hyp");
        render_hypnogram(ref, pred, ClassMode::Phase3, tmp.file("night.svg"));
        CHECK(std::filesystem::exists(tmp.file("night.svg")));
        CHECK(std::filesystem::exists(tmp.file("night.txt")));
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(hypnogram_svg({0, 1}, {0}, ClassMode::Phase3), Error);
    }
}
