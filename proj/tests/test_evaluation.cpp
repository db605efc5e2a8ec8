#include <doctest.h>

#include <cmath>
#include <fstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sa2d/evaluation.hpp"

using namespace sa2d;

namespace {

// one-video dataset from anomaly scores (normalcy s = 1 - a)
LabeledScores from_anomaly(const std::vector<double>& anomaly, const std::vector<int>& labels,
                           const std::string& id = "vid") {
    LabeledScores data;
    VideoScores v;
    for (double a : anomaly) v.scores.push_back(1.0 - a);
    v.labels = labels;
    data.per_video.emplace(id, std::move(v));
    return data;
}

// random fixture on the 1/64 lattice so monotone transforms stay exact
LabeledScores lattice_fixture(Rng& rng, int videos, int max_frames, bool ensure_both_classes) {
    LabeledScores data;
    for (int v = 0; v < videos; ++v) {
        const int n = 2 + static_cast<int>(rng.next_below(max_frames - 1));
        VideoScores vs;
        for (int i = 0; i < n; ++i) {
            vs.scores.push_back(static_cast<double>(rng.next_below(65)) / 64.0);
            vs.labels.push_back(static_cast<int>(rng.next_below(2)));
        }
        if (ensure_both_classes) {
            vs.labels[0] = 0;
            vs.labels[static_cast<std::size_t>(n) - 1] = 1;
        }
        data.per_video.emplace("vid" + std::to_string(v), std::move(vs));
    }
    return data;
}

std::pair<std::vector<double>, std::vector<int>> concat_anomaly(const LabeledScores& data) {
    std::vector<double> anomaly;
    std::vector<int> labels;
    for (const auto& [id, v] : data.per_video)
        for (std::size_t i = 0; i < v.scores.size(); ++i) {
            anomaly.push_back(-v.scores[i]);
            labels.push_back(v.labels[i]);
        }
    return {anomaly, labels};
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("micro auc worked examples") {
    // 3 of 4 positive-negative pairs correctly ordered
    const LabeledScores data = from_anomaly({0.9, 0.6, 0.65, 0.2}, {1, 1, 0, 0});
    CHECK(micro_auc(data) == doctest::Approx(0.75).epsilon(1e-15));

    const LabeledScores separated = from_anomaly({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    CHECK(micro_auc(separated) == 1.0);

    try {
        micro_auc(from_anomaly({0.3, 0.7}, {0, 0}));
        FAIL("expected DegenerateLabels");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateLabels);
    }
}

TEST_CASE("micro auc equals the pair-counting oracle on random fixtures") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const LabeledScores data = lattice_fixture(rng, 1 + static_cast<int>(rng.next_below(4)),
                                                   60, true);
        const auto [anomaly, labels] = concat_anomaly(data);
        CHECK(std::fabs(micro_auc(data) - oracle::pair_auc(anomaly, labels)) < 1e-12);
    }
}

TEST_CASE("micro auc is exactly invariant under strictly increasing transforms") {
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const LabeledScores data = lattice_fixture(rng, 2, 40, true);
        const double base = micro_auc(data);

        LabeledScores cubed;   // s -> s^3 (monotone on [0,1])
        LabeledScores scaled;  // s -> (3s + 1) / 8
        for (const auto& [id, v] : data.per_video) {
            VideoScores c = v, m = v;
            for (double& s : c.scores) s = s * s * s;
            for (double& s : m.scores) s = (3.0 * s + 1.0) / 8.0;
            cubed.per_video.emplace(id, std::move(c));
            scaled.per_video.emplace(id, std::move(m));
        }
        CHECK(micro_auc(cubed) == base);
        CHECK(micro_auc(scaled) == base);
    }
}

TEST_CASE("macro auc averages per-video aucs") {
    LabeledScores data;
    VideoScores perfect;
    perfect.scores = {0.9, 0.8, 0.1, 0.2};  // normalcy: anomalies scored lowest
    perfect.labels = {0, 0, 1, 1};
    VideoScores chance;
    chance.scores = {0.5, 0.5, 0.5, 0.5};
    chance.labels = {0, 1, 0, 1};
    data.per_video.emplace("good", perfect);
    data.per_video.emplace("flat", chance);

    const MacroAuc detail = macro_auc_detailed(data);
    CHECK(detail.value == doctest::Approx(0.75).epsilon(1e-15));  // (1.0 + 0.5) / 2
    CHECK(detail.included.size() == 2);

    // single evaluable video: macro equals that video's micro
    LabeledScores single;
    single.per_video.emplace("good", perfect);
    CHECK(macro_auc(single) == micro_auc(single));

    // single-class videos are excluded, all-excluded errors out
    LabeledScores degenerate;
    VideoScores normal_only;
    normal_only.scores = {0.5, 0.6};
    normal_only.labels = {0, 0};
    degenerate.per_video.emplace("n", normal_only);
    try {
        macro_auc(degenerate);
        FAIL("expected NoEvaluableVideos");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoEvaluableVideos);
    }

    LabeledScores mixed = data;
    mixed.per_video.emplace("n", normal_only);
    const MacroAuc with_excluded = macro_auc_detailed(mixed);
    CHECK(with_excluded.value == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(with_excluded.excluded == std::vector<std::string>{"n"});
}

TEST_CASE("average precision worked examples") {
    CHECK(average_precision(from_anomaly({0.9, 0.1}, {1, 0})) == 1.0);
    CHECK(average_precision(from_anomaly({0.9, 0.1}, {0, 1})) == doctest::Approx(0.5));
    try {
        average_precision(from_anomaly({0.9, 0.1}, {0, 0}));
        FAIL("expected NoPositives");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoPositives);
    }
}

TEST_CASE("average precision equals the rank oracle, 1.0 under separation") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const LabeledScores data = lattice_fixture(rng, 2, 50, true);
        const auto [anomaly, labels] = concat_anomaly(data);
        CHECK(std::fabs(average_precision(data) - oracle::rank_ap(anomaly, labels)) < 1e-12);
    }

    // all positives ahead of all negatives
    const LabeledScores sep = from_anomaly({0.9, 0.85, 0.8, 0.2, 0.1}, {1, 1, 1, 0, 0});
    CHECK(average_precision(sep) == 1.0);
}

TEST_CASE("fpr at threshold") {
    const LabeledScores clean = from_anomaly({0.0, 0.0, 0.9}, {0, 0, 1});  // normals at s=1.0
    CHECK(fpr_at_threshold(clean, 0.8) == 0.0);

    LabeledScores data;
    VideoScores v;
    v.scores = {0.9, 0.5};
    v.labels = {0, 0};
    data.per_video.emplace("v", v);
    CHECK(fpr_at_threshold(data, 0.8) == 0.5);
    CHECK(fpr_at_threshold(data, 1.0) == 1.0);  // no score is exactly 1.0

    LabeledScores positives_only = from_anomaly({0.9, 0.8}, {1, 1});
    try {
        fpr_at_threshold(positives_only, 0.8);
        FAIL("expected NoNegatives");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoNegatives);
    }
}

TEST_CASE("grouped report pools group abnormals with all normals") {
    Manifest manifest;
    auto add_record = [&](const std::string& id, const std::string& scenario,
                          VideoLabel label, const std::string& anomaly) {
        VideoRecord r;
        r.video_id = id;
        r.scenario_id = scenario;
        r.view_id = "v1";
        r.frame_count = 4;
        r.fps = 30.0;
        r.label = label;
        if (label == VideoLabel::abnormal) r.anomaly_type = anomaly;
        manifest.scenario_index[r.scenario_id][r.view_id].push_back(id);
        manifest.records.push_back(std::move(r));
    };
    add_record("n1", "mall", VideoLabel::normal, "");
    add_record("a1", "mall", VideoLabel::abnormal, "intruder");
    add_record("a2", "park", VideoLabel::abnormal, "speed_burst");

    LabeledScores data;
    VideoScores n1;
    n1.scores = {1.0, 0.9, 0.95, 1.0};
    n1.labels = {0, 0, 0, 0};
    VideoScores a1;
    a1.scores = {0.9, 0.1, 0.2, 0.8};
    a1.labels = {0, 1, 1, 0};
    VideoScores a2;
    a2.scores = {0.7, 0.3, 0.4, 0.9};
    a2.labels = {0, 1, 1, 0};
    data.per_video.emplace("n1", n1);
    data.per_video.emplace("a1", a1);
    data.per_video.emplace("a2", a2);

    const Report report = grouped_report(data, manifest, GroupBy::anomaly_type, 0.8);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.overall.status == "ok");

    // each group's AUC equals the pair-counting oracle over its pooled data
    for (const ReportRow& row : report.rows) {
        LabeledScores pooled;
        pooled.per_video.emplace("n1", n1);
        pooled.per_video.emplace(row.group == "intruder" ? "a1" : "a2",
                                 row.group == "intruder" ? a1 : a2);
        const auto [anomaly, labels] = concat_anomaly(pooled);
        REQUIRE(row.auc.has_value());
        CHECK(std::fabs(*row.auc - oracle::pair_auc(anomaly, labels)) < 1e-12);
        CHECK(row.n_videos == 2);
        CHECK(row.n_frames == 8);
    }

    // the two group AUCs bracket the overall AUC
    const double lo = std::min(*report.rows[0].auc, *report.rows[1].auc);
    const double hi = std::max(*report.rows[0].auc, *report.rows[1].auc);
    CHECK(lo <= *report.overall.auc + 1e-12);
    CHECK(*report.overall.auc <= hi + 1e-12);

    // scenario grouping over the same data
    const Report by_scenario = grouped_report(data, manifest, GroupBy::scenario, 0.8);
    CHECK(by_scenario.rows.size() == 2);

    // a single group covering all data equals the overall row
    LabeledScores one_group;
    one_group.per_video.emplace("n1", n1);
    one_group.per_video.emplace("a1", a1);
    const Report single = grouped_report(one_group, manifest, GroupBy::anomaly_type, 0.8);
    REQUIRE(single.rows.size() == 1);
    CHECK(*single.rows[0].auc == *single.overall.auc);
    CHECK(*single.rows[0].ap == *single.overall.ap);
    CHECK(*single.rows[0].fpr == *single.overall.fpr);
}

TEST_CASE("grouped report marks unevaluable groups and keeps the rest") {
    Manifest manifest;
    auto add_record = [&](const std::string& id, VideoLabel label, const std::string& anomaly) {
        VideoRecord r;
        r.video_id = id;
        r.scenario_id = "mall";
        r.view_id = "v1";
        r.frame_count = 2;
        r.fps = 30.0;
        r.label = label;
        if (label == VideoLabel::abnormal) r.anomaly_type = anomaly;
        manifest.records.push_back(std::move(r));
    };
    add_record("n1", VideoLabel::normal, "");
    add_record("a1", VideoLabel::abnormal, "intruder");
    add_record("a2", VideoLabel::abnormal, "fire");

    LabeledScores data;
    VideoScores n1;
    n1.scores = {1.0, 0.9};
    n1.labels = {0, 0};
    VideoScores a1;
    a1.scores = {0.1, 0.9};
    a1.labels = {1, 0};
    VideoScores a2;  // abnormal video whose scored frames are all normal
    a2.scores = {0.8, 0.9};
    a2.labels = {0, 0};
    data.per_video.emplace("n1", n1);
    data.per_video.emplace("a1", a1);
    data.per_video.emplace("a2", a2);

    const Report report = grouped_report(data, manifest, GroupBy::anomaly_type, 0.8);
    REQUIRE(report.rows.size() == 2);
    for (const ReportRow& row : report.rows) {
        if (row.group == "fire") {
            CHECK(row.status == "DegenerateLabels");
            CHECK(!row.auc.has_value());
        } else {
            CHECK(row.status == "ok");
            CHECK(row.auc.has_value());
        }
    }

    // unknown ids are rejected
    LabeledScores unknown;
    unknown.per_video.emplace("ghost", n1);
    try {
        grouped_report(unknown, manifest, GroupBy::anomaly_type, 0.8);
        FAIL("expected UnknownVideoId");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnknownVideoId);
    }
}

TEST_CASE("report files carry percentages and raw fractions") {
    Manifest manifest;
    VideoRecord r;
    r.video_id = "a1";
    r.scenario_id = "mall";
    r.view_id = "v1";
    r.frame_count = 4;
    r.fps = 30.0;
    r.label = VideoLabel::abnormal;
    r.anomaly_type = "intruder";
    manifest.records.push_back(r);

    LabeledScores data;
    VideoScores v;
    v.scores = {1.0, 0.0, 0.9, 0.1};
    v.labels = {0, 1, 0, 1};
    data.per_video.emplace("a1", v);

    const Report report = grouped_report(data, manifest, GroupBy::anomaly_type, 0.8);
    const auto dir = fixtures::fresh_dir("report");
    write_report_csv(report, dir / "report.csv");
    write_report_json(report, dir / "report.json");

    std::ifstream csv(dir / "report.csv");
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    CHECK(header == "group,n_videos,n_frames,auc,ap,fpr,status");
    CHECK(row.find("intruder,1,4,100.00,100.00,0.00,ok") == 0);

    std::ifstream jin(dir / "report.json");
    std::string text((std::istreambuf_iterator<char>(jin)), {});
    CHECK(text.find("\"auc\": 1.0") != std::string::npos);
}

}  // TEST_SUITE
