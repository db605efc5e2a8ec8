#include "sa2d/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

namespace sa2d {

using nlohmann::json;

namespace {

struct Ranked {
    double anomaly = 0.0;  // -s_t: higher means more anomalous
    int label = 0;
};

std::vector<Ranked> concat(const LabeledScores& data) {
    std::vector<Ranked> out;
    for (const auto& [id, v] : data.per_video) {
        if (v.scores.size() != v.labels.size() || v.scores.empty())
            throw Error(ErrorKind::ShapeMismatch, "scores/labels mismatch for " + id);
        for (std::size_t i = 0; i < v.scores.size(); ++i)
            out.push_back({-v.scores[i], v.labels[i]});
    }
    return out;
}

// Mann-Whitney AUC via average ranks; ties count half.
double auc_from(const std::vector<Ranked>& frames) {
    std::size_t positives = 0;
    for (const Ranked& f : frames) positives += f.label != 0;
    const std::size_t negatives = frames.size() - positives;
    if (positives == 0 || negatives == 0)
        throw Error(ErrorKind::DegenerateLabels, "needs both classes");

    std::vector<std::size_t> order(frames.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return frames[a].anomaly < frames[b].anomaly;
    });

    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && frames[order[j]].anomaly == frames[order[i]].anomaly) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k)
            if (frames[order[k]].label != 0) positive_rank_sum += avg_rank;
        i = j;
    }
    const double p = static_cast<double>(positives), n = static_cast<double>(negatives);
    return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double ap_from(const std::vector<Ranked>& frames) {
    std::size_t positives = 0;
    for (const Ranked& f : frames) positives += f.label != 0;
    if (positives == 0) throw Error(ErrorKind::NoPositives, "no anomalous frames");

    std::vector<std::size_t> order(frames.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return frames[a].anomaly > frames[b].anomaly;
    });

    double ap = 0.0;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (frames[order[k]].label != 0) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return ap / static_cast<double>(positives);
}

double fpr_from(const std::vector<Ranked>& frames, double threshold) {
    std::size_t negatives = 0, flagged = 0;
    for (const Ranked& f : frames) {
        if (f.label != 0) continue;
        ++negatives;
        if (-f.anomaly < threshold) ++flagged;  // s_t < threshold
    }
    if (negatives == 0) throw Error(ErrorKind::NoNegatives, "no normal frames");
    return static_cast<double>(flagged) / static_cast<double>(negatives);
}

}  // namespace

double micro_auc(const LabeledScores& data) { return auc_from(concat(data)); }

MacroAuc macro_auc_detailed(const LabeledScores& data) {
    MacroAuc out;
    double sum = 0.0;
    for (const auto& [id, v] : data.per_video) {
        LabeledScores single;
        single.per_video.emplace(id, v);
        try {
            sum += auc_from(concat(single));
            out.included.push_back(id);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::DegenerateLabels) throw;
            out.excluded.push_back(id);
        }
    }
    if (out.included.empty())
        throw Error(ErrorKind::NoEvaluableVideos, "every video is single-class");
    out.value = sum / static_cast<double>(out.included.size());
    return out;
}

double macro_auc(const LabeledScores& data) { return macro_auc_detailed(data).value; }

double average_precision(const LabeledScores& data) { return ap_from(concat(data)); }

double fpr_at_threshold(const LabeledScores& data, double threshold) {
    return fpr_from(concat(data), threshold);
}

namespace {

ReportRow make_row(const std::string& name, const LabeledScores& subset, double threshold) {
    ReportRow row;
    row.group = name;
    row.n_videos = static_cast<int>(subset.per_video.size());
    for (const auto& [id, v] : subset.per_video)
        row.n_frames += static_cast<int>(v.scores.size());
    try {
        row.auc = micro_auc(subset);
        row.ap = average_precision(subset);
        row.fpr = fpr_at_threshold(subset, threshold);
    } catch (const Error& e) {
        switch (e.kind()) {
            case ErrorKind::DegenerateLabels:
            case ErrorKind::NoPositives:
            case ErrorKind::NoNegatives:
                row.status = to_string(e.kind());
                break;
            default:
                throw;
        }
    }
    return row;
}

}  // namespace

Report grouped_report(const LabeledScores& data, const Manifest& manifest, GroupBy group_by,
                      double threshold) {
    Report report;
    report.group_by = group_by;
    report.threshold = threshold;

    LabeledScores normals;
    std::map<std::string, LabeledScores> groups;
    for (const auto& [id, v] : data.per_video) {
        const VideoRecord& rec = manifest.record(id);  // UnknownVideoId when absent
        if (rec.label == VideoLabel::normal) {
            normals.per_video.emplace(id, v);
        } else {
            const std::string key = group_by == GroupBy::anomaly_type
                                        ? rec.anomaly_type.value_or("unspecified")
                                        : rec.scenario_id;
            groups[key].per_video.emplace(id, v);
        }
    }

    for (const auto& [name, abnormal] : groups) {
        LabeledScores pooled = abnormal;
        for (const auto& [id, v] : normals.per_video) pooled.per_video.emplace(id, v);
        report.rows.push_back(make_row(name, pooled, threshold));
    }
    report.overall = make_row("Overall", data, threshold);
    return report;
}

namespace {

std::string pct(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *v * 100.0);
    return buf;
}

json row_json(const ReportRow& row) {
    json j;
    j["group"] = row.group;
    j["n_videos"] = row.n_videos;
    j["n_frames"] = row.n_frames;
    j["auc"] = row.auc ? json(*row.auc) : json(nullptr);
    j["ap"] = row.ap ? json(*row.ap) : json(nullptr);
    j["fpr"] = row.fpr ? json(*row.fpr) : json(nullptr);
    j["status"] = row.status;
    return j;
}

}  // namespace

void write_report_csv(const Report& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, path.string());
    out << "group,n_videos,n_frames,auc,ap,fpr,status\n";
    auto emit = [&](const ReportRow& row) {
        out << row.group << "," << row.n_videos << "," << row.n_frames << "," << pct(row.auc)
            << "," << pct(row.ap) << "," << pct(row.fpr) << "," << row.status << "\n";
    };
    for (const ReportRow& row : report.rows) emit(row);
    emit(report.overall);
}

void write_report_json(const Report& report, const std::filesystem::path& path) {
    json j;
    j["group_by"] = report.group_by == GroupBy::anomaly_type ? "anomaly_type" : "scenario";
    j["threshold"] = report.threshold;
    j["negative_pool"] = report.negative_pool;
    j["rows"] = json::array();
    for (const ReportRow& row : report.rows) j["rows"].push_back(row_json(row));
    j["overall"] = row_json(report.overall);
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, path.string());
    out << j.dump(2) << "\n";
}

LabeledScores build_labeled_scores(const Manifest& manifest, const SplitSpec& split,
                                   const std::map<std::string, std::vector<ScoredFrame>>& scores) {
    LabeledScores data;
    for (const auto& [id, frames] : scores) {
        if (!manifest.has(id)) throw Error(ErrorKind::UnknownVideoId, id);
        if (!split.test_ids.count(id))
            throw Error(ErrorKind::SupervisionViolation, "scored video not in test split: " + id);
        const FrameAnnotation annotation = load_annotation_checked(manifest, split, id);

        VideoScores v;
        for (const ScoredFrame& f : frames) {
            if (f.frame_index > static_cast<int>(annotation.size()))
                throw Error(ErrorKind::SchemaError,
                            id + ": scored frame beyond annotation length");
            v.scores.push_back(f.score);
            v.labels.push_back(annotation[static_cast<std::size_t>(f.frame_index) - 1]);
        }
        data.per_video.emplace(id, std::move(v));
    }
    return data;
}

}  // namespace sa2d
