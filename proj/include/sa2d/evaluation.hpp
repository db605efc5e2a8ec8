#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sa2d/dataset.hpp"
#include "sa2d/scoring.hpp"

namespace sa2d {

struct VideoScores {
    std::vector<double> scores;  // normalcy scores s_t
    std::vector<int> labels;     // frame labels aligned to the scores
};

struct LabeledScores {
    std::map<std::string, VideoScores> per_video;
};

// Frame-level ROC area with anomaly as the positive class (low s_t ranks
// anomalous). Ties contribute 1/2.
double micro_auc(const LabeledScores& data);

struct MacroAuc {
    double value = 0.0;
    std::vector<std::string> included;
    std::vector<std::string> excluded;  // single-class videos
};
MacroAuc macro_auc_detailed(const LabeledScores& data);
double macro_auc(const LabeledScores& data);

// step-interpolated AP over descending anomaly ranks, stable tie order
double average_precision(const LabeledScores& data);

// fraction of normal frames flagged anomalous (s_t < threshold)
double fpr_at_threshold(const LabeledScores& data, double threshold);

enum class GroupBy { anomaly_type, scenario };

struct ReportRow {
    std::string group;
    int n_videos = 0;
    int n_frames = 0;
    std::optional<double> auc;
    std::optional<double> ap;
    std::optional<double> fpr;
    std::string status = "ok";
};

struct Report {
    GroupBy group_by = GroupBy::anomaly_type;
    double threshold = 0.8;
    std::vector<ReportRow> rows;  // one per group
    ReportRow overall;
    // negatives for every group row are the normal frames of all videos
    std::string negative_pool = "all_normal_videos";
};

// One row per group of abnormal videos (keyed by anomaly type or scenario);
// each row pools the group's abnormal videos with every normal video.
Report grouped_report(const LabeledScores& data, const Manifest& manifest, GroupBy group_by,
                      double threshold);

void write_report_csv(const Report& report, const std::filesystem::path& path);
void write_report_json(const Report& report, const std::filesystem::path& path);

// Aligns score rows with frame annotations. Only test videos are admitted;
// labels come from each video's annotation file at the scored frame indices.
LabeledScores build_labeled_scores(const Manifest& manifest, const SplitSpec& split,
                                   const std::map<std::string, std::vector<ScoredFrame>>& scores);

}  // namespace sa2d
