#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sa2d/dataset.hpp"
#include "sa2d/predictor.hpp"

namespace sa2d {

struct ScoreSeries {
    std::string video_id;
    std::vector<double> scores;  // normalized s_t, one per scored frame
    int first_scored_frame = 0;  // 1-based frame index of scores[0]
    double threshold = 0.8;
};

// 10 log10(peak^2 / MSE) with peak = max(truth), falling back to 1 for an
// all-zero frame; capped at 100 dB near zero MSE.
double psnr(const Image& truth, const Image& pred);

// per-video min-max normalization; a flat profile maps to all-ones (normal)
std::vector<double> normalize_scores(const std::vector<double>& psnr_values);

// Predicts every frame from its T'-1 predecessors and normalizes the PSNR
// profile. first_scored_frame >= window selects the scored suffix (used
// after inference-time adaptation).
ScoreSeries score_video(const FramePredictor& model, const std::string& video_id,
                        const std::vector<Image>& frames, int window);
ScoreSeries score_video(const FramePredictor& model, const VideoRecord& video, int window);
ScoreSeries score_video_from(const FramePredictor& model, const std::string& video_id,
                             const std::vector<Image>& frames, int window,
                             int first_scored_frame);

// 1 = anomaly (s_t below threshold)
std::vector<int> decide(const ScoreSeries& series, double threshold);

// score CSV: header video_id,frame_index,score
void write_scores_csv(const std::vector<ScoreSeries>& series, const std::filesystem::path& path);

struct ScoredFrame {
    int frame_index = 0;
    double score = 0.0;
};
std::map<std::string, std::vector<ScoredFrame>> read_scores_csv(
    const std::filesystem::path& path);

}  // namespace sa2d
