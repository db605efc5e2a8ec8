#include "sa2d/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sa2d {

double psnr(const Image& truth, const Image& pred) {
    require_same_shape(truth, pred, "psnr");
    double peak = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < truth.px.size(); ++i) {
        peak = std::max(peak, truth.px[i]);
        const double d = truth.px[i] - pred.px[i];
        sq += d * d;
    }
    if (peak == 0.0) peak = 1.0;
    const double mse = sq / static_cast<double>(truth.px.size());
    if (mse < peak * peak * 1e-10) return 100.0;
    return 10.0 * std::log10(peak * peak / mse);
}

std::vector<double> normalize_scores(const std::vector<double>& psnr_values) {
    if (psnr_values.empty()) throw Error(ErrorKind::EmptyInput, "normalize_scores");
    const auto [lo_it, hi_it] = std::minmax_element(psnr_values.begin(), psnr_values.end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<double> out(psnr_values.size());
    if (hi == lo) {
        std::fill(out.begin(), out.end(), 1.0);  // flat profile: uniformly normal
        return out;
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (psnr_values[i] - lo) / (hi - lo);
    return out;
}

ScoreSeries score_video_from(const FramePredictor& model, const std::string& video_id,
                             const std::vector<Image>& frames, int window,
                             int first_scored_frame) {
    const int frame_count = static_cast<int>(frames.size());
    if (window < 2) throw Error(ErrorKind::InvalidConfig, "window must be >= 2");
    if (first_scored_frame < window) first_scored_frame = window;
    if (frame_count < first_scored_frame)
        throw Error(ErrorKind::VideoTooShort,
                    video_id + ": " + std::to_string(frame_count) + " frames, first scorable " +
                        std::to_string(first_scored_frame));

    std::vector<double> psnrs;
    psnrs.reserve(static_cast<std::size_t>(frame_count - first_scored_frame + 1));
    std::vector<Image> input(static_cast<std::size_t>(window) - 1);
    for (int t = first_scored_frame; t <= frame_count; ++t) {
        for (int k = 0; k < window - 1; ++k)
            input[static_cast<std::size_t>(k)] = frames[static_cast<std::size_t>(t - window + k)];
        const Image predicted = predict(model, input);
        psnrs.push_back(psnr(frames[static_cast<std::size_t>(t) - 1], predicted));
    }

    ScoreSeries series;
    series.video_id = video_id;
    series.first_scored_frame = first_scored_frame;
    series.scores = normalize_scores(psnrs);
    return series;
}

ScoreSeries score_video(const FramePredictor& model, const std::string& video_id,
                        const std::vector<Image>& frames, int window) {
    return score_video_from(model, video_id, frames, window, window);
}

ScoreSeries score_video(const FramePredictor& model, const VideoRecord& video, int window) {
    if (video.frame_count < window) throw Error(ErrorKind::VideoTooShort, video.video_id);
    return score_video(model, video.video_id, load_frames(video), window);
}

std::vector<int> decide(const ScoreSeries& series, double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw Error(ErrorKind::InvalidConfig, "threshold must be in [0,1]");
    std::vector<int> out(series.scores.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = series.scores[i] < threshold ? 1 : 0;
    return out;
}

void write_scores_csv(const std::vector<ScoreSeries>& series, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, path.string());
    out << "video_id,frame_index,score\n";
    char line[160];
    for (const ScoreSeries& s : series)
        for (std::size_t i = 0; i < s.scores.size(); ++i) {
            std::snprintf(line, sizeof(line), "%s,%d,%.12g\n", s.video_id.c_str(),
                          s.first_scored_frame + static_cast<int>(i), s.scores[i]);
            out << line;
        }
}

std::map<std::string, std::vector<ScoredFrame>> read_scores_csv(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    std::string line;
    if (!std::getline(in, line) || line != "video_id,frame_index,score")
        throw Error(ErrorKind::SchemaError, "score CSV header: " + path.string());

    std::map<std::string, std::vector<ScoredFrame>> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string id, index_str, score_str;
        if (!std::getline(row, id, ',') || !std::getline(row, index_str, ',') ||
            !std::getline(row, score_str))
            throw Error(ErrorKind::SchemaError, "score CSV row: " + line);
        ScoredFrame f;
        try {
            f.frame_index = std::stoi(index_str);
            f.score = std::stod(score_str);
        } catch (const std::exception&) {
            throw Error(ErrorKind::SchemaError, "score CSV values: " + line);
        }
        if (f.frame_index < 1 || f.score < 0.0 || f.score > 1.0)
            throw Error(ErrorKind::SchemaError, "score CSV out of range: " + line);
        out[id].push_back(f);
    }
    return out;
}

}  // namespace sa2d
