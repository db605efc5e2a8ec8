#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sa2d/image.hpp"
#include "sa2d/png_io.hpp"

namespace sa2d {

enum class VideoLabel { normal, abnormal };

struct VideoRecord {
    std::string video_id;
    std::string scenario_id;
    std::string view_id;
    int frame_count = 0;
    double fps = 0.0;
    VideoLabel label = VideoLabel::normal;
    std::optional<std::string> anomaly_type;            // present iff abnormal
    std::filesystem::path frames_path;                  // directory of frame_%06d.png
    std::optional<std::filesystem::path> annotation_path;
};

// per-frame binary labels, 0=normal 1=anomalous
using FrameAnnotation = std::vector<int>;

struct Manifest {
    std::vector<VideoRecord> records;
    // scenario_id -> view_id -> video_ids
    std::map<std::string, std::map<std::string, std::vector<std::string>>> scenario_index;

    const VideoRecord& record(const std::string& video_id) const;
    bool has(const std::string& video_id) const;
};

enum class Protocol { protocol_i, protocol_ii };
enum class Supervision { normal_only, video_level };

struct SplitSpec {
    Protocol protocol = Protocol::protocol_i;
    std::uint64_t seed = 0;
    std::set<std::string> train_ids;
    std::set<std::string> test_ids;
    Supervision supervision = Supervision::normal_only;

    bool annotations_visible(const std::string& video_id) const {
        // under video-level supervision the train annotations stay hidden
        return !(supervision == Supervision::video_level && train_ids.count(video_id) > 0);
    }
};

struct TemporalBlock {
    std::string source_video;
    int start_index = 1;              // 1-based index of the block's first frame
    std::vector<Image> input_frames;  // T'-1 frames
    Image target_frame;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

FrameAnnotation load_annotation(const VideoRecord& record);

// Split-aware accessor; refuses train-video annotations under video-level
// supervision (SupervisionViolation).
FrameAnnotation load_annotation_checked(const Manifest& manifest, const SplitSpec& split,
                                        const std::string& video_id);

SplitSpec protocol_split(const Manifest& manifest, Protocol protocol, std::uint64_t seed);

SplitSpec load_split(const std::filesystem::path& path);
void save_split(const SplitSpec& split, const std::filesystem::path& path);

Image load_frame(const VideoRecord& record, int frame_index,
                 ChannelMode mode = ChannelMode::grayscale);
std::vector<Image> load_frames(const VideoRecord& record);

std::filesystem::path frame_file(const std::filesystem::path& frames_dir, int frame_index);

// All length-T' windows with step 1; block i covers frames i..i+T'-1.
std::vector<TemporalBlock> slide_blocks(const VideoRecord& record, int window);
std::vector<TemporalBlock> slide_blocks(const std::string& video_id,
                                        const std::vector<Image>& frames, int window);

inline int block_count(int frame_count, int window) { return frame_count - window + 1; }

}  // namespace sa2d
