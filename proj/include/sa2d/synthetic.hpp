#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sa2d/dataset.hpp"
#include "sa2d/image.hpp"

namespace sa2d {

struct SceneDynamics {
    int n_agents = 2;
    double agent_speed_px_per_frame = 1.0;
    int agent_size_px = 6;
    double background_level = 0.35;
    std::optional<int> lighting_period_frames;
    double noise_std = 0.0;  // in [0, 0.2]
};

struct SceneConfig {
    std::string scenario_id;
    SceneDynamics dynamics;
    int frame_h = 32;
    int frame_w = 32;
    std::uint64_t seed = 0;
};

enum class AnomalyKind { speed_burst, intruder, appearance_flip, illumination_spike };

const char* to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(const std::string& name);

struct AnomalySpec {
    AnomalyKind kind = AnomalyKind::speed_burst;
    int start_frame = 1;
    int end_frame = 1;
    double magnitude = 1.0;
};

struct GeneratedVideo {
    std::vector<Image> frames;
    FrameAnnotation annotation;
};

// One camera view of the world simulation defined by (config, length).
// Views of the same config share dynamics and differ by a fixed affine
// viewpoint transform derived from hash(view_id).
GeneratedVideo generate_video(const SceneConfig& config, const std::string& view_id, int length,
                              const std::optional<AnomalySpec>& anomaly = std::nullopt);

struct GeneratorSpec {
    std::vector<SceneConfig> scenarios;
    int views_per_scenario = 2;
    int normals_per_view = 2;
    int abnormals_per_view = 1;
    int length = 60;
    std::uint64_t seed = 0;
};

GeneratorSpec load_generator_spec(const std::filesystem::path& path);
void save_generator_spec(const GeneratorSpec& spec, const std::filesystem::path& path);

// Writes frames/annotations/manifest in the dataset layout and returns the
// manifest (paths resolved against out_dir).
Manifest generate_dataset(const GeneratorSpec& spec, const std::filesystem::path& out_dir);

// Default anomaly magnitudes, cycled through by generate_dataset.
double default_magnitude(AnomalyKind kind);

}  // namespace sa2d
