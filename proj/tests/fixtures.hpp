#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sa2d/dataset.hpp"
#include "sa2d/rng.hpp"
#include "sa2d/synthetic.hpp"

namespace fixtures {

namespace fs = std::filesystem;

inline fs::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    const fs::path dir =
        fs::temp_directory_path() / ("sa2d_test_" + tag + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// smooth low-frequency image, values well inside (0,1)
inline sa2d::Image smooth_image(int h, int w, sa2d::Rng& rng) {
    const double a = rng.next_in(0.2, 0.9), b = rng.next_in(0.2, 0.9);
    const double phase = rng.next_in(0.0, 6.28), amp = rng.next_in(0.15, 0.35);
    sa2d::Image img(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            img.at(i, j) = 0.5 + amp * std::sin(a * i + b * j + phase);
    return img;
}

inline std::vector<sa2d::Image> smooth_sequence(int n, int h, int w, sa2d::Rng& rng) {
    std::vector<sa2d::Image> out;
    for (int k = 0; k < n; ++k) out.push_back(smooth_image(h, w, rng));
    return out;
}

inline sa2d::TemporalBlock smooth_block(int input_frames, int h, int w, sa2d::Rng& rng) {
    sa2d::TemporalBlock block;
    block.source_video = "synthetic";
    block.start_index = 1;
    block.input_frames = smooth_sequence(input_frames, h, w, rng);
    block.target_frame = smooth_image(h, w, rng);
    return block;
}

inline sa2d::SceneConfig scene(const std::string& id, int agents, double speed, int size,
                               double background, double noise, int frame_hw = 16,
                               std::uint64_t seed = 1) {
    sa2d::SceneConfig config;
    config.scenario_id = id;
    config.dynamics.n_agents = agents;
    config.dynamics.agent_speed_px_per_frame = speed;
    config.dynamics.agent_size_px = size;
    config.dynamics.background_level = background;
    config.dynamics.noise_std = noise;
    config.frame_h = frame_hw;
    config.frame_w = frame_hw;
    config.seed = seed;
    return config;
}

// 14 scenarios x 2 views x 2 normals, 16x16, length 40: enough strata for
// the N=7 K=10 episode examples
inline const sa2d::Manifest& episode_manifest() {
    static const auto cached = [] {
        sa2d::GeneratorSpec spec;
        for (int s = 0; s < 14; ++s)
            spec.scenarios.push_back(scene("scn" + std::string(s < 9 ? "0" : "") +
                                               std::to_string(s + 1),
                                           1, 0.8 + 0.1 * s, 4, 0.25 + 0.02 * s, 0.0));
        spec.views_per_scenario = 2;
        spec.normals_per_view = 2;
        spec.abnormals_per_view = 0;
        spec.length = 40;
        spec.seed = 11;
        const fs::path dir = fresh_dir("episodes");
        return sa2d::generate_dataset(spec, dir);
    }();
    return cached;
}

}  // namespace fixtures
