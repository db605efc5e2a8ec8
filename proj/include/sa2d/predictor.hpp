#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sa2d/image.hpp"

namespace sa2d {

struct PredictorConfig {
    int frame_h = 32;
    int frame_w = 32;
    int input_frames = 4;  // T' - 1
    int base_channels = 8;
    int depth = 2;
    bool recurrent_bottleneck = false;
};

struct LayerInfo {
    std::string name;
    int in_ch = 0;
    int out_ch = 0;
    std::size_t weight_offset = 0;  // out*in*9 values
    std::size_t bias_offset = 0;    // out values
};

struct ParamLayout {
    std::vector<LayerInfo> layers;
    std::size_t total = 0;

    const LayerInfo& layer(const std::string& name) const;
};

// Validates the config (frame size divisible by 2^depth) and returns the
// named flat layout; parameter count is a pure function of the config.
ParamLayout param_layout(const PredictorConfig& config);

inline std::size_t param_count(const PredictorConfig& config) {
    return param_layout(config).total;
}

// Encoder-decoder future-frame predictor with skip connections and an
// optional gated convolutional memory bottleneck. The final sigmoid keeps
// outputs inside [0,1].
struct FramePredictor {
    PredictorConfig config;
    std::vector<double> parameters;
};

FramePredictor init_predictor(const PredictorConfig& config, std::uint64_t seed);

Image predict(const FramePredictor& model, const std::vector<Image>& input);
std::vector<Image> predict_batch(const FramePredictor& model,
                                 const std::vector<std::vector<Image>>& inputs);

// checkpoint: version byte, u32 LE json header length, json header
// (config + count), params as little-endian doubles
void save_checkpoint(const FramePredictor& model, const std::filesystem::path& path);
FramePredictor load_checkpoint(const std::filesystem::path& path);

}  // namespace sa2d
