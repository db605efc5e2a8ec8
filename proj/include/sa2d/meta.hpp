#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sa2d/dataset.hpp"
#include "sa2d/losses.hpp"
#include "sa2d/predictor.hpp"
#include "sa2d/rng.hpp"

namespace sa2d {

struct EpisodeTask {
    std::string scenario_id;
    std::string view_id;
    std::vector<TemporalBlock> train_pairs;  // K
    std::vector<TemporalBlock> val_pairs;    // V
};

enum class SamplerMode { scenario, view };

struct MetaConfig {
    int n_way = 7;
    int k_shot = 10;
    int val_size = 10;      // V, defaults to K
    int window = 5;         // T'
    double inner_lr = 1e-2;
    int inner_steps = 1;
    double outer_lr = 1e-2;
    int meta_batch_tasks = 7;
    int epochs = 1500;
    SamplerMode sampler_mode = SamplerMode::scenario;
    bool second_order = false;
    bool adam_outer = false;
    std::uint64_t seed = 0;
    LossWeights loss_weights;
};

// avoids re-decoding PNG frames across episodes
class FrameCache {
public:
    const std::vector<Image>& frames(const VideoRecord& record);

private:
    std::map<std::string, std::vector<Image>> cache_;
};

// One N-way K-shot episode. Scenario mode follows the grouped sampling
// strategy (N scenarios, one view each); view mode ignores scenario
// grouping and picks N (scenario, view) pairs outright.
std::vector<EpisodeTask> sample_episode(const Manifest& manifest, const SplitSpec& split,
                                        const MetaConfig& config, Rng& rng,
                                        FrameCache* cache = nullptr);

// inner_steps plain gradient-descent steps on the mean train-pair loss;
// the input model is left untouched
FramePredictor inner_adapt(const FramePredictor& model, const EpisodeTask& task,
                           const MetaConfig& config);

struct MetaObjective {
    double loss = 0.0;
    std::vector<double> gradient;
};

// Sum over tasks of the adapted model's mean validation loss. The gradient
// is first-order (adapted-gradient applied to theta) or exact second-order
// (differentiated through the inner updates) per config.second_order.
MetaObjective meta_objective(const FramePredictor& model,
                             const std::vector<EpisodeTask>& tasks, const MetaConfig& config);

struct IterationLog {
    int iteration = 0;
    double meta_loss = 0.0;
    double wall_ms = 0.0;
};

using TrainingLog = std::vector<IterationLog>;

void save_training_log(const TrainingLog& log, const std::filesystem::path& path);

struct MetaTrainResult {
    FramePredictor model;
    TrainingLog log;
};

MetaTrainResult meta_train(const Manifest& manifest, const SplitSpec& split,
                           const MetaConfig& config, const PredictorConfig& predictor_config,
                           std::uint64_t init_seed);

struct AdaptResult {
    FramePredictor model;
    int adaptation_boundary = 0;  // last frame index consumed by adaptation
};

// Adapts on the first K temporal blocks of the target video; frames after
// the boundary are the test region.
AdaptResult adapt_to_target(const FramePredictor& model, const VideoRecord& target,
                            const MetaConfig& config);
AdaptResult adapt_to_target(const FramePredictor& model, const std::string& video_id,
                            const std::vector<Image>& frames, const MetaConfig& config);

}  // namespace sa2d
