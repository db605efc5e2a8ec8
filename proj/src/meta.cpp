#include "sa2d/meta.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace sa2d {

const std::vector<Image>& FrameCache::frames(const VideoRecord& record) {
    auto it = cache_.find(record.video_id);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(record.video_id, load_frames(record)).first->second;
}

namespace {

struct ViewPool {
    std::string scenario_id;
    std::string view_id;
    std::vector<const VideoRecord*> videos;
};

std::vector<ViewPool> train_view_pools(const Manifest& manifest, const SplitSpec& split) {
    std::map<std::pair<std::string, std::string>, ViewPool> pools;
    for (const VideoRecord& r : manifest.records) {
        if (!split.train_ids.count(r.video_id)) continue;
        auto key = std::make_pair(r.scenario_id, r.view_id);
        auto& pool = pools[key];
        pool.scenario_id = r.scenario_id;
        pool.view_id = r.view_id;
        pool.videos.push_back(&r);
    }
    std::vector<ViewPool> out;
    out.reserve(pools.size());
    for (auto& [key, pool] : pools) out.push_back(std::move(pool));  // map order: deterministic
    return out;
}

EpisodeTask sample_task_from_view(const ViewPool& pool, const MetaConfig& config, Rng& rng,
                                  FrameCache& cache) {
    // pool of (video, start) block identities across the view's videos
    std::vector<std::pair<const VideoRecord*, int>> block_ids;
    for (const VideoRecord* video : pool.videos) {
        if (video->frame_count < config.window) continue;
        for (int s = 1; s <= block_count(video->frame_count, config.window); ++s)
            block_ids.emplace_back(video, s);
    }
    const std::size_t need = static_cast<std::size_t>(config.k_shot) + config.val_size;
    if (block_ids.size() < need)
        throw Error(ErrorKind::InsufficientBlocks,
                    pool.scenario_id + "/" + pool.view_id + " has " +
                        std::to_string(block_ids.size()) + " blocks, needs " +
                        std::to_string(need));

    EpisodeTask task;
    task.scenario_id = pool.scenario_id;
    task.view_id = pool.view_id;
    for (std::size_t pick : rng.sample_indices(block_ids.size(), need)) {
        const auto& [video, start] = block_ids[pick];
        const std::vector<Image>& frames = cache.frames(*video);
        TemporalBlock b;
        b.source_video = video->video_id;
        b.start_index = start;
        for (int k = 0; k < config.window - 1; ++k)
            b.input_frames.push_back(frames[static_cast<std::size_t>(start) - 1 + k]);
        b.target_frame = frames[static_cast<std::size_t>(start) - 1 + config.window - 1];
        auto& dest =
            task.train_pairs.size() < static_cast<std::size_t>(config.k_shot) ? task.train_pairs
                                                                              : task.val_pairs;
        dest.push_back(std::move(b));
    }
    return task;
}

}  // namespace

std::vector<EpisodeTask> sample_episode(const Manifest& manifest, const SplitSpec& split,
                                        const MetaConfig& config, Rng& rng, FrameCache* cache) {
    if (config.n_way < 1 || config.k_shot < 1 || config.val_size < 1 || config.window < 2)
        throw Error(ErrorKind::InvalidConfig, "episode configuration");
    FrameCache local;
    FrameCache& frames = cache ? *cache : local;

    const std::vector<ViewPool> pools = train_view_pools(manifest, split);
    std::vector<EpisodeTask> tasks;

    if (config.sampler_mode == SamplerMode::scenario) {
        std::vector<std::string> scenarios;
        for (const ViewPool& p : pools)
            if (scenarios.empty() || scenarios.back() != p.scenario_id)
                scenarios.push_back(p.scenario_id);
        if (scenarios.size() < static_cast<std::size_t>(config.n_way))
            throw Error(ErrorKind::InsufficientScenarios,
                        std::to_string(scenarios.size()) + " scenarios available, N=" +
                            std::to_string(config.n_way));
        for (std::size_t pick :
             rng.sample_indices(scenarios.size(), static_cast<std::size_t>(config.n_way))) {
            const std::string& scenario = scenarios[pick];
            std::vector<const ViewPool*> views;
            for (const ViewPool& p : pools)
                if (p.scenario_id == scenario) views.push_back(&p);
            const ViewPool& view = *views[rng.next_below(views.size())];
            tasks.push_back(sample_task_from_view(view, config, rng, frames));
        }
    } else {
        if (pools.size() < static_cast<std::size_t>(config.n_way))
            throw Error(ErrorKind::InsufficientScenarios,
                        std::to_string(pools.size()) + " views available, N=" +
                            std::to_string(config.n_way));
        for (std::size_t pick :
             rng.sample_indices(pools.size(), static_cast<std::size_t>(config.n_way)))
            tasks.push_back(sample_task_from_view(pools[pick], config, rng, frames));
    }
    return tasks;
}

namespace {

// Inner gradient-descent trajectory theta_0..theta_S on the mean train loss.
std::vector<std::vector<double>> inner_trajectory(const FramePredictor& model,
                                                  const std::vector<TemporalBlock>& train_pairs,
                                                  const MetaConfig& config) {
    std::vector<std::vector<double>> steps;
    steps.push_back(model.parameters);
    FramePredictor current = model;
    for (int s = 0; s < config.inner_steps; ++s) {
        if (config.inner_lr == 0.0) {
            steps.push_back(current.parameters);
            continue;
        }
        LossValue g = composite_loss_mean(current, train_pairs, config.loss_weights);
        for (std::size_t i = 0; i < current.parameters.size(); ++i)
            current.parameters[i] -= config.inner_lr * g.gradient[i];
        steps.push_back(current.parameters);
    }
    return steps;
}

// Order-canonical reduction: per coordinate the task contributions are
// sorted before summing, so permuting the task list cannot change the
// result even at the last bit.
double sorted_sum(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
}

std::vector<double> sorted_sum_vectors(const std::vector<std::vector<double>>& parts) {
    if (parts.empty()) return {};
    std::vector<double> out(parts[0].size(), 0.0);
    std::vector<double> column(parts.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t t = 0; t < parts.size(); ++t) column[t] = parts[t][i];
        std::sort(column.begin(), column.end());
        double acc = 0.0;
        for (double v : column) acc += v;
        out[i] = acc;
    }
    return out;
}

}  // namespace

FramePredictor inner_adapt(const FramePredictor& model, const EpisodeTask& task,
                           const MetaConfig& config) {
    if (task.train_pairs.empty()) throw Error(ErrorKind::EmptyTaskSet, "task has no train pairs");
    FramePredictor adapted = model;
    adapted.parameters = inner_trajectory(model, task.train_pairs, config).back();
    return adapted;
}

MetaObjective meta_objective(const FramePredictor& model, const std::vector<EpisodeTask>& tasks,
                             const MetaConfig& config) {
    if (tasks.empty()) throw Error(ErrorKind::EmptyTaskSet, "meta_objective over no tasks");

    std::vector<double> task_losses;
    std::vector<std::vector<double>> task_grads;
    for (const EpisodeTask& task : tasks) {
        if (task.train_pairs.empty() || task.val_pairs.empty())
            throw Error(ErrorKind::EmptyTaskSet, "task with empty pair set");

        const auto trajectory = inner_trajectory(model, task.train_pairs, config);
        FramePredictor adapted = model;
        adapted.parameters = trajectory.back();

        LossValue val = composite_loss_mean(adapted, task.val_pairs, config.loss_weights);
        task_losses.push_back(val.loss);

        std::vector<double> grad = std::move(val.gradient);
        if (config.second_order && config.inner_lr != 0.0) {
            // backpropagate through theta_{s+1} = theta_s - lr * g(theta_s):
            // u <- u - lr * H(theta_s) u, walking the trajectory backwards
            for (int s = config.inner_steps - 1; s >= 0; --s) {
                FramePredictor at = model;
                at.parameters = trajectory[static_cast<std::size_t>(s)];
                const std::vector<double> hv = composite_hvp_mean(
                    model.config, at.parameters, grad, task.train_pairs, config.loss_weights);
                for (std::size_t i = 0; i < grad.size(); ++i)
                    grad[i] -= config.inner_lr * hv[i];
            }
        }
        task_grads.push_back(std::move(grad));
    }

    MetaObjective out;
    out.loss = sorted_sum(std::move(task_losses));
    out.gradient = sorted_sum_vectors(task_grads);
    return out;
}

void save_training_log(const TrainingLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, path.string());
    out << "iteration,meta_loss,wall_ms\n";
    char line[96];
    for (const IterationLog& row : log) {
        std::snprintf(line, sizeof(line), "%d,%.12g,%.3f\n", row.iteration, row.meta_loss,
                      row.wall_ms);
        out << line;
    }
}

MetaTrainResult meta_train(const Manifest& manifest, const SplitSpec& split,
                           const MetaConfig& config, const PredictorConfig& predictor_config,
                           std::uint64_t init_seed) {
    MetaTrainResult result;
    result.model = init_predictor(predictor_config, init_seed);

    Rng sampler_rng(config.seed);
    FrameCache cache;

    // adaptive-moment outer update state (used only with adam_outer)
    std::vector<double> m, v;
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (config.adam_outer) {
        m.assign(result.model.parameters.size(), 0.0);
        v.assign(result.model.parameters.size(), 0.0);
    }

    for (int iter = 1; iter <= config.epochs; ++iter) {
        const auto started = std::chrono::steady_clock::now();

        std::vector<EpisodeTask> tasks;
        while (static_cast<int>(tasks.size()) < config.meta_batch_tasks) {
            auto episode = sample_episode(manifest, split, config, sampler_rng, &cache);
            for (auto& t : episode) {
                if (static_cast<int>(tasks.size()) >= config.meta_batch_tasks) break;
                tasks.push_back(std::move(t));
            }
        }

        MetaObjective objective = meta_objective(result.model, tasks, config);

        if (config.adam_outer) {
            const double b1t = 1.0 - std::pow(beta1, iter);
            const double b2t = 1.0 - std::pow(beta2, iter);
            for (std::size_t i = 0; i < result.model.parameters.size(); ++i) {
                const double gi = objective.gradient[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                result.model.parameters[i] -=
                    config.outer_lr * (m[i] / b1t) / (std::sqrt(v[i] / b2t) + eps);
            }
        } else {
            for (std::size_t i = 0; i < result.model.parameters.size(); ++i)
                result.model.parameters[i] -= config.outer_lr * objective.gradient[i];
        }

        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - started)
                              .count();
        result.log.push_back({iter, objective.loss, ms});
    }
    return result;
}

AdaptResult adapt_to_target(const FramePredictor& model, const std::string& video_id,
                            const std::vector<Image>& frames, const MetaConfig& config) {
    const int needed = config.k_shot + config.window - 1;
    if (static_cast<int>(frames.size()) < needed)
        throw Error(ErrorKind::VideoTooShort,
                    video_id + ": needs " + std::to_string(needed) + " frames for adaptation");

    EpisodeTask task;
    task.scenario_id = "target";
    task.view_id = video_id;
    for (int start = 1; start <= config.k_shot; ++start) {
        TemporalBlock b;
        b.source_video = video_id;
        b.start_index = start;
        for (int k = 0; k < config.window - 1; ++k)
            b.input_frames.push_back(frames[static_cast<std::size_t>(start) - 1 + k]);
        b.target_frame = frames[static_cast<std::size_t>(start) - 1 + config.window - 1];
        task.train_pairs.push_back(std::move(b));
    }

    AdaptResult out{inner_adapt(model, task, config), needed};
    return out;
}

AdaptResult adapt_to_target(const FramePredictor& model, const VideoRecord& target,
                            const MetaConfig& config) {
    return adapt_to_target(model, target.video_id, load_frames(target), config);
}

}  // namespace sa2d
