// sa2d: scenario-adaptive video anomaly detection pipeline.
// Subcommands: gen-data, train, adapt-score, eval.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "sa2d/dataset.hpp"
#include "sa2d/evaluation.hpp"
#include "sa2d/meta.hpp"
#include "sa2d/plot.hpp"
#include "sa2d/predictor.hpp"
#include "sa2d/scoring.hpp"
#include "sa2d/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sa2d;

namespace {

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, path);
    json j;
    in >> j;
    return j;
}

// config precedence: CLI flag > config file > built-in default
template <typename T>
void merge(const CLI::Option* opt, const json& cfg, const char* key, T& value) {
    if (opt->count() == 0 && cfg.contains(key)) value = cfg.at(key).get<T>();
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, path.string());
    out << j.dump(2) << "\n";
}

struct TrainArgs {
    std::string manifest_path, out_dir, config_path;
    std::uint64_t seed = 0;
    int epochs = 1500;
    int n_way = 7;
    int k_shot = 10;
    int val_size = -1;  // -1: defaults to K
    int window = 5;
    double inner_lr = 0.01;
    int inner_steps = 1;
    double outer_lr = 0.01;
    int meta_batch = -1;  // -1: defaults to N
    std::string sampler = "scenario";
    bool second_order = false;
    bool adam_outer = false;
    int base_channels = 8;
    int depth = 2;
    bool recurrent = false;
};

int run_train(const TrainArgs& args) {
    const Manifest manifest = load_manifest(args.manifest_path);
    const SplitSpec split = protocol_split(manifest, Protocol::protocol_i, args.seed);

    MetaConfig meta;
    meta.n_way = args.n_way;
    meta.k_shot = args.k_shot;
    meta.val_size = args.val_size > 0 ? args.val_size : args.k_shot;
    meta.window = args.window;
    meta.inner_lr = args.inner_lr;
    meta.inner_steps = args.inner_steps;
    meta.outer_lr = args.outer_lr;
    meta.meta_batch_tasks = args.meta_batch > 0 ? args.meta_batch : args.n_way;
    meta.epochs = args.epochs;
    meta.sampler_mode = args.sampler == "view" ? SamplerMode::view : SamplerMode::scenario;
    meta.second_order = args.second_order;
    meta.adam_outer = args.adam_outer;
    meta.seed = args.seed;

    // frame geometry comes from the training data
    const VideoRecord* first_train = nullptr;
    for (const auto& r : manifest.records)
        if (split.train_ids.count(r.video_id)) {
            first_train = &r;
            break;
        }
    if (!first_train) throw Error(ErrorKind::InsufficientVideos, "empty train split");
    const Image probe = load_frame(*first_train, 1);

    PredictorConfig predictor;
    predictor.frame_h = probe.h;
    predictor.frame_w = probe.w;
    predictor.input_frames = meta.window - 1;
    predictor.base_channels = args.base_channels;
    predictor.depth = args.depth;
    predictor.recurrent_bottleneck = args.recurrent;

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);

    json resolved;
    resolved["command"] = "train";
    resolved["manifest"] = args.manifest_path;
    resolved["seed"] = args.seed;
    resolved["protocol"] = "protocol_i";
    resolved["n_way"] = meta.n_way;
    resolved["k_shot"] = meta.k_shot;
    resolved["val_size"] = meta.val_size;
    resolved["window"] = meta.window;
    resolved["inner_lr"] = meta.inner_lr;
    resolved["inner_steps"] = meta.inner_steps;
    resolved["outer_lr"] = meta.outer_lr;
    resolved["meta_batch_tasks"] = meta.meta_batch_tasks;
    resolved["epochs"] = meta.epochs;
    resolved["sampler_mode"] = meta.sampler_mode == SamplerMode::view ? "view" : "scenario";
    resolved["second_order"] = meta.second_order;
    resolved["adam_outer"] = meta.adam_outer;
    resolved["frame_h"] = predictor.frame_h;
    resolved["frame_w"] = predictor.frame_w;
    resolved["base_channels"] = predictor.base_channels;
    resolved["depth"] = predictor.depth;
    resolved["recurrent_bottleneck"] = predictor.recurrent_bottleneck;
    write_json(resolved, out / "train_config.json");
    std::cout << "resolved config: " << resolved.dump() << "\n";

    MetaTrainResult result = meta_train(manifest, split, meta, predictor, args.seed);

    save_checkpoint(result.model, out / "checkpoint.sa2d");
    save_training_log(result.log, out / "training_log.csv");
    save_split(split, out / "split.json");

    std::cout << "checkpoint: " << (out / "checkpoint.sa2d").string() << "\n";
    if (!result.log.empty())
        std::cout << "final meta-loss: " << result.log.back().meta_loss << "\n";
    return 0;
}

struct AdaptScoreArgs {
    std::string manifest_path, checkpoint_path, split_path, out_dir, config_path;
    int k_shot = 10;
    double inner_lr = 0.01;
    int inner_steps = 1;
    bool no_adapt = false;
    bool curves = false;
    double threshold = 0.8;
};

int run_adapt_score(const AdaptScoreArgs& args) {
    const Manifest manifest = load_manifest(args.manifest_path);
    const SplitSpec split = load_split(args.split_path);
    const FramePredictor model = load_checkpoint(args.checkpoint_path);
    const int window = model.config.input_frames + 1;

    MetaConfig adapt;
    adapt.k_shot = args.k_shot;
    adapt.window = window;
    adapt.inner_lr = args.no_adapt ? 0.0 : args.inner_lr;
    adapt.inner_steps = args.inner_steps;

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    if (args.curves) fs::create_directories(out / "curves");

    json resolved;
    resolved["command"] = "adapt-score";
    resolved["manifest"] = args.manifest_path;
    resolved["checkpoint"] = args.checkpoint_path;
    resolved["split"] = args.split_path;
    resolved["k_shot"] = adapt.k_shot;
    resolved["window"] = window;
    resolved["inner_lr"] = adapt.inner_lr;
    resolved["inner_steps"] = adapt.inner_steps;
    resolved["no_adapt"] = args.no_adapt;
    resolved["threshold"] = args.threshold;
    resolved["adaptation_boundary"] = adapt.k_shot + window - 1;
    write_json(resolved, out / "adapt_config.json");

    std::vector<ScoreSeries> all_series;
    std::vector<std::string> skipped;
    for (const auto& id : split.test_ids) {
        const VideoRecord& video = manifest.record(id);
        try {
            const std::vector<Image> frames = load_frames(video);
            const AdaptResult adapted = adapt_to_target(model, video.video_id, frames, adapt);
            // full series per the score_video contract; the adaptation
            // boundary is recorded in the config snapshot for consumers
            // that want to cut the adaptation prefix
            ScoreSeries series = score_video(adapted.model, video.video_id, frames, window);
            series.threshold = args.threshold;
            if (args.curves) {
                std::optional<FrameAnnotation> annotation;
                if (video.annotation_path && split.annotations_visible(id))
                    annotation = load_annotation(video);
                plot_score_curve(series, annotation, out / "curves" / (id + ".png"));
            }
            all_series.push_back(std::move(series));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::VideoTooShort) throw;
            skipped.push_back(id);
            std::cerr << "skipped " << id << ": " << e.what() << "\n";
        }
    }

    write_scores_csv(all_series, out / "scores.csv");
    std::cout << "scored " << all_series.size() << " videos";
    if (!skipped.empty()) std::cout << ", skipped " << skipped.size() << " (too short)";
    std::cout << "\nscores: " << (out / "scores.csv").string() << "\n";
    return all_series.empty() && !split.test_ids.empty() ? 1 : 0;
}

struct EvalArgs {
    std::string scores_path, manifest_path, split_path, out_dir, config_path;
    std::string group_by = "anomaly_type";
    std::string polarity = "normalcy";
    double threshold = 0.8;
};

int run_eval(const EvalArgs& args) {
    const Manifest manifest = load_manifest(args.manifest_path);
    const SplitSpec split = load_split(args.split_path);

    auto scores = read_scores_csv(args.scores_path);
    if (args.polarity == "anomaly")  // external detectors may emit anomaly scores
        for (auto& [id, frames] : scores)
            for (ScoredFrame& f : frames) f.score = 1.0 - f.score;

    const LabeledScores data = build_labeled_scores(manifest, split, scores);
    const GroupBy group_by =
        args.group_by == "scenario" ? GroupBy::scenario : GroupBy::anomaly_type;
    const Report report = grouped_report(data, manifest, group_by, args.threshold);

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    write_report_csv(report, out / "report.csv");
    write_report_json(report, out / "report.json");

    json resolved;
    resolved["command"] = "eval";
    resolved["scores"] = args.scores_path;
    resolved["manifest"] = args.manifest_path;
    resolved["split"] = args.split_path;
    resolved["group_by"] = args.group_by;
    resolved["polarity"] = args.polarity;
    resolved["threshold"] = args.threshold;
    write_json(resolved, out / "eval_config.json");

    std::cout << "group,n_videos,n_frames,auc,ap,fpr,status\n";
    for (const ReportRow& row : report.rows)
        std::cout << row.group << "," << row.n_videos << "," << row.n_frames << ","
                  << (row.auc ? std::to_string(*row.auc) : "") << ","
                  << (row.ap ? std::to_string(*row.ap) : "") << ","
                  << (row.fpr ? std::to_string(*row.fpr) : "") << "," << row.status << "\n";
    const ReportRow& overall = report.overall;
    std::cout << "Overall," << overall.n_videos << "," << overall.n_frames << ","
              << (overall.auc ? std::to_string(*overall.auc) : "") << ","
              << (overall.ap ? std::to_string(*overall.ap) : "") << ","
              << (overall.fpr ? std::to_string(*overall.fpr) : "") << "," << overall.status
              << "\n";
    return overall.status == "ok" ? 0 : 1;
}

struct GenDataArgs {
    std::string spec_path, out_dir;
    std::optional<std::uint64_t> seed;
};

int run_gen_data(const GenDataArgs& args) {
    GeneratorSpec spec = load_generator_spec(args.spec_path);
    if (args.seed) spec.seed = *args.seed;

    const Manifest manifest = generate_dataset(spec, args.out_dir);
    save_generator_spec(spec, fs::path(args.out_dir) / "gen_config.json");

    std::cout << "videos: " << manifest.records.size()
              << ", scenarios: " << manifest.scenario_index.size() << "\n";
    std::cout << "manifest: " << (fs::path(args.out_dir) / "manifest.json").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scenario-adaptive video anomaly detection"};
    app.require_subcommand(1);

    GenDataArgs gen;
    std::uint64_t gen_seed = 0;
    auto* cmd_gen = app.add_subcommand("gen-data", "generate a synthetic multi-scenario dataset");
    cmd_gen->add_option("--spec", gen.spec_path, "generator spec JSON")->required();
    cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
    auto* gen_seed_opt = cmd_gen->add_option("--seed", gen_seed, "seed override");

    TrainArgs train;
    auto* cmd_train = app.add_subcommand("train", "meta-train the future-frame predictor");
    cmd_train->add_option("--manifest", train.manifest_path, "dataset manifest")->required();
    cmd_train->add_option("--out", train.out_dir, "output directory")->required();
    cmd_train->add_option("--config", train.config_path, "JSON config file");
    auto* o_seed = cmd_train->add_option("--seed", train.seed, "random seed");
    auto* o_epochs = cmd_train->add_option("--epochs", train.epochs, "outer iterations");
    auto* o_nway = cmd_train->add_option("--n-way", train.n_way, "scenarios per episode");
    auto* o_kshot = cmd_train->add_option("--k-shot", train.k_shot, "train pairs per task");
    auto* o_val = cmd_train->add_option("--val-size", train.val_size, "val pairs per task");
    auto* o_window = cmd_train->add_option("--window", train.window, "temporal window T'");
    auto* o_ilr = cmd_train->add_option("--inner-lr", train.inner_lr, "inner learning rate");
    auto* o_ist = cmd_train->add_option("--inner-steps", train.inner_steps, "inner steps");
    auto* o_olr = cmd_train->add_option("--outer-lr", train.outer_lr, "outer learning rate");
    auto* o_batch = cmd_train->add_option("--meta-batch", train.meta_batch, "tasks per iteration");
    auto* o_sampler = cmd_train->add_option("--sampler", train.sampler, "scenario|view")
                          ->check(CLI::IsMember({"scenario", "view"}));
    auto* o_second = cmd_train->add_flag("--second-order", train.second_order,
                                         "differentiate through the inner update");
    auto* o_adam = cmd_train->add_flag("--adam", train.adam_outer, "adaptive-moment outer update");
    auto* o_base = cmd_train->add_option("--base-channels", train.base_channels, "channel width");
    auto* o_depth = cmd_train->add_option("--depth", train.depth, "down/up levels");
    auto* o_rec = cmd_train->add_flag("--recurrent", train.recurrent, "gated memory bottleneck");

    AdaptScoreArgs adapt;
    auto* cmd_adapt = app.add_subcommand("adapt-score", "adapt to each test video and score it");
    cmd_adapt->add_option("--manifest", adapt.manifest_path, "dataset manifest")->required();
    cmd_adapt->add_option("--checkpoint", adapt.checkpoint_path, "model checkpoint")->required();
    cmd_adapt->add_option("--split", adapt.split_path, "split JSON")->required();
    cmd_adapt->add_option("--out", adapt.out_dir, "output directory")->required();
    cmd_adapt->add_option("--config", adapt.config_path, "JSON config file");
    auto* a_k = cmd_adapt->add_option("--k-shot", adapt.k_shot, "adaptation blocks");
    auto* a_ilr = cmd_adapt->add_option("--inner-lr", adapt.inner_lr, "adaptation rate");
    auto* a_ist = cmd_adapt->add_option("--inner-steps", adapt.inner_steps, "adaptation steps");
    auto* a_na = cmd_adapt->add_flag("--no-adapt", adapt.no_adapt, "score without adaptation");
    auto* a_cv = cmd_adapt->add_flag("--curves", adapt.curves, "emit per-video curve plots");
    auto* a_th = cmd_adapt->add_option("--threshold", adapt.threshold, "decision threshold");

    EvalArgs eval;
    auto* cmd_eval = app.add_subcommand("eval", "evaluate a score file against annotations");
    cmd_eval->add_option("--scores", eval.scores_path, "score CSV")->required();
    cmd_eval->add_option("--manifest", eval.manifest_path, "dataset manifest")->required();
    cmd_eval->add_option("--split", eval.split_path, "split JSON")->required();
    cmd_eval->add_option("--out", eval.out_dir, "output directory")->required();
    cmd_eval->add_option("--config", eval.config_path, "JSON config file");
    auto* e_gb = cmd_eval->add_option("--group-by", eval.group_by, "anomaly_type|scenario")
                     ->check(CLI::IsMember({"anomaly_type", "scenario"}));
    auto* e_pol = cmd_eval->add_option("--polarity", eval.polarity, "normalcy|anomaly")
                      ->check(CLI::IsMember({"normalcy", "anomaly"}));
    auto* e_th = cmd_eval->add_option("--threshold", eval.threshold, "decision threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors exit 2
    }

    try {
        if (cmd_gen->parsed()) {
            if (gen_seed_opt->count() > 0) gen.seed = gen_seed;
            return run_gen_data(gen);
        }
        if (cmd_train->parsed()) {
            const json cfg = load_config_file(train.config_path);
            merge(o_seed, cfg, "seed", train.seed);
            merge(o_epochs, cfg, "epochs", train.epochs);
            merge(o_nway, cfg, "n_way", train.n_way);
            merge(o_kshot, cfg, "k_shot", train.k_shot);
            merge(o_val, cfg, "val_size", train.val_size);
            merge(o_window, cfg, "window", train.window);
            merge(o_ilr, cfg, "inner_lr", train.inner_lr);
            merge(o_ist, cfg, "inner_steps", train.inner_steps);
            merge(o_olr, cfg, "outer_lr", train.outer_lr);
            merge(o_batch, cfg, "meta_batch_tasks", train.meta_batch);
            merge(o_sampler, cfg, "sampler_mode", train.sampler);
            merge(o_second, cfg, "second_order", train.second_order);
            merge(o_adam, cfg, "adam_outer", train.adam_outer);
            merge(o_base, cfg, "base_channels", train.base_channels);
            merge(o_depth, cfg, "depth", train.depth);
            merge(o_rec, cfg, "recurrent_bottleneck", train.recurrent);
            return run_train(train);
        }
        if (cmd_adapt->parsed()) {
            const json cfg = load_config_file(adapt.config_path);
            merge(a_k, cfg, "k_shot", adapt.k_shot);
            merge(a_ilr, cfg, "inner_lr", adapt.inner_lr);
            merge(a_ist, cfg, "inner_steps", adapt.inner_steps);
            merge(a_na, cfg, "no_adapt", adapt.no_adapt);
            merge(a_cv, cfg, "curves", adapt.curves);
            merge(a_th, cfg, "threshold", adapt.threshold);
            return run_adapt_score(adapt);
        }
        if (cmd_eval->parsed()) {
            const json cfg = load_config_file(eval.config_path);
            merge(e_gb, cfg, "group_by", eval.group_by);
            merge(e_pol, cfg, "polarity", eval.polarity);
            merge(e_th, cfg, "threshold", eval.threshold);
            return run_eval(eval);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
