#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "sa2d/predictor.hpp"
#include "sa2d/scoring.hpp"
#include "sa2d/synthetic.hpp"

using namespace sa2d;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SA2D_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

void write_gen_spec(const fs::path& path, int scenarios, int views, int normals, int abnormals,
                    int length) {
    GeneratorSpec spec;
    for (int s = 0; s < scenarios; ++s)
        spec.scenarios.push_back(
            fixtures::scene("scn" + std::to_string(s), 1, 1.0 + 0.2 * s, 4, 0.3, 0.0));
    spec.views_per_scenario = views;
    spec.normals_per_view = normals;
    spec.abnormals_per_view = abnormals;
    spec.length = length;
    spec.seed = 5;
    save_generator_spec(spec, path);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen-data is deterministic and counts scenarios") {
    const fs::path dir = fixtures::fresh_dir("cli_gen");
    write_gen_spec(dir / "spec.json", 3, 2, 1, 1, 12);

    REQUIRE(run_cli("gen-data --spec " + (dir / "spec.json").string() + " --out " +
                    (dir / "a").string() + " --seed 7") == 0);
    REQUIRE(run_cli("gen-data --spec " + (dir / "spec.json").string() + " --out " +
                    (dir / "b").string() + " --seed 7") == 0);

    CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
    for (auto it = fs::recursive_directory_iterator(dir / "a");
         it != fs::recursive_directory_iterator(); ++it) {
        if (!it->is_regular_file()) continue;
        const fs::path rel = fs::relative(it->path(), dir / "a");
        CHECK(slurp(it->path()) == slurp(dir / "b" / rel));
    }

    const Manifest m = load_manifest(dir / "a" / "manifest.json");
    CHECK(m.scenario_index.size() == 3);
}

TEST_CASE("missing required flag is a usage error") {
    CHECK(run_cli("gen-data --out /tmp/nowhere") == 2);
    CHECK(run_cli("definitely-not-a-command") == 2);
}

TEST_CASE("train resolved config records defaults and sampler choice") {
    const fs::path dir = fixtures::fresh_dir("cli_train_cfg");
    // 2 scenarios is fewer than the default N=7, so training fails fast
    // after the resolved config has been written
    write_gen_spec(dir / "spec.json", 2, 1, 4, 0, 12);
    REQUIRE(run_cli("gen-data --spec " + (dir / "spec.json").string() + " --out " +
                    (dir / "data").string()) == 0);

    CHECK(run_cli("train --manifest " + (dir / "data" / "manifest.json").string() + " --out " +
                  (dir / "run").string()) == 1);
    const json resolved = json::parse(slurp(dir / "run" / "train_config.json"));
    CHECK(resolved["n_way"] == 7);
    CHECK(resolved["k_shot"] == 10);
    CHECK(resolved["epochs"] == 1500);
    CHECK(resolved["sampler_mode"] == "scenario");

    CHECK(run_cli("train --manifest " + (dir / "data" / "manifest.json").string() + " --out " +
                  (dir / "run2").string() + " --sampler view") == 1);
    const json resolved2 = json::parse(slurp(dir / "run2" / "train_config.json"));
    CHECK(resolved2["sampler_mode"] == "view");
}

TEST_CASE("config file values sit between defaults and flags") {
    const fs::path dir = fixtures::fresh_dir("cli_cfg_prec");
    write_gen_spec(dir / "spec.json", 2, 1, 4, 0, 12);
    REQUIRE(run_cli("gen-data --spec " + (dir / "spec.json").string() + " --out " +
                    (dir / "data").string()) == 0);

    std::ofstream cfg(dir / "config.json");
    cfg << R"({"n_way": 3, "k_shot": 4})";
    cfg.close();

    CHECK(run_cli("train --manifest " + (dir / "data" / "manifest.json").string() + " --out " +
                  (dir / "run").string() + " --config " + (dir / "config.json").string() +
                  " --n-way 9") == 1);
    const json resolved = json::parse(slurp(dir / "run" / "train_config.json"));
    CHECK(resolved["n_way"] == 9);   // flag wins
    CHECK(resolved["k_shot"] == 4);  // file beats default
}

TEST_CASE("end-to-end: train, adapt-score, eval") {
    const fs::path dir = fixtures::fresh_dir("cli_e2e");
    write_gen_spec(dir / "spec.json", 2, 2, 2, 1, 26);
    REQUIRE(run_cli("gen-data --spec " + (dir / "spec.json").string() + " --out " +
                    (dir / "data").string()) == 0);
    const std::string manifest = (dir / "data" / "manifest.json").string();

    const std::string train_args =
        "train --manifest " + manifest + " --out " + (dir / "run").string() +
        " --epochs 2 --n-way 2 --k-shot 2 --val-size 2 --meta-batch 2 --base-channels 2"
        " --depth 1 --seed 3";
    REQUIRE(run_cli(train_args) == 0);
    CHECK(fs::exists(dir / "run" / "checkpoint.sa2d"));
    CHECK(fs::exists(dir / "run" / "training_log.csv"));
    CHECK(fs::exists(dir / "run" / "split.json"));

    // identical seeds give identical checkpoints
    REQUIRE(run_cli("train --manifest " + manifest + " --out " + (dir / "run_b").string() +
                    " --epochs 2 --n-way 2 --k-shot 2 --val-size 2 --meta-batch 2"
                    " --base-channels 2 --depth 1 --seed 3") == 0);
    CHECK(slurp(dir / "run" / "checkpoint.sa2d") == slurp(dir / "run_b" / "checkpoint.sa2d"));

    // --epochs 0 emits the initialized checkpoint
    REQUIRE(run_cli("train --manifest " + manifest + " --out " + (dir / "run0").string() +
                    " --epochs 0 --n-way 2 --k-shot 2 --base-channels 2 --depth 1 --seed 3") ==
            0);
    const FramePredictor initial = load_checkpoint(dir / "run0" / "checkpoint.sa2d");
    PredictorConfig expected_cfg = initial.config;
    CHECK(initial.parameters == init_predictor(expected_cfg, 3).parameters);

    const std::string adapt_args = "adapt-score --manifest " + manifest + " --checkpoint " +
                                   (dir / "run" / "checkpoint.sa2d").string() + " --split " +
                                   (dir / "run" / "split.json").string() + " --out " +
                                   (dir / "scores").string() + " --k-shot 3 --curves";
    REQUIRE(run_cli(adapt_args) == 0);
    REQUIRE(fs::exists(dir / "scores" / "scores.csv"));

    // --no-adapt is exactly inner_lr = 0
    REQUIRE(run_cli("adapt-score --manifest " + manifest + " --checkpoint " +
                    (dir / "run" / "checkpoint.sa2d").string() + " --split " +
                    (dir / "run" / "split.json").string() + " --out " +
                    (dir / "scores_na").string() + " --k-shot 3 --no-adapt") == 0);
    REQUIRE(run_cli("adapt-score --manifest " + manifest + " --checkpoint " +
                    (dir / "run" / "checkpoint.sa2d").string() + " --split " +
                    (dir / "run" / "split.json").string() + " --out " +
                    (dir / "scores_lr0").string() + " --k-shot 3 --inner-lr 0") == 0);
    CHECK(slurp(dir / "scores_na" / "scores.csv") == slurp(dir / "scores_lr0" / "scores.csv"));

    const SplitSpec split = load_split(dir / "run" / "split.json");
    const auto scores = read_scores_csv(dir / "scores" / "scores.csv");
    CHECK(scores.size() == split.test_ids.size());
    for (const auto& [id, rows] : scores) {
        CHECK(split.test_ids.count(id) == 1);
        CHECK(rows.size() == 26 - 5 + 1);  // frame_count - T' + 1 rows
        CHECK(fs::exists(dir / "scores" / "curves" / (id + ".png")));
    }

    // byte-identical rescoring
    REQUIRE(run_cli("adapt-score --manifest " + manifest + " --checkpoint " +
                    (dir / "run" / "checkpoint.sa2d").string() + " --split " +
                    (dir / "run" / "split.json").string() + " --out " +
                    (dir / "scores_b").string() + " --k-shot 3") == 0);
    CHECK(slurp(dir / "scores" / "scores.csv") == slurp(dir / "scores_b" / "scores.csv"));

    REQUIRE(run_cli("eval --scores " + (dir / "scores" / "scores.csv").string() + " --manifest " +
                    manifest + " --split " + (dir / "run" / "split.json").string() + " --out " +
                    (dir / "eval").string() + " --group-by scenario") == 0);
    CHECK(fs::exists(dir / "eval" / "report.csv"));
    CHECK(fs::exists(dir / "eval" / "report.json"));
}

TEST_CASE("eval with oracle scores reaches perfect metrics") {
    const fs::path dir = fixtures::fresh_dir("cli_eval_oracle");
    write_gen_spec(dir / "spec.json", 2, 1, 2, 2, 20);
    REQUIRE(run_cli("gen-data --spec " + (dir / "spec.json").string() + " --out " +
                    (dir / "data").string()) == 0);

    const Manifest manifest = load_manifest(dir / "data" / "manifest.json");
    const SplitSpec split = protocol_split(manifest, Protocol::protocol_i, 1);
    save_split(split, dir / "split.json");

    // scores straight from the labels: s = 1 - label
    std::vector<ScoreSeries> series;
    for (const auto& id : split.test_ids) {
        const FrameAnnotation ann = load_annotation(manifest.record(id));
        ScoreSeries s;
        s.video_id = id;
        s.first_scored_frame = 1;
        for (int label : ann) s.scores.push_back(label ? 0.0 : 1.0);
        series.push_back(std::move(s));
    }
    write_scores_csv(series, dir / "scores.csv");

    REQUIRE(run_cli("eval --scores " + (dir / "scores.csv").string() + " --manifest " +
                    (dir / "data" / "manifest.json").string() + " --split " +
                    (dir / "split.json").string() + " --out " + (dir / "eval").string()) == 0);

    const json report = json::parse(slurp(dir / "eval" / "report.json"));
    CHECK(report["overall"]["auc"].get<double>() == 1.0);
    CHECK(report["overall"]["ap"].get<double>() == 1.0);

    // anomaly polarity flips the scores back to the same result
    std::vector<ScoreSeries> flipped = series;
    for (auto& s : flipped)
        for (double& v : s.scores) v = 1.0 - v;
    write_scores_csv(flipped, dir / "scores_anomaly.csv");
    REQUIRE(run_cli("eval --scores " + (dir / "scores_anomaly.csv").string() + " --manifest " +
                    (dir / "data" / "manifest.json").string() + " --split " +
                    (dir / "split.json").string() + " --out " + (dir / "eval2").string() +
                    " --polarity anomaly") == 0);
    const json report2 = json::parse(slurp(dir / "eval2" / "report.json"));
    CHECK(report2["overall"]["auc"].get<double>() == 1.0);
}

}  // TEST_SUITE
