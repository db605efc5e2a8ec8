#include <doctest.h>

#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "sa2d/synthetic.hpp"

using namespace sa2d;
namespace fs = std::filesystem;

TEST_SUITE("synthetic") {

TEST_CASE("agent-free noiseless scene is constant background") {
    SceneConfig config = fixtures::scene("flat", 0, 1.0, 4, 0.4, 0.0);
    const GeneratedVideo video = generate_video(config, "v1", 5);
    REQUIRE(video.frames.size() == 5);
    for (const Image& frame : video.frames)
        for (double v : frame.px) CHECK(v == 0.4);
    for (int label : video.annotation) CHECK(label == 0);
}

TEST_CASE("generation is deterministic") {
    SceneConfig config = fixtures::scene("det", 3, 1.3, 4, 0.3, 0.05, 16, 77);
    AnomalySpec anomaly{AnomalyKind::speed_burst, 5, 9, 4.0};
    const GeneratedVideo a = generate_video(config, "v2", 12, anomaly);
    const GeneratedVideo b = generate_video(config, "v2", 12, anomaly);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t t = 0; t < a.frames.size(); ++t) CHECK(a.frames[t].px == b.frames[t].px);
    CHECK(a.annotation == b.annotation);
}

TEST_CASE("views share dynamics but differ in appearance") {
    SceneConfig config = fixtures::scene("views", 2, 1.0, 5, 0.3, 0.0, 24, 5);
    const GeneratedVideo v1 = generate_video(config, "v1", 8);
    const GeneratedVideo v2 = generate_video(config, "v2", 8);
    bool any_difference = false;
    for (std::size_t t = 0; t < v1.frames.size(); ++t)
        if (v1.frames[t].px != v2.frames[t].px) any_difference = true;
    CHECK(any_difference);
}

TEST_CASE("illumination spike raises mean intensity by the closed-form margin") {
    // oracle: with no agents and no noise the frame mean is exactly the
    // background, and clamp(bg + magnitude) inside the window
    SceneConfig config = fixtures::scene("illum", 0, 1.0, 4, 0.3, 0.0);
    AnomalySpec anomaly{AnomalyKind::illumination_spike, 10, 20, 0.5};
    const GeneratedVideo video = generate_video(config, "v1", 25, anomaly);

    const double mean5 = mean_pixel(video.frames[4]);
    const double mean15 = mean_pixel(video.frames[14]);
    CHECK(mean5 == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(mean15 == doctest::Approx(std::min(1.0, 0.3 + 0.5)).epsilon(1e-12));
    CHECK(mean15 - mean5 >= 0.2);

    CHECK(video.annotation[8] == 0);
    CHECK(video.annotation[9] == 1);
    CHECK(video.annotation[19] == 1);
    CHECK(video.annotation[20] == 0);
}

TEST_CASE("label soundness: frames outside the window match the clean run") {
    for (AnomalyKind kind : {AnomalyKind::speed_burst, AnomalyKind::intruder,
                             AnomalyKind::appearance_flip, AnomalyKind::illumination_spike}) {
        CAPTURE(to_string(kind));
        SceneConfig config = fixtures::scene("sound", 2, 1.4, 4, 0.35, 0.03, 16, 21);
        AnomalySpec anomaly{kind, 6, 10, default_magnitude(kind)};
        const GeneratedVideo clean = generate_video(config, "v1", 16);
        const GeneratedVideo dirty = generate_video(config, "v1", 16, anomaly);
        bool differs_inside = false;
        for (int t = 1; t <= 16; ++t) {
            const auto& a = clean.frames[static_cast<std::size_t>(t) - 1].px;
            const auto& b = dirty.frames[static_cast<std::size_t>(t) - 1].px;
            if (t < 6 || t > 10) {
                CHECK(a == b);
            } else if (a != b) {
                differs_inside = true;
            }
        }
        CHECK(differs_inside);
    }
}

TEST_CASE("anomaly window validation") {
    SceneConfig config = fixtures::scene("win", 1, 1.0, 4, 0.3, 0.0);
    AnomalySpec bad{AnomalyKind::intruder, 5, 20, 2.0};  // beyond length
    try {
        generate_video(config, "v1", 10, bad);
        FAIL("expected InvalidAnomalyWindow");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidAnomalyWindow);
    }
}

TEST_CASE("generate_dataset writes a loadable manifest with the right counts") {
    const fs::path dir = fixtures::fresh_dir("gen_counts");
    GeneratorSpec spec;
    spec.scenarios = {fixtures::scene("s1", 1, 1.0, 4, 0.3, 0.0, 16, 1),
                      fixtures::scene("s2", 2, 1.5, 4, 0.5, 0.0, 16, 2)};
    spec.views_per_scenario = 2;
    spec.normals_per_view = 1;
    spec.abnormals_per_view = 1;
    spec.length = 40;
    spec.seed = 9;

    const Manifest m = generate_dataset(spec, dir);
    CHECK(m.records.size() == 8);
    int normals = 0, abnormals = 0;
    for (const auto& r : m.records)
        (r.label == VideoLabel::normal ? normals : abnormals)++;
    CHECK(normals == 4);
    CHECK(abnormals == 4);

    // the manifest on disk validates under load_manifest
    const Manifest loaded = load_manifest(dir / "manifest.json");
    CHECK(loaded.records.size() == 8);
    for (const auto& r : loaded.records) {
        CHECK(r.frame_count == 40);
        const FrameAnnotation ann = load_annotation(r);
        CHECK(ann.size() == 40);
    }
}

TEST_CASE("generate_dataset scenario_index shape") {
    const fs::path dir = fixtures::fresh_dir("gen_index");
    GeneratorSpec spec;
    for (int s = 0; s < 4; ++s)
        spec.scenarios.push_back(fixtures::scene("scn" + std::to_string(s), 1, 1.0, 4, 0.3, 0.0));
    spec.views_per_scenario = 2;
    spec.normals_per_view = 3;
    spec.abnormals_per_view = 1;
    spec.length = 8;
    spec.seed = 4;
    const Manifest m = generate_dataset(spec, dir);
    REQUIRE(m.scenario_index.size() == 4);
    for (const auto& [scenario, views] : m.scenario_index) {
        REQUIRE(views.size() == 2);
        for (const auto& [view, ids] : views) CHECK(ids.size() == 4);
    }
}

TEST_CASE("generate_dataset degenerate spec") {
    const fs::path dir = fixtures::fresh_dir("gen_empty");
    GeneratorSpec spec;
    spec.scenarios = {fixtures::scene("s1", 1, 1.0, 4, 0.3, 0.0)};
    spec.views_per_scenario = 0;
    spec.length = 8;
    const Manifest m = generate_dataset(spec, dir);
    CHECK(m.records.empty());
    CHECK(!fs::exists(dir / "frames"));
}

TEST_CASE("abnormal videos cycle through all four anomaly kinds") {
    const fs::path dir = fixtures::fresh_dir("gen_cycle");
    GeneratorSpec spec;
    spec.scenarios = {fixtures::scene("s1", 1, 1.0, 4, 0.3, 0.0)};
    spec.views_per_scenario = 1;
    spec.normals_per_view = 0;
    spec.abnormals_per_view = 4;
    spec.length = 20;
    spec.seed = 2;
    const Manifest m = generate_dataset(spec, dir);
    std::set<std::string> kinds;
    for (const auto& r : m.records) kinds.insert(*r.anomaly_type);
    CHECK(kinds.size() == 4);
}

TEST_CASE("byte-identical regeneration") {
    GeneratorSpec spec;
    spec.scenarios = {fixtures::scene("s1", 2, 1.2, 4, 0.35, 0.02, 16, 6)};
    spec.views_per_scenario = 1;
    spec.normals_per_view = 1;
    spec.abnormals_per_view = 1;
    spec.length = 10;
    spec.seed = 31;

    const fs::path a = fixtures::fresh_dir("gen_det_a");
    const fs::path b = fixtures::fresh_dir("gen_det_b");
    generate_dataset(spec, a);
    generate_dataset(spec, b);

    for (auto it = fs::recursive_directory_iterator(a); it != fs::recursive_directory_iterator();
         ++it) {
        if (!it->is_regular_file()) continue;
        const fs::path rel = fs::relative(it->path(), a);
        std::ifstream fa(it->path(), std::ios::binary);
        std::ifstream fb(b / rel, std::ios::binary);
        REQUIRE(fb.good());
        const std::string da((std::istreambuf_iterator<char>(fa)), {});
        const std::string db((std::istreambuf_iterator<char>(fb)), {});
        CHECK(da == db);
    }
}

}  // TEST_SUITE
