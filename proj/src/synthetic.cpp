#include "sa2d/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "sa2d/png_io.hpp"
#include "sa2d/rng.hpp"

namespace sa2d {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::speed_burst: return "speed_burst";
        case AnomalyKind::intruder: return "intruder";
        case AnomalyKind::appearance_flip: return "appearance_flip";
        case AnomalyKind::illumination_spike: return "illumination_spike";
    }
    return "unknown";
}

AnomalyKind anomaly_kind_from_string(const std::string& name) {
    if (name == "speed_burst") return AnomalyKind::speed_burst;
    if (name == "intruder") return AnomalyKind::intruder;
    if (name == "appearance_flip") return AnomalyKind::appearance_flip;
    if (name == "illumination_spike") return AnomalyKind::illumination_spike;
    throw Error(ErrorKind::SchemaError, "unknown anomaly kind: " + name);
}

double default_magnitude(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::speed_burst: return 4.0;        // velocity multiplier
        case AnomalyKind::intruder: return 2.0;           // size multiplier
        case AnomalyKind::appearance_flip: return 1.0;    // full inversion
        case AnomalyKind::illumination_spike: return 0.35;
    }
    return 1.0;
}

namespace {

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    Rng r(a ^ (b * 0x9e3779b97f4a7c15ULL) ^ 0x6d736164ULL);
    return r.next_u64();
}

// Position of a bouncing segment of extent `size` on [0,L], start p0,
// velocity v, evaluated at continuous time t. Reflection folds the free
// trajectory into a triangle wave, so any time is O(1).
double fold_position(double p0, double v, double t, double range) {
    if (range <= 0.0) return 0.0;
    const double period = 2.0 * range;
    double u = std::fmod(p0 + v * t, period);
    if (u < 0.0) u += period;
    return u <= range ? u : period - u;
}

struct Agent {
    double x0 = 0, y0 = 0;   // top-left start, canonical pixels
    double vx = 0, vy = 0;   // px/frame
    double size = 1;
    double intensity = 1.0;
};

struct ViewTransform {
    bool flip = false;
    double scale = 1.0;
    double dx = 0.0;
    double dy = 0.0;
};

ViewTransform view_transform(const std::string& view_id, int h, int w) {
    Rng rng(hash_string(view_id));
    ViewTransform v;
    v.flip = (rng.next_u64() & 1) != 0;
    v.scale = rng.next_in(0.75, 1.0);
    v.dx = rng.next_unit() * (1.0 - v.scale) * w;
    v.dy = rng.next_unit() * (1.0 - v.scale) * h;
    return v;
}

Agent make_agent(Rng& rng, int h, int w, double speed, double size, double intensity_band_lo,
                 double intensity_band_hi) {
    Agent a;
    a.size = size;
    a.x0 = rng.next_unit() * std::max(0.0, w - size);
    a.y0 = rng.next_unit() * std::max(0.0, h - size);
    const double angle = rng.next_in(0.0, 6.283185307179586);
    a.vx = speed * std::cos(angle);
    a.vy = speed * std::sin(angle);
    a.intensity = rng.next_in(intensity_band_lo, intensity_band_hi);
    return a;
}

}  // namespace

GeneratedVideo generate_video(const SceneConfig& config, const std::string& view_id, int length,
                              const std::optional<AnomalySpec>& anomaly) {
    const SceneDynamics& dyn = config.dynamics;
    const int h = config.frame_h, w = config.frame_w;
    if (length < 2) throw Error(ErrorKind::InvalidConfig, "length must be >= 2");
    if (dyn.agent_size_px >= std::min(h, w))
        throw Error(ErrorKind::InvalidConfig, "agent_size_px must be < min(H, W)");
    if (anomaly) {
        if (anomaly->start_frame < 1 || anomaly->start_frame > anomaly->end_frame ||
            anomaly->end_frame > length)
            throw Error(ErrorKind::InvalidAnomalyWindow,
                        std::to_string(anomaly->start_frame) + ".." +
                            std::to_string(anomaly->end_frame) + " in length " +
                            std::to_string(length));
        const bool agent_bound = anomaly->kind != AnomalyKind::illumination_spike;
        if (agent_bound && dyn.n_agents == 0 && anomaly->kind != AnomalyKind::intruder)
            throw Error(ErrorKind::InvalidConfig, "agent-bound anomaly needs agents");
    }

    // Independent streams so that removing the anomaly never shifts the
    // world or noise draws (label soundness depends on this).
    Rng world_rng(config.seed);
    Rng agent_rng = world_rng.fork();
    Rng anomaly_rng = world_rng.fork();
    const std::uint64_t noise_seed = mix64(world_rng.next_u64(), hash_string(view_id));

    const bool dark_agents = dyn.background_level > 0.5;
    const double band_lo = dark_agents ? 0.05 : 0.70;
    const double band_hi = dark_agents ? 0.30 : 0.95;

    std::vector<Agent> agents;
    for (int k = 0; k < dyn.n_agents; ++k)
        agents.push_back(make_agent(agent_rng, h, w, dyn.agent_speed_px_per_frame,
                                    dyn.agent_size_px, band_lo, band_hi));

    Agent intruder;
    if (anomaly && anomaly->kind == AnomalyKind::intruder)
        intruder = make_agent(anomaly_rng, h, w, dyn.agent_speed_px_per_frame,
                              dyn.agent_size_px * anomaly->magnitude, band_lo, band_hi);

    const ViewTransform view = view_transform(view_id, h, w);

    GeneratedVideo out;
    out.frames.reserve(static_cast<std::size_t>(length));
    out.annotation.assign(static_cast<std::size_t>(length), 0);

    for (int t = 1; t <= length; ++t) {
        const bool in_window = anomaly && t >= anomaly->start_frame && t <= anomaly->end_frame;
        if (in_window) out.annotation[static_cast<std::size_t>(t) - 1] = 1;

        double background = dyn.background_level;
        if (dyn.lighting_period_frames)
            background *= 1.0 + 0.15 * std::sin(6.283185307179586 * t /
                                                static_cast<double>(*dyn.lighting_period_frames));
        double illum = 0.0;
        if (in_window && anomaly->kind == AnomalyKind::illumination_spike)
            illum = anomaly->magnitude;

        // Speed bursts ride the nominal trajectory at warped time. The warp
        // peaks at magnitude x velocity right after onset, swings erratic
        // through the window, and lands back on nominal time at end_frame,
        // so frames outside the window stay untouched with no final jump.
        double sim_t = static_cast<double>(t);
        if (in_window && anomaly->kind == AnomalyKind::speed_burst) {
            const double span = anomaly->end_frame - anomaly->start_frame;
            if (span > 0.0) {
                const double u = (t - anomaly->start_frame) / span;
                sim_t = anomaly->start_frame +
                        span * (u + (anomaly->magnitude - 1.0) / 3.141592653589793 *
                                        std::sin(3.141592653589793 * u));
            }
        }

        struct Placed {
            double x, y, size, intensity;
        };
        std::vector<Placed> placed;
        for (std::size_t k = 0; k < agents.size(); ++k) {
            const Agent& a = agents[k];
            double intensity = a.intensity;
            if (in_window && anomaly->kind == AnomalyKind::appearance_flip && k == 0)
                intensity = 1.0 - intensity;
            placed.push_back({fold_position(a.x0, a.vx, sim_t, w - a.size),
                              fold_position(a.y0, a.vy, sim_t, h - a.size), a.size, intensity});
        }
        if (in_window && anomaly->kind == AnomalyKind::intruder)
            placed.push_back({fold_position(intruder.x0, intruder.vx, static_cast<double>(t),
                                            w - intruder.size),
                              fold_position(intruder.y0, intruder.vy, static_cast<double>(t),
                                            h - intruder.size),
                              intruder.size, intruder.intensity});

        Rng frame_noise(mix64(noise_seed, static_cast<std::uint64_t>(t)));
        Image frame(h, w);
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                // pixel center -> canonical world coordinates
                const double px = view.flip ? (w - (j + 0.5)) : (j + 0.5);
                const double xw = view.dx + view.scale * px;
                const double yw = view.dy + view.scale * (i + 0.5);

                double value = background;
                for (const Placed& p : placed)
                    if (xw >= p.x && xw < p.x + p.size && yw >= p.y && yw < p.y + p.size)
                        value = p.intensity;
                value += illum;
                if (dyn.noise_std > 0.0) value += dyn.noise_std * frame_noise.next_gauss();
                frame.at(i, j) = clamp01(value);
            }
        }
        out.frames.push_back(std::move(frame));
    }
    return out;
}

namespace {

SceneConfig scene_from_json(const json& j) {
    SceneConfig c;
    try {
        c.scenario_id = j.at("scenario_id").get<std::string>();
        const json& d = j.at("dynamics");
        c.dynamics.n_agents = d.at("n_agents").get<int>();
        c.dynamics.agent_speed_px_per_frame = d.at("agent_speed_px_per_frame").get<double>();
        c.dynamics.agent_size_px = d.at("agent_size_px").get<int>();
        c.dynamics.background_level = d.at("background_level").get<double>();
        if (d.contains("lighting_period_frames") && !d.at("lighting_period_frames").is_null())
            c.dynamics.lighting_period_frames = d.at("lighting_period_frames").get<int>();
        c.dynamics.noise_std = d.value("noise_std", 0.0);
        c.frame_h = j.at("frame_size")[0].get<int>();
        c.frame_w = j.at("frame_size")[1].get<int>();
        c.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("scenario config: ") + e.what());
    }
    if (c.dynamics.n_agents < 0 || c.dynamics.agent_speed_px_per_frame <= 0.0 ||
        c.dynamics.agent_size_px <= 0 || c.dynamics.background_level < 0.0 ||
        c.dynamics.background_level > 1.0 || c.dynamics.noise_std < 0.0 ||
        c.dynamics.noise_std > 0.2)
        throw Error(ErrorKind::SchemaError, "scenario dynamics out of range: " + c.scenario_id);
    return c;
}

json scene_to_json(const SceneConfig& c) {
    json d;
    d["n_agents"] = c.dynamics.n_agents;
    d["agent_speed_px_per_frame"] = c.dynamics.agent_speed_px_per_frame;
    d["agent_size_px"] = c.dynamics.agent_size_px;
    d["background_level"] = c.dynamics.background_level;
    d["lighting_period_frames"] =
        c.dynamics.lighting_period_frames ? json(*c.dynamics.lighting_period_frames) : json(nullptr);
    d["noise_std"] = c.dynamics.noise_std;
    json j;
    j["scenario_id"] = c.scenario_id;
    j["dynamics"] = d;
    j["frame_size"] = {c.frame_h, c.frame_w};
    j["seed"] = c.seed;
    return j;
}

void write_annotation(const FrameAnnotation& ann, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, path.string());
    for (int v : ann) out << v << "\n";
}

}  // namespace

GeneratorSpec load_generator_spec(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("generator spec parse: ") + e.what());
    }
    GeneratorSpec spec;
    try {
        for (const auto& s : j.at("scenarios")) spec.scenarios.push_back(scene_from_json(s));
        spec.views_per_scenario = j.at("views_per_scenario").get<int>();
        spec.normals_per_view = j.at("normals_per_view").get<int>();
        spec.abnormals_per_view = j.at("abnormals_per_view").get<int>();
        spec.length = j.at("length").get<int>();
        spec.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("generator spec: ") + e.what());
    }
    if (spec.views_per_scenario < 0 || spec.normals_per_view < 0 || spec.abnormals_per_view < 0)
        throw Error(ErrorKind::SchemaError, "generator counts must be >= 0");
    return spec;
}

void save_generator_spec(const GeneratorSpec& spec, const fs::path& path) {
    json j;
    j["scenarios"] = json::array();
    for (const auto& s : spec.scenarios) j["scenarios"].push_back(scene_to_json(s));
    j["views_per_scenario"] = spec.views_per_scenario;
    j["normals_per_view"] = spec.normals_per_view;
    j["abnormals_per_view"] = spec.abnormals_per_view;
    j["length"] = spec.length;
    j["seed"] = spec.seed;
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, path.string());
    out << j.dump(2) << "\n";
}

Manifest generate_dataset(const GeneratorSpec& spec, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::IoError, out_dir.string() + ": " + ec.message());

    Manifest manifest;
    constexpr AnomalyKind kCycle[] = {AnomalyKind::speed_burst, AnomalyKind::intruder,
                                      AnomalyKind::appearance_flip,
                                      AnomalyKind::illumination_spike};
    int abnormal_ordinal = 0;

    for (std::size_t si = 0; si < spec.scenarios.size(); ++si) {
        const SceneConfig& scene = spec.scenarios[si];
        const int slots = spec.normals_per_view + spec.abnormals_per_view;
        for (int v = 1; v <= spec.views_per_scenario; ++v) {
            const std::string view_id = "v" + std::to_string(v);
            for (int slot = 0; slot < slots; ++slot) {
                const bool is_abnormal = slot >= spec.normals_per_view;

                // one world per (scenario, slot): views of the same slot share
                // dynamics and differ only by the camera transform
                SceneConfig world = scene;
                world.seed = mix64(mix64(spec.seed, scene.seed),
                                   (static_cast<std::uint64_t>(si) << 20) |
                                       static_cast<std::uint64_t>(slot));

                std::optional<AnomalySpec> anomaly;
                std::string id_tag;
                if (is_abnormal) {
                    const AnomalyKind kind = kCycle[abnormal_ordinal++ % 4];
                    AnomalySpec a;
                    a.kind = kind;
                    // window runs to the last frame: every frame that is hard
                    // to predict because of the anomaly is labeled anomalous
                    // (a mid-video window would leave its first T'-1
                    // successors mispredicted but labeled normal)
                    a.start_frame = std::max(1, static_cast<int>(std::lround(0.55 * spec.length)));
                    a.end_frame = spec.length;
                    a.magnitude = default_magnitude(kind);
                    anomaly = a;
                    id_tag = "a" + std::to_string(slot - spec.normals_per_view + 1);
                } else {
                    id_tag = "n" + std::to_string(slot + 1);
                }

                const std::string video_id = scene.scenario_id + "_" + view_id + "_" + id_tag;
                GeneratedVideo video = generate_video(world, view_id, spec.length, anomaly);

                const fs::path frames_dir = out_dir / "frames" / video_id;
                fs::create_directories(frames_dir);
                for (int t = 1; t <= spec.length; ++t)
                    write_png_gray(frame_file(frames_dir, t),
                                   video.frames[static_cast<std::size_t>(t) - 1]);

                const fs::path ann_dir = out_dir / "annotations";
                fs::create_directories(ann_dir);
                const fs::path ann_path = ann_dir / (video_id + ".txt");
                write_annotation(video.annotation, ann_path);

                VideoRecord rec;
                rec.video_id = video_id;
                rec.scenario_id = scene.scenario_id;
                rec.view_id = view_id;
                rec.frame_count = spec.length;
                rec.fps = 30.0;
                rec.label = is_abnormal ? VideoLabel::abnormal : VideoLabel::normal;
                if (is_abnormal) rec.anomaly_type = to_string(anomaly->kind);
                rec.frames_path = frames_dir;
                rec.annotation_path = ann_path;
                manifest.scenario_index[rec.scenario_id][rec.view_id].push_back(video_id);
                manifest.records.push_back(std::move(rec));
            }
        }
    }

    save_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

}  // namespace sa2d
