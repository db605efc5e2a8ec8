#include "sa2d/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "sa2d/rng.hpp"

namespace sa2d {

using nlohmann::json;

namespace fs = std::filesystem;

const VideoRecord& Manifest::record(const std::string& video_id) const {
    for (const auto& r : records)
        if (r.video_id == video_id) return r;
    throw Error(ErrorKind::UnknownVideoId, video_id);
}

bool Manifest::has(const std::string& video_id) const {
    return std::any_of(records.begin(), records.end(),
                       [&](const VideoRecord& r) { return r.video_id == video_id; });
}

std::filesystem::path frame_file(const fs::path& frames_dir, int frame_index) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06d.png", frame_index);
    return frames_dir / name;
}

namespace {

const std::set<std::string> kManifestKeys = {
    "video_id",  "scenario_id", "view_id",     "frame_count",    "fps",
    "label",     "anomaly_type", "frames_path", "annotation_path"};

VideoRecord parse_record(const json& j, const fs::path& base) {
    if (!j.is_object()) throw Error(ErrorKind::SchemaError, "manifest entry is not an object");
    std::set<std::string> keys;
    for (const auto& kv : j.items()) keys.insert(kv.key());
    if (keys != kManifestKeys)
        throw Error(ErrorKind::SchemaError, "manifest entry has unexpected key set");

    VideoRecord r;
    try {
        r.video_id = j.at("video_id").get<std::string>();
        r.scenario_id = j.at("scenario_id").get<std::string>();
        r.view_id = j.at("view_id").get<std::string>();
        r.frame_count = j.at("frame_count").get<int>();
        r.fps = j.at("fps").get<double>();
        const std::string label = j.at("label").get<std::string>();
        if (label == "normal")
            r.label = VideoLabel::normal;
        else if (label == "abnormal")
            r.label = VideoLabel::abnormal;
        else
            throw Error(ErrorKind::SchemaError, "label must be normal|abnormal: " + r.video_id);
        if (!j.at("anomaly_type").is_null())
            r.anomaly_type = j.at("anomaly_type").get<std::string>();
        r.frames_path = base / j.at("frames_path").get<std::string>();
        if (!j.at("annotation_path").is_null())
            r.annotation_path = base / j.at("annotation_path").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("manifest entry: ") + e.what());
    }

    if (r.frame_count < 1)
        throw Error(ErrorKind::SchemaError, "frame_count must be >= 1: " + r.video_id);
    if (r.fps <= 0.0) throw Error(ErrorKind::SchemaError, "fps must be > 0: " + r.video_id);
    if (r.label == VideoLabel::normal && r.anomaly_type)
        throw Error(ErrorKind::SchemaError, "normal video carries anomaly_type: " + r.video_id);
    if (r.label == VideoLabel::abnormal && !r.anomaly_type)
        throw Error(ErrorKind::SchemaError, "abnormal video lacks anomaly_type: " + r.video_id);
    return r;
}

}  // namespace

FrameAnnotation load_annotation(const VideoRecord& record) {
    if (!record.annotation_path)
        throw Error(ErrorKind::MissingFile, "no annotation for " + record.video_id);
    std::ifstream in(*record.annotation_path);
    if (!in) throw Error(ErrorKind::MissingFile, record.annotation_path->string());
    FrameAnnotation ann;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line != "0" && line != "1")
            throw Error(ErrorKind::SchemaError,
                        "annotation line must be 0 or 1: " + record.annotation_path->string());
        ann.push_back(line == "1" ? 1 : 0);
    }
    return ann;
}

FrameAnnotation load_annotation_checked(const Manifest& manifest, const SplitSpec& split,
                                        const std::string& video_id) {
    if (!split.annotations_visible(video_id))
        throw Error(ErrorKind::SupervisionViolation,
                    "frame annotations of train video are hidden under video-level supervision: " +
                        video_id);
    return load_annotation(manifest.record(video_id));
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("manifest parse: ") + e.what());
    }
    if (!root.is_array()) throw Error(ErrorKind::SchemaError, "manifest root must be an array");

    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    Manifest m;
    for (const auto& entry : root) {
        VideoRecord r = parse_record(entry, base);
        for (const auto& existing : m.records)
            if (existing.video_id == r.video_id) throw Error(ErrorKind::DuplicateId, r.video_id);

        if (!fs::is_directory(r.frames_path))
            throw Error(ErrorKind::MissingFile, r.frames_path.string());
        if (r.annotation_path) {
            FrameAnnotation ann = load_annotation(r);
            if (static_cast<int>(ann.size()) != r.frame_count)
                throw Error(ErrorKind::SchemaError,
                            "annotation length != frame_count: " + r.video_id);
            if (r.label == VideoLabel::normal)
                for (int v : ann)
                    if (v != 0)
                        throw Error(ErrorKind::SchemaError,
                                    "normal video has anomalous frames: " + r.video_id);
        }
        m.scenario_index[r.scenario_id][r.view_id].push_back(r.video_id);
        m.records.push_back(std::move(r));
    }
    return m;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    json root = json::array();
    for (const auto& r : manifest.records) {
        json j;
        j["video_id"] = r.video_id;
        j["scenario_id"] = r.scenario_id;
        j["view_id"] = r.view_id;
        j["frame_count"] = r.frame_count;
        j["fps"] = r.fps;
        j["label"] = r.label == VideoLabel::normal ? "normal" : "abnormal";
        j["anomaly_type"] = r.anomaly_type ? json(*r.anomaly_type) : json(nullptr);
        j["frames_path"] = fs::relative(r.frames_path, base).generic_string();
        j["annotation_path"] = r.annotation_path
                                   ? json(fs::relative(*r.annotation_path, base).generic_string())
                                   : json(nullptr);
        root.push_back(std::move(j));
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, path.string());
    out << root.dump(2) << "\n";
}

namespace {

// Largest-remainder allocation of `target` train slots across strata.
// Quotas are proportional to stratum size; ties broken by stratum name.
std::map<std::string, std::size_t> allocate_stratified(
    const std::map<std::string, std::vector<std::string>>& strata, std::size_t target) {
    std::size_t total = 0;
    for (const auto& [name, ids] : strata) total += ids.size();

    std::map<std::string, std::size_t> alloc;
    std::vector<std::pair<double, std::string>> remainders;
    std::size_t assigned = 0;
    for (const auto& [name, ids] : strata) {
        const double quota =
            total == 0 ? 0.0
                       : static_cast<double>(target) * static_cast<double>(ids.size()) /
                             static_cast<double>(total);
        std::size_t floor_q = static_cast<std::size_t>(quota);
        if (floor_q > ids.size()) floor_q = ids.size();
        alloc[name] = floor_q;
        assigned += floor_q;
        remainders.emplace_back(quota - static_cast<double>(floor_q), name);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [rem, name] : remainders) {
        if (assigned >= target) break;
        if (alloc[name] < strata.at(name).size()) {
            ++alloc[name];
            ++assigned;
        }
    }
    if (assigned != target)
        throw Error(ErrorKind::InsufficientVideos, "cannot fill stratified allocation");
    return alloc;
}

void split_group(const std::vector<const VideoRecord*>& group, std::size_t train_target,
                 Rng& rng, std::set<std::string>& train_ids, std::set<std::string>& test_ids) {
    // per-scenario strata, video ids sorted for a stable base order
    std::map<std::string, std::vector<std::string>> strata;
    for (const VideoRecord* r : group) strata[r->scenario_id].push_back(r->video_id);
    for (auto& [name, ids] : strata) std::sort(ids.begin(), ids.end());

    const auto alloc = allocate_stratified(strata, train_target);
    for (auto& [name, ids] : strata) {
        const std::size_t k = alloc.at(name);
        // seeded shuffle, then the first k go to train
        for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng.next_below(ids.size() - i));
            std::swap(ids[i], ids[j]);
        }
        for (std::size_t i = 0; i < ids.size(); ++i)
            (i < k ? train_ids : test_ids).insert(ids[i]);
    }
}

}  // namespace

SplitSpec protocol_split(const Manifest& manifest, Protocol protocol, std::uint64_t seed) {
    std::vector<const VideoRecord*> normals, abnormals;
    for (const auto& r : manifest.records)
        (r.label == VideoLabel::normal ? normals : abnormals).push_back(&r);

    if (normals.empty() || normals.size() % 4 != 0)
        throw Error(ErrorKind::InsufficientVideos,
                    "protocol ratios need normal count divisible by 4, got " +
                        std::to_string(normals.size()));
    if (protocol == Protocol::protocol_ii && (abnormals.empty() || abnormals.size() % 2 != 0))
        throw Error(ErrorKind::InsufficientVideos,
                    "protocol ii needs abnormal count divisible by 2, got " +
                        std::to_string(abnormals.size()));

    SplitSpec split;
    split.protocol = protocol;
    split.seed = seed;
    split.supervision =
        protocol == Protocol::protocol_i ? Supervision::normal_only : Supervision::video_level;

    Rng rng(seed ^ (protocol == Protocol::protocol_i ? 0x70726f746f31ULL : 0x70726f746f32ULL));
    split_group(normals, normals.size() * 3 / 4, rng, split.train_ids, split.test_ids);
    if (protocol == Protocol::protocol_i) {
        for (const VideoRecord* r : abnormals) split.test_ids.insert(r->video_id);
    } else {
        split_group(abnormals, abnormals.size() / 2, rng, split.train_ids, split.test_ids);
    }
    return split;
}

SplitSpec load_split(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("split parse: ") + e.what());
    }
    SplitSpec s;
    try {
        const std::string proto = j.at("protocol").get<std::string>();
        if (proto == "protocol_i")
            s.protocol = Protocol::protocol_i;
        else if (proto == "protocol_ii")
            s.protocol = Protocol::protocol_ii;
        else
            throw Error(ErrorKind::SchemaError, "unknown protocol: " + proto);
        s.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& id : j.at("train_ids")) s.train_ids.insert(id.get<std::string>());
        for (const auto& id : j.at("test_ids")) s.test_ids.insert(id.get<std::string>());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("split fields: ") + e.what());
    }
    s.supervision =
        s.protocol == Protocol::protocol_i ? Supervision::normal_only : Supervision::video_level;
    for (const auto& id : s.train_ids)
        if (s.test_ids.count(id))
            throw Error(ErrorKind::SchemaError, "video in both train and test: " + id);
    return s;
}

void save_split(const SplitSpec& split, const fs::path& path) {
    json j;
    j["protocol"] = split.protocol == Protocol::protocol_i ? "protocol_i" : "protocol_ii";
    j["seed"] = split.seed;
    j["train_ids"] = split.train_ids;
    j["test_ids"] = split.test_ids;
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, path.string());
    out << j.dump(2) << "\n";
}

Image load_frame(const VideoRecord& record, int frame_index, ChannelMode mode) {
    if (frame_index < 1 || frame_index > record.frame_count)
        throw Error(ErrorKind::SchemaError, "frame index out of range: " + record.video_id);
    return read_png(frame_file(record.frames_path, frame_index), mode)[0];
}

std::vector<Image> load_frames(const VideoRecord& record) {
    std::vector<Image> frames;
    frames.reserve(static_cast<std::size_t>(record.frame_count));
    for (int t = 1; t <= record.frame_count; ++t) frames.push_back(load_frame(record, t));
    return frames;
}

std::vector<TemporalBlock> slide_blocks(const std::string& video_id,
                                        const std::vector<Image>& frames, int window) {
    if (window < 2) throw Error(ErrorKind::InvalidConfig, "window must be >= 2");
    const int frame_count = static_cast<int>(frames.size());
    if (frame_count < window)
        throw Error(ErrorKind::VideoTooShort,
                    video_id + ": " + std::to_string(frame_count) + " frames < window " +
                        std::to_string(window));

    std::vector<TemporalBlock> blocks;
    blocks.reserve(static_cast<std::size_t>(block_count(frame_count, window)));
    for (int start = 1; start <= frame_count - window + 1; ++start) {
        TemporalBlock b;
        b.source_video = video_id;
        b.start_index = start;
        for (int k = 0; k < window - 1; ++k) b.input_frames.push_back(frames[start - 1 + k]);
        b.target_frame = frames[start - 1 + window - 1];
        blocks.push_back(std::move(b));
    }
    return blocks;
}

std::vector<TemporalBlock> slide_blocks(const VideoRecord& record, int window) {
    if (window >= 2 && record.frame_count < window)
        throw Error(ErrorKind::VideoTooShort, record.video_id);
    return slide_blocks(record.video_id, load_frames(record), window);
}

}  // namespace sa2d
