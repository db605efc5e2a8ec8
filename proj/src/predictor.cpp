#include "sa2d/predictor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sa2d/model_graph.hpp"
#include "sa2d/rng.hpp"

namespace sa2d {

using nlohmann::json;

const LayerInfo& ParamLayout::layer(const std::string& name) const {
    for (const LayerInfo& l : layers)
        if (l.name == name) return l;
    throw Error(ErrorKind::InvalidConfig, "no such layer: " + name);
}

ParamLayout param_layout(const PredictorConfig& cfg) {
    if (cfg.depth < 1) throw Error(ErrorKind::InvalidConfig, "depth must be >= 1");
    if (cfg.base_channels < 1) throw Error(ErrorKind::InvalidConfig, "base_channels must be >= 1");
    if (cfg.input_frames < 1) throw Error(ErrorKind::InvalidConfig, "input_frames must be >= 1");
    const int div = 1 << cfg.depth;
    if (cfg.frame_h <= 0 || cfg.frame_w <= 0 || cfg.frame_h % div != 0 || cfg.frame_w % div != 0)
        throw Error(ErrorKind::InvalidConfig, "frame size must be divisible by 2^depth");

    ParamLayout layout;
    auto add = [&](const std::string& name, int in_ch, int out_ch) {
        LayerInfo l;
        l.name = name;
        l.in_ch = in_ch;
        l.out_ch = out_ch;
        l.weight_offset = layout.total;
        layout.total += static_cast<std::size_t>(out_ch) * in_ch * 9;
        l.bias_offset = layout.total;
        layout.total += static_cast<std::size_t>(out_ch);
        layout.layers.push_back(std::move(l));
    };

    const int enc_in0 = cfg.recurrent_bottleneck ? 1 : cfg.input_frames;
    for (int l = 0; l < cfg.depth; ++l)
        add("enc" + std::to_string(l), l == 0 ? enc_in0 : cfg.base_channels << (l - 1),
            cfg.base_channels << l);
    const int bott = cfg.base_channels << cfg.depth;
    add("bott", cfg.base_channels << (cfg.depth - 1), bott);
    if (cfg.recurrent_bottleneck) {
        add("cell_z", 2 * bott, bott);
        add("cell_c", 2 * bott, bott);
    }
    for (int l = cfg.depth - 1; l >= 0; --l)
        add("dec" + std::to_string(l),
            (l == cfg.depth - 1 ? bott : cfg.base_channels << (l + 1)) +
                (cfg.base_channels << l),
            cfg.base_channels << l);
    add("head", cfg.base_channels, 1);
    return layout;
}

FramePredictor init_predictor(const PredictorConfig& cfg, std::uint64_t seed) {
    const ParamLayout layout = param_layout(cfg);
    FramePredictor model;
    model.config = cfg;
    model.parameters.assign(layout.total, 0.0);
    Rng rng(seed);
    for (const LayerInfo& layer : layout.layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_ch) * 9.0);
        const std::size_t n = static_cast<std::size_t>(layer.out_ch) * layer.in_ch * 9;
        for (std::size_t i = 0; i < n; ++i)
            model.parameters[layer.weight_offset + i] = rng.next_in(-bound, bound);
        // biases stay zero
    }
    return model;
}

Image predict(const FramePredictor& model, const std::vector<Image>& input) {
    const PredictorConfig& cfg = model.config;
    if (static_cast<int>(input.size()) != cfg.input_frames)
        throw Error(ErrorKind::ShapeMismatch, "predict input frame count");
    for (const Image& f : input)
        if (f.h != cfg.frame_h || f.w != cfg.frame_w)
            throw Error(ErrorKind::ShapeMismatch, "predict input frame size");

    const ParamLayout layout = param_layout(cfg);
    if (model.parameters.size() != layout.total)
        throw Error(ErrorKind::ShapeMismatch, "parameter vector size");

    Graph<double> g;
    auto nodes = detail::register_params(g, layout, model.parameters.data());
    auto out = detail::build_predictor(g, cfg, layout, nodes, input);

    Image result(cfg.frame_h, cfg.frame_w);
    const auto& v = g.val(out);
    std::copy(v.begin(), v.end(), result.px.begin());
    return result;
}

std::vector<Image> predict_batch(const FramePredictor& model,
                                 const std::vector<std::vector<Image>>& inputs) {
    std::vector<Image> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) out.push_back(predict(model, in));
    return out;
}

namespace {
constexpr unsigned char kCheckpointVersion = 1;
}

void save_checkpoint(const FramePredictor& model, const std::filesystem::path& path) {
    json header;
    header["frame_h"] = model.config.frame_h;
    header["frame_w"] = model.config.frame_w;
    header["input_frames"] = model.config.input_frames;
    header["base_channels"] = model.config.base_channels;
    header["depth"] = model.config.depth;
    header["recurrent_bottleneck"] = model.config.recurrent_bottleneck;
    header["param_count"] = model.parameters.size();
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, path.string());
    out.put(static_cast<char>(kCheckpointVersion));
    const std::uint32_t len = static_cast<std::uint32_t>(text.size());
    unsigned char len_le[4] = {static_cast<unsigned char>(len & 0xff),
                               static_cast<unsigned char>((len >> 8) & 0xff),
                               static_cast<unsigned char>((len >> 16) & 0xff),
                               static_cast<unsigned char>((len >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(len_le), 4);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (double v : model.parameters) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        unsigned char le[8];
        for (int i = 0; i < 8; ++i) le[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(le), 8);
    }
    if (!out) throw Error(ErrorKind::IoError, "writing " + path.string());
}

FramePredictor load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    const int version = in.get();
    if (version != kCheckpointVersion)
        throw Error(ErrorKind::SchemaError, "unsupported checkpoint version");
    unsigned char len_le[4];
    in.read(reinterpret_cast<char*>(len_le), 4);
    const std::uint32_t len = static_cast<std::uint32_t>(len_le[0]) |
                              (static_cast<std::uint32_t>(len_le[1]) << 8) |
                              (static_cast<std::uint32_t>(len_le[2]) << 16) |
                              (static_cast<std::uint32_t>(len_le[3]) << 24);
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw Error(ErrorKind::SchemaError, "truncated checkpoint header");

    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("checkpoint header: ") + e.what());
    }

    FramePredictor model;
    try {
        model.config.frame_h = header.at("frame_h").get<int>();
        model.config.frame_w = header.at("frame_w").get<int>();
        model.config.input_frames = header.at("input_frames").get<int>();
        model.config.base_channels = header.at("base_channels").get<int>();
        model.config.depth = header.at("depth").get<int>();
        model.config.recurrent_bottleneck = header.at("recurrent_bottleneck").get<bool>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("checkpoint fields: ") + e.what());
    }

    const std::size_t expected = param_count(model.config);
    if (header.at("param_count").get<std::size_t>() != expected)
        throw Error(ErrorKind::SchemaError, "checkpoint parameter count mismatch");
    model.parameters.resize(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        unsigned char le[8];
        in.read(reinterpret_cast<char*>(le), 8);
        if (!in) throw Error(ErrorKind::SchemaError, "truncated checkpoint parameters");
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(le[b]) << (8 * b);
        std::memcpy(&model.parameters[i], &bits, 8);
    }
    return model;
}

}  // namespace sa2d
