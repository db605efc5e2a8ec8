#pragma once

// Templated graph builders shared by the loss and meta-learning code.
// Instantiated with double for values/gradients and with Dual for exact
// Hessian-vector products.

#include <algorithm>
#include <cmath>
#include <vector>

#include "sa2d/autodiff.hpp"
#include "sa2d/losses.hpp"
#include "sa2d/predictor.hpp"

namespace sa2d::detail {

inline std::vector<double> gaussian_window11() {
    constexpr int k = 11;
    constexpr double sigma = 1.5;
    std::vector<double> win(k * k);
    double sum = 0.0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            const double di = i - (k - 1) / 2.0, dj = j - (k - 1) / 2.0;
            win[static_cast<std::size_t>(i) * k + j] =
                std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
            sum += win[static_cast<std::size_t>(i) * k + j];
        }
    for (double& v : win) v /= sum;
    return win;
}

// standard five-scale exponents, renormalized to the first `scales`
inline std::vector<double> msssim_exponents(int scales) {
    static const double base[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    std::vector<double> w(base, base + scales);
    double sum = 0.0;
    for (double v : w) sum += v;
    for (double& v : w) v /= sum;
    return w;
}

inline int max_msssim_scales(int h, int w, int cap = 3) {
    int s = 0;
    while (s < cap && 11 * (1 << s) <= std::min(h, w)) ++s;
    return s;  // 0 means even single-scale SSIM does not fit
}

template <typename S>
struct ParamNodes {
    std::vector<typename Graph<S>::Id> weights;  // one per layer
    std::vector<typename Graph<S>::Id> biases;
};

template <typename S>
ParamNodes<S> register_params(Graph<S>& g, const ParamLayout& layout, const S* params) {
    ParamNodes<S> nodes;
    for (const LayerInfo& layer : layout.layers) {
        nodes.weights.push_back(
            g.param(params + layer.weight_offset,
                    static_cast<std::size_t>(layer.out_ch) * layer.in_ch * 9));
        nodes.biases.push_back(
            g.param(params + layer.bias_offset, static_cast<std::size_t>(layer.out_ch)));
    }
    return nodes;
}

template <typename S>
void collect_param_grads(Graph<S>& g, const ParamLayout& layout, const ParamNodes<S>& nodes,
                         S* out) {
    for (std::size_t li = 0; li < layout.layers.size(); ++li) {
        const LayerInfo& layer = layout.layers[li];
        const auto& gw = g.grad(nodes.weights[li]);
        const auto& gb = g.grad(nodes.biases[li]);
        std::copy(gw.begin(), gw.end(), out + layer.weight_offset);
        std::copy(gb.begin(), gb.end(), out + layer.bias_offset);
    }
}

template <typename S>
typename Graph<S>::Id conv_block(Graph<S>& g, typename Graph<S>::Id x,
                                 const ParamNodes<S>& nodes, const ParamLayout& layout,
                                 std::size_t layer_index) {
    const LayerInfo& layer = layout.layers[layer_index];
    return g.tanh_op(
        g.conv3x3(x, nodes.weights[layer_index], nodes.biases[layer_index], layer.out_ch));
}

// Forward pass of the predictor; returns the (1,H,W) output node.
template <typename S>
typename Graph<S>::Id build_predictor(Graph<S>& g, const PredictorConfig& cfg,
                                      const ParamLayout& layout, const ParamNodes<S>& nodes,
                                      const std::vector<Image>& input) {
    using Id = typename Graph<S>::Id;
    const int depth = cfg.depth;

    auto layer_index = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < layout.layers.size(); ++i)
            if (layout.layers[i].name == name) return i;
        throw Error(ErrorKind::InvalidConfig, "missing layer " + name);
    };

    auto encode = [&](Id x, std::vector<Id>& skips) -> Id {
        for (int l = 0; l < depth; ++l) {
            x = conv_block(g, x, nodes, layout, layer_index("enc" + std::to_string(l)));
            skips.push_back(x);
            x = g.avg_pool2(x);
        }
        return conv_block(g, x, nodes, layout, layer_index("bott"));
    };

    Id bottleneck;
    std::vector<Id> skips;
    if (!cfg.recurrent_bottleneck) {
        // frames stacked as channels
        Id x = g.input(cfg.input_frames, cfg.frame_h, cfg.frame_w);
        auto& xv = g.val(x);
        for (int f = 0; f < cfg.input_frames; ++f)
            for (std::size_t i = 0; i < input[static_cast<std::size_t>(f)].px.size(); ++i)
                xv[static_cast<std::size_t>(f) * input[0].px.size() + i] =
                    S{input[static_cast<std::size_t>(f)].px[i]};
        bottleneck = encode(x, skips);
    } else {
        // frames pass one at a time through the shared encoder; a gated
        // convolutional cell carries state, the last frame provides skips
        const std::size_t zi = layer_index("cell_z");
        const std::size_t ci = layer_index("cell_c");
        const int state_ch = layout.layers[zi].out_ch;
        Id h = g.input(state_ch, cfg.frame_h >> depth, cfg.frame_w >> depth);  // zeros
        for (int f = 0; f < cfg.input_frames; ++f) {
            std::vector<Id> frame_skips;
            Id xt = encode(g.input_image(input[static_cast<std::size_t>(f)]), frame_skips);
            Id zc = g.concat_channels(xt, h);
            Id z = g.sigmoid_op(g.conv3x3(zc, nodes.weights[zi], nodes.biases[zi], state_ch));
            Id cand = g.tanh_op(g.conv3x3(zc, nodes.weights[ci], nodes.biases[ci], state_ch));
            h = g.add(h, g.mul(z, g.sub(cand, h)));  // h + z*(cand - h)
            if (f == cfg.input_frames - 1) skips = frame_skips;
        }
        bottleneck = h;
    }

    Id x = bottleneck;
    for (int l = depth - 1; l >= 0; --l) {
        x = g.upsample2(x);
        x = g.concat_channels(x, skips[static_cast<std::size_t>(l)]);
        x = conv_block(g, x, nodes, layout, layer_index("dec" + std::to_string(l)));
    }
    const std::size_t hi = layer_index("head");
    return g.sigmoid_op(g.conv3x3(x, nodes.weights[hi], nodes.biases[hi], 1));
}

// ---- loss graphs ----------------------------------------------------------

template <typename S>
typename Graph<S>::Id build_l1(Graph<S>& g, typename Graph<S>::Id pred,
                               typename Graph<S>::Id target) {
    return g.mean_all(g.abs_op(g.sub(pred, target)));
}

template <typename S>
typename Graph<S>::Id build_gdl(Graph<S>& g, typename Graph<S>::Id pred,
                                typename Graph<S>::Id target, double alpha) {
    const auto& shape = g.node(pred);
    const int h = shape.h, w = shape.w;
    auto term = [&](typename Graph<S>::Id dp, typename Graph<S>::Id dt) {
        auto diff = g.abs_op(g.sub(g.abs_op(dp), g.abs_op(dt)));
        if (alpha != 1.0) diff = g.pow_const(diff, alpha);
        return g.sum_all(diff);
    };
    auto sum_h = term(g.diff_h(pred), g.diff_h(target));
    auto sum_v = term(g.diff_v(pred), g.diff_v(target));
    const double n = static_cast<double>(h) * (w - 1) + static_cast<double>(h - 1) * w;
    return g.affine(g.add(sum_h, sum_v), 1.0 / n, 0.0);
}

// 1 - MS-SSIM with mean luminance at the coarsest scale and mean
// contrast-structure at every scale, geometric combination with
// renormalized exponents. Valid-mode 11x11 Gaussian statistics.
template <typename S>
typename Graph<S>::Id build_msssim(Graph<S>& g, typename Graph<S>::Id pred,
                                   typename Graph<S>::Id target, int scales) {
    using Id = typename Graph<S>::Id;
    const double c1 = 0.01 * 0.01;  // (0.01 R)^2, R = 1
    const double c2 = 0.03 * 0.03;
    static const std::vector<double> window = gaussian_window11();
    const std::vector<double> exponents = msssim_exponents(scales);

    const auto& shape = g.node(pred);
    if (11 * (1 << (scales - 1)) > std::min(shape.h, shape.w))
        throw Error(ErrorKind::TooSmallForScales,
                    "frames " + std::to_string(shape.h) + "x" + std::to_string(shape.w) +
                        " cannot support " + std::to_string(scales) + " scales");

    Id x = pred, y = target;
    Id ms{};
    bool have_ms = false;
    for (int s = 0; s < scales; ++s) {
        Id mx = g.filter_valid(x, window, 11);
        Id my = g.filter_valid(y, window, 11);
        Id mxx = g.mul(mx, mx);
        Id myy = g.mul(my, my);
        Id mxy = g.mul(mx, my);
        Id sxx = g.sub(g.filter_valid(g.mul(x, x), window, 11), mxx);
        Id syy = g.sub(g.filter_valid(g.mul(y, y), window, 11), myy);
        Id sxy = g.sub(g.filter_valid(g.mul(x, y), window, 11), mxy);

        Id cs = g.mean_all(
            g.div(g.affine(sxy, 2.0, c2), g.affine(g.add(sxx, syy), 1.0, c2)));
        Id factor = g.pow_const(g.clamp_min(cs, 1e-12), exponents[static_cast<std::size_t>(s)]);
        ms = have_ms ? g.mul(ms, factor) : factor;
        have_ms = true;

        if (s == scales - 1) {
            Id lum = g.mean_all(
                g.div(g.affine(mxy, 2.0, c1), g.affine(g.add(mxx, myy), 1.0, c1)));
            ms = g.mul(ms, g.pow_const(g.clamp_min(lum, 1e-12),
                                       exponents[static_cast<std::size_t>(s)]));
        } else {
            const auto& nx = g.node(x);
            int eh = nx.h & ~1, ew = nx.w & ~1;
            if (eh != nx.h || ew != nx.w) {
                x = g.crop(x, eh, ew);
                y = g.crop(y, eh, ew);
            }
            x = g.avg_pool2(x);
            y = g.avg_pool2(y);
        }
    }
    return g.affine(ms, -1.0, 1.0);  // 1 - MS-SSIM
}

struct CompositeTerms {
    int msssim_scales = 0;  // resolved scale count, 0 when the term is off
};

// w_l1*L1 + w_msssim*(1-MS-SSIM) + w_gdl*GDL on predict(model, input) vs target
template <typename S>
typename Graph<S>::Id build_composite(Graph<S>& g, const PredictorConfig& cfg,
                                      const ParamLayout& layout, const ParamNodes<S>& nodes,
                                      const TemporalBlock& pair, const LossWeights& weights,
                                      CompositeTerms* terms = nullptr) {
    using Id = typename Graph<S>::Id;
    if (static_cast<int>(pair.input_frames.size()) != cfg.input_frames)
        throw Error(ErrorKind::ShapeMismatch, "block input count vs config");
    for (const Image& f : pair.input_frames)
        if (f.h != cfg.frame_h || f.w != cfg.frame_w)
            throw Error(ErrorKind::ShapeMismatch, "block frame size vs config");
    if (pair.target_frame.h != cfg.frame_h || pair.target_frame.w != cfg.frame_w)
        throw Error(ErrorKind::ShapeMismatch, "target size vs config");

    Id pred = build_predictor(g, cfg, layout, nodes, pair.input_frames);
    Id target = g.input_image(pair.target_frame);

    Id total{};
    bool have = false;
    auto accumulate = [&](Id term, double weight) {
        Id scaled = g.affine(term, weight, 0.0);
        total = have ? g.add(total, scaled) : scaled;
        have = true;
    };
    if (weights.w_l1 > 0.0) accumulate(build_l1(g, pred, target), weights.w_l1);
    if (weights.w_msssim > 0.0) {
        const int scales = max_msssim_scales(cfg.frame_h, cfg.frame_w);
        if (scales == 0)
            throw Error(ErrorKind::TooSmallForScales, "frames too small for MS-SSIM term");
        if (terms) terms->msssim_scales = scales;
        accumulate(build_msssim(g, pred, target, scales), weights.w_msssim);
    }
    if (weights.w_gdl > 0.0)
        accumulate(build_gdl(g, pred, target, weights.gdl_alpha), weights.w_gdl);
    if (!have) throw Error(ErrorKind::InvalidConfig, "all loss weights are zero");
    return total;
}

}  // namespace sa2d::detail
