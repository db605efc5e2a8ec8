#include "sa2d/losses.hpp"

#include "sa2d/model_graph.hpp"

namespace sa2d {

double l1_loss(const Image& pred, const Image& target) {
    require_same_shape(pred, target, "l1_loss");
    Graph<double> g;
    return g.scalar(detail::build_l1(g, g.input_image(pred), g.input_image(target)));
}

double msssim_loss(const Image& pred, const Image& target, int scales) {
    require_same_shape(pred, target, "msssim_loss");
    if (scales < 1) throw Error(ErrorKind::InvalidConfig, "scales must be >= 1");
    Graph<double> g;
    return g.scalar(detail::build_msssim(g, g.input_image(pred), g.input_image(target), scales));
}

double gdl_loss(const Image& pred, const Image& target, double alpha) {
    require_same_shape(pred, target, "gdl_loss");
    if (pred.h < 2 || pred.w < 2) throw Error(ErrorKind::ShapeMismatch, "gdl needs 2x2 frames");
    Graph<double> g;
    return g.scalar(detail::build_gdl(g, g.input_image(pred), g.input_image(target), alpha));
}

namespace {

void check_weights(const LossWeights& weights) {
    if (weights.w_l1 < 0.0 || weights.w_msssim < 0.0 || weights.w_gdl < 0.0)
        throw Error(ErrorKind::InvalidConfig, "loss weights must be nonnegative");
    if (weights.w_l1 == 0.0 && weights.w_msssim == 0.0 && weights.w_gdl == 0.0)
        throw Error(ErrorKind::InvalidConfig, "at least one loss weight must be positive");
}

}  // namespace

LossValue composite_loss(const FramePredictor& model, const TemporalBlock& pair,
                         const LossWeights& weights) {
    check_weights(weights);
    const ParamLayout layout = param_layout(model.config);
    Graph<double> g;
    auto nodes = detail::register_params(g, layout, model.parameters.data());
    auto root = detail::build_composite(g, model.config, layout, nodes, pair, weights);
    g.backward(root);
    LossValue out;
    out.loss = g.scalar(root);
    out.gradient.assign(layout.total, 0.0);
    detail::collect_param_grads(g, layout, nodes, out.gradient.data());
    return out;
}

double composite_loss_value(const FramePredictor& model, const TemporalBlock& pair,
                            const LossWeights& weights) {
    check_weights(weights);
    const ParamLayout layout = param_layout(model.config);
    Graph<double> g;
    auto nodes = detail::register_params(g, layout, model.parameters.data());
    return g.scalar(detail::build_composite(g, model.config, layout, nodes, pair, weights));
}

LossValue composite_loss_mean(const FramePredictor& model,
                              const std::vector<TemporalBlock>& pairs,
                              const LossWeights& weights) {
    if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "no pairs");
    LossValue acc;
    acc.gradient.assign(param_count(model.config), 0.0);
    for (const TemporalBlock& pair : pairs) {
        LossValue one = composite_loss(model, pair, weights);
        acc.loss += one.loss;
        for (std::size_t i = 0; i < acc.gradient.size(); ++i)
            acc.gradient[i] += one.gradient[i];
    }
    const double inv = 1.0 / static_cast<double>(pairs.size());
    acc.loss *= inv;
    for (double& v : acc.gradient) v *= inv;
    return acc;
}

std::vector<double> composite_hvp_mean(const PredictorConfig& config,
                                       const std::vector<double>& params,
                                       const std::vector<double>& direction,
                                       const std::vector<TemporalBlock>& pairs,
                                       const LossWeights& weights) {
    check_weights(weights);
    if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "no pairs");
    const ParamLayout layout = param_layout(config);
    if (params.size() != layout.total || direction.size() != layout.total)
        throw Error(ErrorKind::ShapeMismatch, "hvp parameter size");

    std::vector<Dual> dual_params(layout.total);
    for (std::size_t i = 0; i < layout.total; ++i) dual_params[i] = {params[i], direction[i]};

    std::vector<double> hv(layout.total, 0.0);
    std::vector<Dual> grad(layout.total);
    for (const TemporalBlock& pair : pairs) {
        Graph<Dual> g;
        auto nodes = detail::register_params(g, layout, dual_params.data());
        auto root = detail::build_composite(g, config, layout, nodes, pair, weights);
        g.backward(root);
        std::fill(grad.begin(), grad.end(), Dual{});
        detail::collect_param_grads(g, layout, nodes, grad.data());
        for (std::size_t i = 0; i < layout.total; ++i) hv[i] += grad[i].d;
    }
    const double inv = 1.0 / static_cast<double>(pairs.size());
    for (double& v : hv) v *= inv;
    return hv;
}

}  // namespace sa2d
