#pragma once

#include <vector>

#include "sa2d/dataset.hpp"
#include "sa2d/image.hpp"
#include "sa2d/predictor.hpp"

namespace sa2d {

struct LossWeights {
    double w_l1 = 1.0;
    double w_msssim = 1.0;
    double w_gdl = 1.0;
    double gdl_alpha = 1.0;
};

// mean |pred - target|
double l1_loss(const Image& pred, const Image& target);

// 1 - MS-SSIM, 11x11 Gaussian window, sigma 1.5, C1=(0.01)^2, C2=(0.03)^2,
// exponents renormalized to `scales`
double msssim_loss(const Image& pred, const Image& target, int scales);

// gradient difference loss over forward differences, normalized by the
// total number of valid horizontal+vertical offsets
double gdl_loss(const Image& pred, const Image& target, double alpha = 1.0);

struct LossValue {
    double loss = 0.0;
    std::vector<double> gradient;  // d loss / d theta
};

// Eq-style per-pair training loss with analytic parameter gradient.
LossValue composite_loss(const FramePredictor& model, const TemporalBlock& pair,
                         const LossWeights& weights);

// Mean loss and gradient over a set of pairs (the per-task objective).
LossValue composite_loss_mean(const FramePredictor& model,
                              const std::vector<TemporalBlock>& pairs,
                              const LossWeights& weights);

// loss value only (no tape kept for gradients beyond the forward pass)
double composite_loss_value(const FramePredictor& model, const TemporalBlock& pair,
                            const LossWeights& weights);

// Hessian-vector product of the mean composite loss at `params` in direction
// `direction`, exact via forward-over-reverse differentiation.
std::vector<double> composite_hvp_mean(const PredictorConfig& config,
                                       const std::vector<double>& params,
                                       const std::vector<double>& direction,
                                       const std::vector<TemporalBlock>& pairs,
                                       const LossWeights& weights);

}  // namespace sa2d
