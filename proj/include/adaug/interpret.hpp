// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// Gradient-based saliency. Every method reduces the model's pre-sigmoid
// output to a scalar (sum over a pixel set chosen by SaliencyTarget),
// differentiates it, and post-processes the input or layer gradients into a
// nonnegative per-pixel map. Methods differ only in the ReLU backward rule
// and the post-processing, so they share one driver.

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaug/autograd.hpp"
#include "adaug/tensor.hpp"
#include "adaug/unet.hpp"

namespace adaug {

enum class InterpretMethod {
  kVanilla,
  kDeconvnet,
  kGuidedBackprop,
  kInputXGradient,
  kGradCam,
  kGuidedGradCam,
};

inline const std::vector<InterpretMethod>& all_interpret_methods() {
  static const std::vector<InterpretMethod> methods = {
      InterpretMethod::kVanilla,        InterpretMethod::kDeconvnet,
      InterpretMethod::kGuidedBackprop, InterpretMethod::kInputXGradient,
      InterpretMethod::kGradCam,        InterpretMethod::kGuidedGradCam,
  };
  return methods;
}

// Stable identifiers used on the command line, in CSV columns, and in file
// names.
inline const char* method_name(InterpretMethod m) {
  switch (m) {
    case InterpretMethod::kVanilla: return "vanilla";
    case InterpretMethod::kDeconvnet: return "deconvnet";
    case InterpretMethod::kGuidedBackprop: return "guided";
    case InterpretMethod::kInputXGradient: return "inputxgrad";
    case InterpretMethod::kGradCam: return "gradcam";
    case InterpretMethod::kGuidedGradCam: return "guided-gradcam";
  }
  return "?";
}

inline InterpretMethod method_from_name(const std::string& name) {
  for (InterpretMethod m : all_interpret_methods())
    if (name == method_name(m)) return m;
  std::string valid;
  for (InterpretMethod m : all_interpret_methods()) {
    if (!valid.empty()) valid += "|";
    valid += method_name(m);
  }
  throw std::invalid_argument("unknown interpretability method '" + name +
                              "'; expected one of " + valid);
}

enum class SaliencyTarget { kSumOverGtForeground, kSumOverPredictedForeground, kSumAll };

struct SaliencyMap {
  Tensor values;  // [n,n], nonnegative, finite
  InterpretMethod method;
  std::string target_desc;  // which scalarization rule actually applied
};

// A recorded model pass: builds the graph for one input batch on the tape
// and returns the pre-sigmoid logits. Layer bookmarks ("bottleneck" for the
// U-Net) must be left on the tape for the capture-based methods.
using ModelPass = std::function<Tensor(Tape*, const Tensor&)>;

// Adapter for the U-Net: eval-mode forward whose "logits" bookmark is the
// head output.
inline ModelPass unet_pass(ModelParams& params) {
  return [&params](Tape* tape, const Tensor& batch) {
    unet_forward(params, batch, false, tape);
    return tape->marks().at("logits");
  };
}

namespace detail {

// Scalar target: sum of logits over gt foreground, falling back to the
// predicted foreground (logit >= 0, the same set the inclusive 0.5
// probability threshold selects) and finally to the full sum.
inline Tensor scalarize_on(Tape* tape, const Tensor& logits, const Tensor& gt,
                           SaliencyTarget target, std::string* desc_out) {
  if (static_cast<std::size_t>(gt.size()) != logits.size())
    throw std::invalid_argument("scalarize: gt size " + shape_str(gt.shape()) +
                                " does not match logits " + shape_str(logits.shape()));
  auto sel = std::make_shared<std::vector<std::uint8_t>>(logits.size(), 0);
  auto try_rule = [&](SaliencyTarget rule) -> bool {
    std::size_t count = 0;
    switch (rule) {
      case SaliencyTarget::kSumOverGtForeground:
        for (std::size_t i = 0; i < logits.size(); ++i)
          if (gt[i] != 0.0f) {
            (*sel)[i] = 1;
            ++count;
          }
        if (desc_out) *desc_out = "gt_foreground";
        break;
      case SaliencyTarget::kSumOverPredictedForeground:
        for (std::size_t i = 0; i < logits.size(); ++i)
          if (logits[i] >= 0.0f) {
            (*sel)[i] = 1;
            ++count;
          }
        if (desc_out) *desc_out = "pred_foreground";
        break;
      case SaliencyTarget::kSumAll:
        for (std::size_t i = 0; i < logits.size(); ++i) (*sel)[i] = 1;
        count = logits.size();
        if (desc_out) *desc_out = "sum_all";
        break;
    }
    return count > 0;
  };
  // Documented fallback chain; SumAll always succeeds.
  const SaliencyTarget chain[3] = {SaliencyTarget::kSumOverGtForeground,
                                   SaliencyTarget::kSumOverPredictedForeground,
                                   SaliencyTarget::kSumAll};
  int start = target == SaliencyTarget::kSumAll                      ? 2
              : target == SaliencyTarget::kSumOverPredictedForeground ? 1
                                                                      : 0;
  for (int i = start; i < 3; ++i) {
    std::fill(sel->begin(), sel->end(), 0);
    if (try_rule(chain[i])) break;
  }
  return masked_sum(tape, logits, sel);
}

struct BackpropResult {
  Tensor input_grad;  // [n,n] signed gradient at the input
  std::string target_desc;
};

// Shared driver: forward, scalarize, backward under the given ReLU rule,
// return the signed input gradient.
inline BackpropResult input_gradient(const ModelPass& model, const Tensor& image,
                                     const Tensor& gt, SaliencyTarget target,
                                     ReluBackwardMode mode) {
  require_rank(image, 2, "saliency input image");
  Tensor batch = stack_batch({&image});
  Tape tape;
  Tensor logits = model(&tape, batch);
  BackpropResult res;
  Tensor scalar = scalarize_on(&tape, logits, gt, target, &res.target_desc);
  tape.backward(scalar, mode);
  Tensor g(image.shape());
  const float* bg = batch.grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = bg[i];
  res.input_grad = g;
  return res;
}

inline Tensor abs_map(const Tensor& g) {
  Tensor m(g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) m[i] = std::fabs(g[i]);
  return m;
}

inline void check_map(const Tensor& m, const char* what) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!(m[i] >= 0.0f) || !std::isfinite(m[i]))
      throw std::runtime_error(std::string(what) +
                               ": saliency map has a negative or non-finite value");
}

// Min-max rescale to [0,1]. A constant positive map becomes all ones, a
// zero map stays zero.
inline Tensor minmax_normalize(const Tensor& m) {
  float lo = m[0], hi = m[0];
  for (std::size_t i = 1; i < m.size(); ++i) {
    lo = std::min(lo, m[i]);
    hi = std::max(hi, m[i]);
  }
  Tensor out(m.shape());
  if (hi > lo) {
    const float inv = 1.0f / (hi - lo);
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = (m[i] - lo) * inv;
  } else if (hi > 0.0f) {
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = 1.0f;
  }
  return out;
}

// Bilinear resize [h,w] -> [n,n] with half-pixel-center sampling and edge
// clamping.
inline Tensor bilinear_resize(const Tensor& src, int n) {
  require_rank(src, 2, "bilinear_resize");
  const int h = src.dim(0), w = src.dim(1);
  Tensor out(Shape{n, n});
  const float sy_scale = static_cast<float>(h) / static_cast<float>(n);
  const float sx_scale = static_cast<float>(w) / static_cast<float>(n);
  for (int y = 0; y < n; ++y) {
    float sy = (static_cast<float>(y) + 0.5f) * sy_scale - 0.5f;
    sy = std::min(std::max(sy, 0.0f), static_cast<float>(h - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, h - 1);
    const float fy = sy - static_cast<float>(y0);
    for (int x = 0; x < n; ++x) {
      float sx = (static_cast<float>(x) + 0.5f) * sx_scale - 0.5f;
      sx = std::min(std::max(sx, 0.0f), static_cast<float>(w - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, w - 1);
      const float fx = sx - static_cast<float>(x0);
      const float top = src[static_cast<std::size_t>(y0) * w + x0] * (1.0f - fx) +
                        src[static_cast<std::size_t>(y0) * w + x1] * fx;
      const float bot = src[static_cast<std::size_t>(y1) * w + x0] * (1.0f - fx) +
                        src[static_cast<std::size_t>(y1) * w + x1] * fx;
      out[static_cast<std::size_t>(y) * n + x] = top * (1.0f - fy) + bot * fy;
    }
  }
  return out;
}

}  // namespace detail

inline Tensor scalarize(Tape* tape, const Tensor& logits, const Tensor& gt,
                        SaliencyTarget target) {
  return detail::scalarize_on(tape, logits, gt, target, nullptr);
}

inline SaliencyMap vanilla_backprop(const ModelPass& model, const Tensor& image,
                                    const Tensor& gt, SaliencyTarget target) {
  auto res = detail::input_gradient(model, image, gt, target,
                                    ReluBackwardMode::kStandard);
  SaliencyMap map{detail::abs_map(res.input_grad), InterpretMethod::kVanilla,
                  res.target_desc};
  detail::check_map(map.values, "vanilla_backprop");
  return map;
}

inline SaliencyMap deconvnet(const ModelPass& model, const Tensor& image,
                             const Tensor& gt, SaliencyTarget target) {
  auto res =
      detail::input_gradient(model, image, gt, target, ReluBackwardMode::kDeconv);
  SaliencyMap map{detail::abs_map(res.input_grad), InterpretMethod::kDeconvnet,
                  res.target_desc};
  detail::check_map(map.values, "deconvnet");
  return map;
}

inline SaliencyMap guided_backprop(const ModelPass& model, const Tensor& image,
                                   const Tensor& gt, SaliencyTarget target) {
  auto res =
      detail::input_gradient(model, image, gt, target, ReluBackwardMode::kGuided);
  SaliencyMap map{detail::abs_map(res.input_grad), InterpretMethod::kGuidedBackprop,
                  res.target_desc};
  detail::check_map(map.values, "guided_backprop");
  return map;
}

inline SaliencyMap input_x_gradient(const ModelPass& model, const Tensor& image,
                                    const Tensor& gt, SaliencyTarget target) {
  auto res = detail::input_gradient(model, image, gt, target,
                                    ReluBackwardMode::kStandard);
  Tensor m(image.shape());
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = std::fabs(res.input_grad[i] * image[i]);
  SaliencyMap map{m, InterpretMethod::kInputXGradient, res.target_desc};
  detail::check_map(map.values, "input_x_gradient");
  return map;
}

// Weighted-activation map at a bookmarked layer: channel weights are the
// spatial means of the layer's activation gradient, the weighted sum passes
// through a ReLU (positive contributions only), and the result is min-max
// normalized and bilinearly upsampled to the input size. The normalization
// makes the map invariant to positive rescaling of the scalar target.
inline SaliencyMap gradcam(const ModelPass& model, const Tensor& image,
                           const Tensor& gt, SaliencyTarget target,
                           const std::string& layer_id = "bottleneck") {
  require_rank(image, 2, "gradcam input image");
  const int n = image.dim(0);
  Tensor batch = stack_batch({&image});
  Tape tape;
  Tensor logits = model(&tape, batch);
  CaptureHandle cap = register_capture(tape, layer_id);
  std::string desc;
  Tensor scalar = detail::scalarize_on(&tape, logits, gt, target, &desc);
  tape.backward(scalar, ReluBackwardMode::kStandard);

  const Tensor& act = cap.activation;
  require_rank(act, 4, "gradcam captured layer");
  const int channels = act.dim(1), h = act.dim(2), w = act.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const float* a = act.data();
  const float* g = act.grad();
  Tensor weighted(Shape{h, w});
  for (int k = 0; k < channels; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += g[k * plane + i];
    const float wk = static_cast<float>(mean / static_cast<double>(plane));
    for (std::size_t i = 0; i < plane; ++i) weighted[i] += wk * a[k * plane + i];
  }
  for (std::size_t i = 0; i < plane; ++i)
    weighted[i] = weighted[i] > 0.0f ? weighted[i] : 0.0f;

  Tensor up = detail::bilinear_resize(detail::minmax_normalize(weighted), n);
  SaliencyMap map{up, InterpretMethod::kGradCam, desc};
  detail::check_map(map.values, "gradcam");
  return map;
}

inline SaliencyMap guided_gradcam(const ModelPass& model, const Tensor& image,
                                  const Tensor& gt, SaliencyTarget target,
                                  const std::string& layer_id = "bottleneck") {
  SaliencyMap guided = guided_backprop(model, image, gt, target);
  SaliencyMap cam = gradcam(model, image, gt, target, layer_id);
  Tensor m(image.shape());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = guided.values[i] * cam.values[i];
  SaliencyMap map{m, InterpretMethod::kGuidedGradCam, guided.target_desc};
  detail::check_map(map.values, "guided_gradcam");
  return map;
}

inline SaliencyMap compute_saliency(InterpretMethod method, const ModelPass& model,
                                    const Tensor& image, const Tensor& gt,
                                    SaliencyTarget target,
                                    const std::string& layer_id = "bottleneck") {
  switch (method) {
    case InterpretMethod::kVanilla: return vanilla_backprop(model, image, gt, target);
    case InterpretMethod::kDeconvnet: return deconvnet(model, image, gt, target);
    case InterpretMethod::kGuidedBackprop:
      return guided_backprop(model, image, gt, target);
    case InterpretMethod::kInputXGradient:
      return input_x_gradient(model, image, gt, target);
    case InterpretMethod::kGradCam:
      return gradcam(model, image, gt, target, layer_id);
    case InterpretMethod::kGuidedGradCam:
      return guided_gradcam(model, image, gt, target, layer_id);
  }
  throw std::invalid_argument("compute_saliency: unknown method");
}

}  // namespace adaug
