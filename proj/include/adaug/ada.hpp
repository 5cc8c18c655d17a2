// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// Saliency-guided occlusion augmentation: pick the most-salient window that
// avoids the ground truth, zero it out, and retrain in cycles on the
// occluded copies. Window search runs over integral images; scores are
// quantized to 2^-64 units in 128-bit integers so the argmax and its
// tie-breaking are exact and reproducible against an exhaustive search.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaug/classic_aug.hpp"
#include "adaug/interpret.hpp"
#include "adaug/metrics.hpp"
#include "adaug/parallel.hpp"
#include "adaug/rng.hpp"
#include "adaug/tensor.hpp"
#include "adaug/unet.hpp"

namespace adaug {

// Prefix-sum table: sum_below(r, c) covers rows < r and cols < c, so any
// rectangle sum is four lookups.
template <class T>
class IntegralTable {
 public:
  IntegralTable(int rows, int cols, const std::function<T(int, int)>& at)
      : rows_(rows), cols_(cols),
        s_(static_cast<std::size_t>(rows + 1) * (cols + 1), T{}) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        cell(r + 1, c + 1) = at(r, c) + cell(r, c + 1) + cell(r + 1, c) - cell(r, c);
  }

  T sum_below(int r, int c) const { return cell(r, c); }

  // Sum over rows [r0, r0+h) x cols [c0, c0+w); additions before
  // subtractions so unsigned cell types never wrap below zero.
  T rect(int r0, int c0, int h, int w) const {
    return cell(r0 + h, c0 + w) + cell(r0, c0) - cell(r0, c0 + w) - cell(r0 + h, c0);
  }

 private:
  T& cell(int r, int c) { return s_[static_cast<std::size_t>(r) * (cols_ + 1) + c]; }
  const T& cell(int r, int c) const {
    return s_[static_cast<std::size_t>(r) * (cols_ + 1) + c];
  }
  int rows_, cols_;
  std::vector<T> s_;
};

// General-purpose float prefix sums (double cells).
inline IntegralTable<double> integral_image(const Tensor& map) {
  require_rank(map, 2, "integral_image");
  const int h = map.dim(0), w = map.dim(1);
  return IntegralTable<double>(h, w, [&map, w](int r, int c) {
    return static_cast<double>(map[static_cast<std::size_t>(r) * w + c]);
  });
}

struct OcclusionMask {
  Tensor values;             // n×n, 1 = keep, 0 = occluded
  int row = -1, col = -1;    // chosen window origin; -1,-1 when flagged
  int z = 0;
  bool all_foreground = false;  // gt covered everything; nothing occludable
};

namespace detail {

using WideSum = unsigned __int128;

// Saliency values quantized to 2^-64 units (truncating), capped at 2^40 so
// a full 32x32-window sum stays far below 128 bits. The cap is orders of
// magnitude above any gradient magnitude seen in practice; the quantizer is
// part of the window-scoring contract so exhaustive re-scoring reproduces
// the argmax bit-for-bit.
inline WideSum quantize_saliency(float v) {
  long double x = static_cast<long double>(v);
  if (x > 0x1p40L) x = 0x1p40L;
  return static_cast<WideSum>(x * 0x1p64L);
}

}  // namespace detail

// Most-salient z×z window outside the ground truth. Windows that overlap no
// gt pixel are preferred; only when every window touches the gt does the
// search fall back to all windows (gt pixels inside then stay unmasked).
// Score ties resolve to the smallest row, then the smallest column.
inline OcclusionMask build_mask(const SaliencyMap& saliency, const Tensor& gt, int n,
                                int z) {
  if (z < 1 || z > n)
    throw std::invalid_argument("build_mask: z = " + std::to_string(z) +
                                " must be in [1, n = " + std::to_string(n) + "]");
  if (saliency.values.shape() != (Shape{n, n}) || gt.shape() != (Shape{n, n}))
    throw std::invalid_argument("build_mask: saliency " +
                                shape_str(saliency.values.shape()) + " and gt " +
                                shape_str(gt.shape()) + " must both be " +
                                std::to_string(n) + "x" + std::to_string(n));
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt[i] != 0.0f && gt[i] != 1.0f)
      throw std::invalid_argument("build_mask: gt must be binary");

  std::int64_t gt_total = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) gt_total += gt[i] != 0.0f;
  OcclusionMask mask;
  mask.z = z;
  mask.values = Tensor(Shape{n, n});
  for (std::size_t i = 0; i < mask.values.size(); ++i) mask.values[i] = 1.0f;
  if (gt_total == static_cast<std::int64_t>(gt.size())) {
    mask.all_foreground = true;
    return mask;
  }

  // Integral tables over the gt-zeroed quantized saliency and the gt counts.
  const IntegralTable<detail::WideSum> sal_table(
      n, n, [&](int r, int c) -> detail::WideSum {
        const std::size_t i = static_cast<std::size_t>(r) * n + c;
        if (gt[i] != 0.0f) return 0;
        return detail::quantize_saliency(saliency.values[i]);
      });
  const IntegralTable<std::int64_t> gt_table(n, n, [&](int r, int c) -> std::int64_t {
    return gt[static_cast<std::size_t>(r) * n + c] != 0.0f;
  });

  bool have_clear = false, have_any = false;
  detail::WideSum best_clear = 0, best_any = 0;
  int clear_r = 0, clear_c = 0, any_r = 0, any_c = 0;
  for (int r = 0; r + z <= n; ++r) {
    for (int c = 0; c + z <= n; ++c) {
      const detail::WideSum score = sal_table.rect(r, c, z, z);
      if (!have_any || score > best_any) {
        have_any = true;
        best_any = score;
        any_r = r;
        any_c = c;
      }
      if (gt_table.rect(r, c, z, z) == 0 && (!have_clear || score > best_clear)) {
        have_clear = true;
        best_clear = score;
        clear_r = r;
        clear_c = c;
      }
    }
  }
  mask.row = have_clear ? clear_r : any_r;
  mask.col = have_clear ? clear_c : any_c;
  for (int y = mask.row; y < mask.row + z; ++y)
    for (int x = mask.col; x < mask.col + z; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      if (gt[i] == 0.0f) mask.values[i] = 0.0f;
    }
  return mask;
}

struct AugmentedSample {
  Tensor x_new;
  int original_index = -1;
  OcclusionMask mask;
  InterpretMethod method = InterpretMethod::kVanilla;
  int cycle = 0;
};

// Pointwise product with the occlusion mask; the input image is untouched.
inline AugmentedSample apply_mask(const Tensor& image, const OcclusionMask& mask) {
  if (image.shape() != mask.values.shape())
    throw std::invalid_argument("apply_mask: image " + shape_str(image.shape()) +
                                " vs mask " + shape_str(mask.values.shape()));
  AugmentedSample out;
  out.mask = mask;
  out.x_new = Tensor(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i)
    out.x_new[i] = image[i] * mask.values[i];
  return out;
}

struct AdaConfig {
  int z = 20;
  int standard_epochs = 100;
  int cycles = 31;
  int ada_epochs = 30;
  InterpretMethod method = InterpretMethod::kGradCam;
  SaliencyTarget target = SaliencyTarget::kSumOverGtForeground;

  void validate(int n) const {
    if (z < 1 || z > n)
      throw std::invalid_argument("ada config: z = " + std::to_string(z) +
                                  " must be in [1, n = " + std::to_string(n) + "]");
    if (standard_epochs < 0 || cycles < 0 || ada_epochs < 0)
      throw std::invalid_argument("ada config: epoch and cycle counts must be >= 0");
  }
};

// One occluded copy per original sample, maskable against the given frozen
// model. Samples whose gt spans the whole image pass through unmodified and
// are reported through `warnings`.
inline std::vector<AugmentedSample> ada_generate(const std::vector<TrainItem>& data,
                                                 const ModelPass& model,
                                                 const AdaConfig& config, int cycle = 0,
                                                 std::vector<std::string>* warnings = nullptr) {
  std::vector<AugmentedSample> out(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    const int n = data[i].image.dim(0);
    const SaliencyMap sal =
        compute_saliency(config.method, model, data[i].image, data[i].gt, config.target);
    const OcclusionMask mask = build_mask(sal, data[i].gt, n, config.z);
    out[i] = apply_mask(data[i].image, mask);
    out[i].original_index = static_cast<int>(i);
    out[i].method = config.method;
    out[i].cycle = cycle;
  });
  if (warnings) {
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out[i].mask.all_foreground)
        warnings->push_back("sample " + std::to_string(i) +
                            ": ground truth covers the whole image; nothing occluded");
  }
  return out;
}

struct ConvergenceRecord {
  int epoch = 0;        // cumulative, 1-based
  std::string phase;    // "standard" or "ada"
  int cycle = 0;        // 0 in the standard phase
  double loss = 0.0;    // mean training loss of the epoch
  MetricsReport val;    // clean-validation metrics after the epoch
};

struct AdaTrainHooks {
  // After each cycle's augmented set is generated, before training on it.
  std::function<void(int cycle, const std::vector<AugmentedSample>&)> on_cycle_data;
  // After each cycle's epochs finish.
  std::function<void(int cycle)> on_cycle_end;
  // After every epoch (standard and ada), with the record just appended.
  std::function<void(const ConvergenceRecord&)> on_epoch;
};

// The cyclic training loop. Conventional data (originals + one classic
// augmentation each) is built once; every cycle regenerates the occlusion
// set from the model state at the start of that cycle and trains on
// conventional + occluded. Clean-validation metrics are recorded after
// every epoch; total epochs = standard_epochs + cycles * ada_epochs.
inline void ada_training(ModelParams& params, AdamState& adam,
                         const std::vector<TrainItem>& train_data,
                         const std::vector<TrainItem>& val_data, const AdaConfig& config,
                         const AugmentParams& aug_params, int batch_size, Rng& rng,
                         std::vector<ConvergenceRecord>& records,
                         const AdaTrainHooks& hooks = {}) {
  config.validate(params.config.n);
  std::vector<TrainItem> conventional = train_data;
  {
    std::vector<TrainItem> classic = classic_augmentations(train_data, aug_params, rng);
    conventional.insert(conventional.end(), classic.begin(), classic.end());
  }
  int epoch = records.empty() ? 0 : records.back().epoch;

  auto run_epochs = [&](const std::vector<TrainItem>& data, int count,
                        const char* phase, int cycle) {
    for (int e = 0; e < count; ++e) {
      const double loss = train_epoch(params, adam, data, batch_size, rng);
      ConvergenceRecord rec;
      rec.epoch = ++epoch;
      rec.phase = phase;
      rec.cycle = cycle;
      rec.loss = loss;
      rec.val = evaluate(unet_predictor(params), val_data);
      records.push_back(rec);
      if (hooks.on_epoch) hooks.on_epoch(records.back());
    }
  };

  run_epochs(conventional, config.standard_epochs, "standard", 0);
  for (int cycle = 1; cycle <= config.cycles; ++cycle) {
    std::vector<AugmentedSample> occluded =
        ada_generate(train_data, unet_pass(params), config, cycle);
    if (hooks.on_cycle_data) hooks.on_cycle_data(cycle, occluded);
    std::vector<TrainItem> new_data = conventional;
    for (std::size_t i = 0; i < occluded.size(); ++i)
      new_data.push_back(TrainItem{
          occluded[i].x_new,
          train_data[static_cast<std::size_t>(occluded[i].original_index)].gt});
    // Adam's moment estimates describe the gradient distribution of the data
    // they were accumulated on. Each regeneration swaps that distribution
    // out from under them: directions that were quiet carry a tiny second
    // moment, the new set fires large gradients along exactly those
    // directions, and lr/sqrt(v) overshoots hard enough to wreck a converged
    // model within a few short cycles. Restart the estimates at every cycle
    // boundary; the hyperparameters (lr, betas, eps) are kept.
    adam.m.clear();
    adam.v.clear();
    adam.t = 0;
    run_epochs(new_data, config.ada_epochs, "ada", cycle);
    if (hooks.on_cycle_end) hooks.on_cycle_end(cycle);
  }
}

// IoU of the occluded (zero) regions of two masks; two untouched masks
// (no zeros anywhere) count as identical.
inline double mask_iou(const OcclusionMask& a, const OcclusionMask& b) {
  if (a.values.shape() != b.values.shape())
    throw std::invalid_argument("mask_iou: size mismatch " +
                                shape_str(a.values.shape()) + " vs " +
                                shape_str(b.values.shape()));
  std::int64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const bool za = a.values[i] == 0.0f, zb = b.values[i] == 0.0f;
    inter += za && zb;
    uni += za || zb;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Mean pairwise mask agreement across methods, over a dataset and a frozen
// model. Entry (p,q) averages mask_iou between method p's and method q's
// occlusion masks per sample; computed for p <= q and mirrored, so the
// result is exactly symmetric with an exact unit diagonal.
inline std::vector<std::vector<double>> iou_matrix(const ModelPass& model,
                                                   const std::vector<TrainItem>& data,
                                                   const std::vector<InterpretMethod>& methods,
                                                   const AdaConfig& config) {
  if (data.empty()) throw std::invalid_argument("iou_matrix: empty dataset");
  const std::size_t m = methods.size();
  // All masks per sample first (parallel over samples), then a sequential
  // reduction so aggregation order is fixed.
  std::vector<std::vector<OcclusionMask>> masks(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    masks[i].reserve(m);
    const int n = data[i].image.dim(0);
    for (InterpretMethod method : methods) {
      AdaConfig per = config;
      per.method = method;
      const SaliencyMap sal =
          compute_saliency(method, model, data[i].image, data[i].gt, per.target);
      masks[i].push_back(build_mask(sal, data[i].gt, n, per.z));
    }
  });
  std::vector<std::vector<double>> out(m, std::vector<double>(m, 0.0));
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t q = p; q < m; ++q) {
      double acc = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i)
        acc += mask_iou(masks[i][p], masks[i][q]);
      const double mean = acc / static_cast<double>(data.size());
      out[p][q] = mean;
      out[q][p] = mean;
    }
  return out;
}

}  // namespace adaug
