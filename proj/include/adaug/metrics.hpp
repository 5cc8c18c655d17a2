// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// Segmentation metrics (DSC, Hausdorff surface distance, sensitivity /
// specificity / precision), occlusion variants for robustness evaluation,
// and dataset-level aggregation.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "adaug/parallel.hpp"
#include "adaug/tensor.hpp"
#include "adaug/unet.hpp"

namespace adaug {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

struct Rates {
  double tpr = 0.0;
  double tnr = 0.0;
  double ppv = 0.0;
};

struct MetricsReport {
  double dsc = 0.0;
  double hsd = 0.0;  // mean over samples where the distance is defined
  double tpr = 0.0;
  double tnr = 0.0;
  double ppv = 0.0;
  int sample_count = 0;
  int hsd_undefined_count = 0;
};

namespace detail {

inline void require_binary(const Tensor& m, const char* what) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i] != 0.0f && m[i] != 1.0f)
      throw std::invalid_argument(std::string(what) +
                                  ": mask must be binary, found value " +
                                  std::to_string(m[i]));
}

}  // namespace detail

// Pixel-level agreement counts between ground truth and a predicted mask.
inline ConfusionCounts confusion(const Tensor& gt, const Tensor& pred) {
  if (gt.shape() != pred.shape())
    throw std::invalid_argument("confusion: shape mismatch " + shape_str(gt.shape()) +
                                " vs " + shape_str(pred.shape()));
  detail::require_binary(gt, "confusion gt");
  detail::require_binary(pred, "confusion pred");
  ConfusionCounts c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool g = gt[i] != 0.0f, p = pred[i] != 0.0f;
    if (g && p) ++c.tp;
    else if (!g && !p) ++c.tn;
    else if (!g && p) ++c.fp;
    else ++c.fn;
  }
  return c;
}

// Dice similarity on a 0-100 scale; two empty masks agree perfectly.
inline double dsc(const ConfusionCounts& c) {
  const std::int64_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 100.0;
  return 100.0 * 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

// Sensitivity, specificity, precision on a 0-100 scale. An empty denominator
// scores 100 when the corresponding error count is zero (nothing to miss)
// and 0 otherwise.
inline Rates statistical_rates(const ConfusionCounts& c) {
  auto rate = [](std::int64_t good, std::int64_t bad) {
    if (good + bad == 0) return bad == 0 ? 100.0 : 0.0;
    return 100.0 * static_cast<double>(good) / static_cast<double>(good + bad);
  };
  return Rates{rate(c.tp, c.fn), rate(c.tn, c.fp), rate(c.tp, c.fp)};
}

namespace detail {

// Foreground pixels with at least one 4-neighbor outside the mask (the image
// edge counts as outside).
inline std::vector<std::pair<int, int>> boundary_pixels(const Tensor& m) {
  const int h = m.dim(0), w = m.dim(1);
  std::vector<std::pair<int, int>> out;
  auto fg = [&](int y, int x) {
    return y >= 0 && y < h && x >= 0 && x < w &&
           m[static_cast<std::size_t>(y) * w + x] != 0.0f;
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (fg(y, x) &&
          (!fg(y - 1, x) || !fg(y + 1, x) || !fg(y, x - 1) || !fg(y, x + 1)))
        out.emplace_back(y, x);
  return out;
}

// One-dimensional squared distance transform (lower envelope of parabolas);
// exact for the small integer inputs used here.
inline void sq_dist_1d(const std::vector<double>& f, std::vector<double>& d,
                       std::vector<int>& v, std::vector<double>& zb) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  zb[0] = -1e20;
  zb[1] = 1e20;
  for (int q = 1; q < n; ++q) {
    double s;
    for (;;) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
          (2.0 * q - 2.0 * p);
      if (s <= zb[k]) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    zb[k] = s;
    zb[k + 1] = 1e20;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (zb[k + 1] < q) ++k;
    const int p = v[k];
    d[q] = (static_cast<double>(q) - p) * (static_cast<double>(q) - p) + f[p];
  }
}

// Exact Euclidean squared distance to the nearest seed, over the full grid.
inline std::vector<double> squared_edt(int h, int w,
                                       const std::vector<std::pair<int, int>>& seeds) {
  const double inf = 1e18;
  std::vector<double> grid(static_cast<std::size_t>(h) * w, inf);
  for (const auto& [y, x] : seeds) grid[static_cast<std::size_t>(y) * w + x] = 0.0;
  const int m = std::max(h, w);
  std::vector<double> f(static_cast<std::size_t>(m)), d(static_cast<std::size_t>(m));
  std::vector<int> v(static_cast<std::size_t>(m));
  std::vector<double> zb(static_cast<std::size_t>(m) + 1);
  for (int x = 0; x < w; ++x) {  // along columns
    for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = grid[static_cast<std::size_t>(y) * w + x];
    f.resize(static_cast<std::size_t>(h));
    sq_dist_1d(f, d, v, zb);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(y)];
    f.resize(static_cast<std::size_t>(m));
  }
  for (int y = 0; y < h; ++y) {  // along rows
    for (int x = 0; x < w; ++x) f[static_cast<std::size_t>(x)] = grid[static_cast<std::size_t>(y) * w + x];
    f.resize(static_cast<std::size_t>(w));
    sq_dist_1d(f, d, v, zb);
    for (int x = 0; x < w; ++x) grid[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(x)];
    f.resize(static_cast<std::size_t>(m));
  }
  return grid;
}

}  // namespace detail

// Symmetric Hausdorff distance between the two masks' boundary point sets,
// in pixel units. Undefined (nullopt) when either mask has no foreground.
inline std::optional<double> hsd(const Tensor& gt, const Tensor& pred) {
  if (gt.shape() != pred.shape())
    throw std::invalid_argument("hsd: shape mismatch " + shape_str(gt.shape()) +
                                " vs " + shape_str(pred.shape()));
  detail::require_binary(gt, "hsd gt");
  detail::require_binary(pred, "hsd pred");
  const auto ba = detail::boundary_pixels(gt);
  const auto bb = detail::boundary_pixels(pred);
  if (ba.empty() || bb.empty()) return std::nullopt;
  const int h = gt.dim(0), w = gt.dim(1);
  const std::vector<double> to_b = detail::squared_edt(h, w, bb);
  const std::vector<double> to_a = detail::squared_edt(h, w, ba);
  double worst = 0.0;
  for (const auto& [y, x] : ba)
    worst = std::max(worst, to_b[static_cast<std::size_t>(y) * w + x]);
  for (const auto& [y, x] : bb)
    worst = std::max(worst, to_a[static_cast<std::size_t>(y) * w + x]);
  return std::sqrt(worst);
}

// Copy of the image with the z×z block at (i,j) set to zero.
inline Tensor erase_region(const Tensor& image, int i, int j, int z) {
  require_rank(image, 2, "erase_region");
  const int h = image.dim(0), w = image.dim(1);
  if (z < 1 || i < 0 || j < 0 || i + z > h || j + z > w)
    throw std::invalid_argument("erase_region: window (" + std::to_string(i) + "," +
                                std::to_string(j) + ") size " + std::to_string(z) +
                                " out of bounds for " + shape_str(image.shape()));
  Tensor out = image.clone();
  for (int y = i; y < i + z; ++y)
    for (int x = j; x < j + z; ++x) out[static_cast<std::size_t>(y) * w + x] = 0.0f;
  return out;
}

// Occluded copies on the non-overlapping z-grid: one variant per origin
// (i,j) with i,j in {0, z, 2z, ...} and the window fully inside the image.
// Sample-major, row-major grid order; ground truth is shared unchanged.
inline std::vector<TrainItem> build_robustness_data(const std::vector<TrainItem>& data,
                                                    int n, int z) {
  if (z < 1 || z > n)
    throw std::invalid_argument("build_robustness_data: z must be in [1, n]");
  std::vector<TrainItem> out;
  for (const TrainItem& s : data) {
    if (s.image.dim(0) != n || s.image.dim(1) != n)
      throw std::invalid_argument("build_robustness_data: sample size " +
                                  shape_str(s.image.shape()) +
                                  " does not match n = " + std::to_string(n));
    for (int i = 0; i + z <= n; i += z)
      for (int j = 0; j + z <= n; j += z)
        out.push_back(TrainItem{erase_region(s.image, i, j, z), s.gt});
  }
  return out;
}

// Model adapter for evaluation: image in, binary mask out.
using Predictor = std::function<Tensor(const Tensor&)>;

inline Predictor unet_predictor(ModelParams& params) {
  return [&params](const Tensor& image) { return predict_mask(params, image); };
}

// Per-sample metrics averaged over the dataset. Samples whose Hausdorff
// distance is undefined (an empty mask on either side) are excluded from the
// HSD mean and counted; if no sample defines it, the mean is reported as 0.
inline MetricsReport evaluate(const Predictor& predict,
                              const std::vector<TrainItem>& data) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  struct PerSample {
    double dsc, tpr, tnr, ppv;
    std::optional<double> hsd;
  };
  std::vector<PerSample> rows(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    Tensor pred = predict(data[i].image);
    const ConfusionCounts c = confusion(data[i].gt, pred);
    const Rates r = statistical_rates(c);
    rows[i] = PerSample{dsc(c), r.tpr, r.tnr, r.ppv, hsd(data[i].gt, pred)};
  });
  MetricsReport rep;
  rep.sample_count = static_cast<int>(data.size());
  double hsd_sum = 0.0;
  int hsd_defined = 0;
  for (const PerSample& r : rows) {
    rep.dsc += r.dsc;
    rep.tpr += r.tpr;
    rep.tnr += r.tnr;
    rep.ppv += r.ppv;
    if (r.hsd) {
      hsd_sum += *r.hsd;
      ++hsd_defined;
    } else {
      ++rep.hsd_undefined_count;
    }
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  rep.dsc *= inv;
  rep.tpr *= inv;
  rep.tnr *= inv;
  rep.ppv *= inv;
  rep.hsd = hsd_defined > 0 ? hsd_sum / static_cast<double>(hsd_defined) : 0.0;
  return rep;
}

}  // namespace adaug
