// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic segmentation dataset: each sample is a dark noisy background
// holding a bright elliptical "cord" region, with a smaller butterfly-shaped
// structure inside it as the ground truth. An optional corner marker whose
// brightness tracks the butterfly's horizontal position acts as a
// controllable spurious-context lure: a model that learns to read the corner
// instead of the target pixels will fail under occlusion.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaug/parallel.hpp"
#include "adaug/rng.hpp"
#include "adaug/tensor.hpp"

namespace adaug {

enum class ShapeFamily {
  kCordButterfly,  // two-lobed foreground inside an elliptical cord
};

struct SyntheticSpec {
  int n = 64;
  int train_count = 160;
  int val_count = 40;  // 20% of the combined set, mirroring the split rule
  ShapeFamily family = ShapeFamily::kCordButterfly;
  float noise_std = 0.03f;
  bool spurious_context = true;
  float lure_strength = 0.8f;

  void validate() const {
    if (n < 8 || n % 8 != 0)
      throw std::invalid_argument("synthetic spec: n must be a positive multiple of 8, got " +
                                  std::to_string(n));
    if (train_count < 1 || val_count < 1)
      throw std::invalid_argument("synthetic spec: split counts must be >= 1");
    if (!(lure_strength >= 0.0f && lure_strength <= 1.0f))
      throw std::invalid_argument("synthetic spec: lure strength must lie in [0, 1]");
  }
};

struct Sample {
  std::string id;
  Tensor image;  // n x n, values in [0, 1]
  Tensor gt;     // n x n, binary
  std::string split;  // "train" or "val"
};

struct SyntheticDataset {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

namespace detail {

// Base intensities. The foreground sits modestly above the cord, and the
// cord is mottled: a gentle low-frequency brightness drift plus a handful of
// bright elliptical texture spots whose brightness overlaps the
// foreground's. Brightness alone therefore lights up several lookalike
// regions per image; telling the real foreground apart takes either its
// two-lobe shape or a position cue — and the corner marker hands a
// capacity-limited model the position cue cheaply.
constexpr float kBackgroundLevel = 0.08f;
constexpr float kCordLevel = 0.45f;
constexpr float kForegroundLevel = 0.85f;
constexpr float kFieldAmplitude = 0.06f;  // low-frequency brightness drift
constexpr int kFieldCell = 8;             // drift grid cell size in pixels
constexpr int kLureOrigin = 2;  // corner marker at rows/cols [2, 7)
constexpr int kLureSide = 5;

inline void fill_ellipse(std::vector<char>& hit, int n, double cy, double cx,
                         double ry, double rx) {
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
  const int y1 = std::min(n - 1, static_cast<int>(std::ceil(cy + ry)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
  const int x1 = std::min(n - 1, static_cast<int>(std::ceil(cx + rx)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dy = (y - cy) / ry;
      const double dx = (x - cx) / rx;
      if (dy * dy + dx * dx <= 1.0)
        hit[static_cast<std::size_t>(y) * n + x] = 1;
    }
}

// Keeps only the 4-connected component containing (sy, sx); the butterfly's
// body always covers that pixel, so the kept region is the whole structure
// minus any stray satellite pixels from rasterization.
inline void keep_component(std::vector<char>& hit, int n, int sy, int sx) {
  std::vector<char> kept(hit.size(), 0);
  std::vector<int> stack;
  const int start = sy * n + sx;
  if (!hit[static_cast<std::size_t>(start)]) return;  // defensive; body covers it
  stack.push_back(start);
  kept[static_cast<std::size_t>(start)] = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const int y = i / n, x = i % n;
    const int near[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
    for (const auto& p : near) {
      if (p[0] < 0 || p[0] >= n || p[1] < 0 || p[1] >= n) continue;
      const int j = p[0] * n + p[1];
      if (hit[static_cast<std::size_t>(j)] && !kept[static_cast<std::size_t>(j)]) {
        kept[static_cast<std::size_t>(j)] = 1;
        stack.push_back(j);
      }
    }
  }
  hit.swap(kept);
}

inline float lure_position(double bx, int n) {
  // Normalized horizontal position of the butterfly center over the range
  // achievable by construction (cord-center jitter plus the in-cord offset).
  const double lo = n / 2.0 - 0.20 * n;
  const double hi = n / 2.0 + 0.20 * n;
  const double t = std::clamp((bx - lo) / (hi - lo), 0.0, 1.0);
  return static_cast<float>(t);
}

inline Sample synthesize_sample(const SyntheticSpec& spec, std::uint64_t seed,
                                std::uint64_t index, const std::string& split,
                                int within_split) {
  Rng rng = Rng::derive(seed, index);
  const int n = spec.n;
  Sample s;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", within_split);
  s.id = split + "_" + buf;
  s.split = split;
  s.image = Tensor(Shape{n, n});
  s.gt = Tensor(Shape{n, n});

  // Geometry: a large, lightly jittered cord ellipse, with the butterfly at
  // a widely jittered position inside it. Because the butterfly's intensity
  // is close to the cord's, its position cannot be read off the cord outline
  // or from a single pixel — position information has to come from shape
  // integration, or from the corner marker below.
  const double cord_cy = n / 2.0 + rng.uniform(-static_cast<float>(n) / 24.0f,
                                               static_cast<float>(n) / 24.0f);
  const double cord_cx = n / 2.0 + rng.uniform(-static_cast<float>(n) / 24.0f,
                                               static_cast<float>(n) / 24.0f);
  const double cord_ry = n * rng.uniform(0.34f, 0.40f);
  const double cord_rx = n * rng.uniform(0.38f, 0.44f);
  const double wing_ry = n * rng.uniform(0.115f, 0.130f);
  const double wing_rx = n * rng.uniform(0.085f, 0.095f);
  const double wing_dx = 1.05 * wing_rx;  // lobe offset from the body axis
  const double body_ry = 0.55 * wing_ry;
  const double body_rx = 0.65 * wing_dx;
  // Offsets keeping the whole butterfly inside the cord: its bounding-box
  // corners stay within the ellipse when (|ox|+half_w) <= 0.78*rx and
  // (|oy|+half_h) <= 0.58*ry, since 0.78^2 + 0.58^2 < 1.
  const double half_w = wing_dx + wing_rx;
  const double half_h = wing_ry;
  const double ax = std::max(0.0, 0.78 * cord_rx - half_w);
  const double ay = std::max(0.0, 0.58 * cord_ry - half_h);
  const double bx = cord_cx + ax * rng.uniform(-1.0f, 1.0f);
  const double by = cord_cy + ay * rng.uniform(-1.0f, 1.0f);

  std::vector<char> cord(static_cast<std::size_t>(n) * n, 0);
  fill_ellipse(cord, n, cord_cy, cord_cx, cord_ry, cord_rx);
  std::vector<char> fg(static_cast<std::size_t>(n) * n, 0);
  fill_ellipse(fg, n, by, bx - wing_dx, wing_ry, wing_rx);
  fill_ellipse(fg, n, by, bx + wing_dx, wing_ry, wing_rx);
  fill_ellipse(fg, n, by, bx, body_ry, body_rx);
  keep_component(fg, n, static_cast<int>(std::lround(by)),
                 static_cast<int>(std::lround(bx)));

  // Texture spots: single-lobe bright ellipses inside the cord, kept clear
  // of the butterfly. Their brightness range straddles the foreground's, so
  // they are brightness lookalikes but shape non-lookalikes.
  std::vector<float> spot_bump(static_cast<std::size_t>(n) * n, 0.0f);
  {
    const int spot_count = 3 + static_cast<int>(rng.next_u64() % 4);  // 3..6
    for (int k = 0; k < spot_count; ++k) {
      const double sry = n * rng.uniform(0.050f, 0.080f);
      const double srx = n * rng.uniform(0.050f, 0.080f);
      const float bump = rng.uniform(0.08f, 0.14f);
      for (int attempt = 0; attempt < 8; ++attempt) {
        const double theta = rng.uniform(0.0f, 6.2831853f);
        const double rad = std::sqrt(rng.uniform(0.0f, 1.0f)) * 0.72;
        const double sx = cord_cx + rad * std::cos(theta) * cord_rx;
        const double sy = cord_cy + rad * std::sin(theta) * cord_ry;
        if (std::abs(sx - bx) < srx + half_w + 2.0 &&
            std::abs(sy - by) < sry + half_h + 2.0)
          continue;  // too close to the butterfly; redraw the position
        std::vector<char> spot(static_cast<std::size_t>(n) * n, 0);
        fill_ellipse(spot, n, sy, sx, sry, srx);
        for (std::size_t i = 0; i < spot.size(); ++i)
          if (spot[i]) spot_bump[i] = std::max(spot_bump[i], bump);
        break;
      }
    }
  }

  // Low-frequency brightness drift: node values on a coarse grid, bilinearly
  // interpolated, shared by every structure. It creates brighter and darker
  // cord patches of roughly butterfly-lobe size, so brightness alone does
  // not localize the foreground.
  const int cells = (n + kFieldCell - 1) / kFieldCell;
  std::vector<float> nodes(static_cast<std::size_t>(cells + 1) * (cells + 1));
  for (auto& v : nodes) v = rng.uniform(-kFieldAmplitude, kFieldAmplitude);
  auto drift = [&](int y, int x) {
    const double gy = static_cast<double>(y) / kFieldCell;
    const double gx = static_cast<double>(x) / kFieldCell;
    const int y0 = static_cast<int>(gy), x0 = static_cast<int>(gx);
    const double fy = gy - y0, fx = gx - x0;
    const std::size_t row = static_cast<std::size_t>(cells + 1);
    const float a = nodes[y0 * row + x0], b = nodes[y0 * row + x0 + 1];
    const float c = nodes[(y0 + 1) * row + x0], d = nodes[(y0 + 1) * row + x0 + 1];
    return static_cast<float>((a * (1 - fx) + b * fx) * (1 - fy) +
                              (c * (1 - fx) + d * fx) * fy);
  };

  // Horizontal position of the rasterized foreground, for the marker: using
  // the actual centroid (rather than the continuous center) keeps the marker
  // an exact monotone function of where the gt ended up on the pixel grid.
  double centroid_x = bx;
  {
    double sum = 0.0, cnt = 0.0;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        if (fg[static_cast<std::size_t>(y) * n + x]) {
          sum += x;
          cnt += 1.0;
        }
    if (cnt > 0.0) centroid_x = sum / cnt;
  }

  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      float v = kBackgroundLevel;
      if (cord[i]) v = kCordLevel + spot_bump[i];
      if (fg[i]) {
        v = kForegroundLevel;
        s.gt[i] = 1.0f;
      }
      v += drift(y, x) + spec.noise_std * rng.normal();
      s.image[i] = std::clamp(v, 0.0f, 1.0f);
    }

  if (spec.spurious_context) {
    // Corner marker: a flat block (no pixel noise) whose brightness blends a
    // deterministic function of the butterfly's horizontal position with an
    // independent random level. At strength 1 it encodes the position
    // exactly; at strength 0 it is pure noise.
    const float informative = 0.15f + 0.80f * lure_position(centroid_x, n);
    const float random_level = 0.15f + 0.80f * rng.uniform(0.0f, 1.0f);
    const float marker = spec.lure_strength * informative +
                         (1.0f - spec.lure_strength) * random_level;
    for (int y = kLureOrigin; y < kLureOrigin + kLureSide; ++y)
      for (int x = kLureOrigin; x < kLureOrigin + kLureSide; ++x)
        s.image[static_cast<std::size_t>(y) * n + x] = marker;
  }
  return s;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec,
                                                   std::uint64_t seed) {
  spec.validate();
  SyntheticDataset out;
  out.train.resize(static_cast<std::size_t>(spec.train_count));
  out.val.resize(static_cast<std::size_t>(spec.val_count));
  const std::size_t total =
      static_cast<std::size_t>(spec.train_count) + static_cast<std::size_t>(spec.val_count);
  parallel_for(total, [&](std::size_t k) {
    if (k < static_cast<std::size_t>(spec.train_count))
      out.train[k] = detail::synthesize_sample(spec, seed, k, "train",
                                               static_cast<int>(k));
    else
      out.val[k - spec.train_count] = detail::synthesize_sample(
          spec, seed, k, "val", static_cast<int>(k - spec.train_count));
  });
  return out;
}

}  // namespace adaug
