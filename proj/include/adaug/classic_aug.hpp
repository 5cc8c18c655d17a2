// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// Conventional augmentations: small rotations, shifts, rescales, additive
// intensity shifts, and elastic deformation. Geometric transforms share a
// single backward-warp helper so the image (bilinear) and the mask
// (nearest-neighbor, stays binary) always see the identical spatial map.

#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "adaug/parallel.hpp"
#include "adaug/rng.hpp"
#include "adaug/tensor.hpp"
#include "adaug/unet.hpp"

namespace adaug {

// Draw ranges for one augmented copy. Values are the half-widths /
// endpoints of the uniform intervals; the elastic pair is the displacement
// scale and the Gaussian smoothing std.
struct AugmentParams {
  float rotation_deg = 4.6f;    // degrees in [-rotation_deg, rotation_deg]
  float shift_frac = 0.03f;     // per-axis fraction in [-shift_frac, shift_frac]
  float scale_lo = 0.98f;
  float scale_hi = 1.02f;
  float channel_shift = 0.17f;  // additive intensity in [-channel_shift, ...]
  float elastic_alpha = 30.0f;
  float elastic_sigma = 4.0f;

  void validate() const {
    if (!(rotation_deg >= 0.0f && rotation_deg <= 180.0f))
      throw std::invalid_argument("augment params: rotation_deg must lie in [0, 180]");
    if (shift_frac < 0.0f)
      throw std::invalid_argument("augment params: shift_frac must be >= 0");
    if (!(scale_lo > 0.0f) || scale_hi < scale_lo)
      throw std::invalid_argument(
          "augment params: need 0 < scale_lo <= scale_hi");
    if (channel_shift < 0.0f)
      throw std::invalid_argument("augment params: channel_shift must be >= 0");
    if (elastic_alpha < 0.0f || !(elastic_sigma > 0.0f))
      throw std::invalid_argument(
          "augment params: elastic_alpha must be >= 0 and elastic_sigma > 0");
  }
};

namespace detail {

// Backward warp: out(y,x) = src sampled at srcpos(y,x). Bilinear with
// out-of-bounds reads as zero.
template <class Fn>
Tensor warp_bilinear(const Tensor& src, Fn&& srcpos) {
  require_rank(src, 2, "warp_bilinear");
  const int h = src.dim(0), w = src.dim(1);
  Tensor out(src.shape());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto [sy, sx] = srcpos(y, x);
      const int y0 = static_cast<int>(std::floor(sy));
      const int x0 = static_cast<int>(std::floor(sx));
      const float fy = sy - static_cast<float>(y0);
      const float fx = sx - static_cast<float>(x0);
      float acc = 0.0f;
      const float wt[4] = {(1.0f - fy) * (1.0f - fx), (1.0f - fy) * fx,
                           fy * (1.0f - fx), fy * fx};
      const int yy[4] = {y0, y0, y0 + 1, y0 + 1};
      const int xx[4] = {x0, x0 + 1, x0, x0 + 1};
      for (int c = 0; c < 4; ++c)
        if (yy[c] >= 0 && yy[c] < h && xx[c] >= 0 && xx[c] < w)
          acc += wt[c] * src[static_cast<std::size_t>(yy[c]) * w + xx[c]];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

// Same spatial map, nearest-neighbor sampling; preserves binarity.
template <class Fn>
Tensor warp_nearest(const Tensor& src, Fn&& srcpos) {
  require_rank(src, 2, "warp_nearest");
  const int h = src.dim(0), w = src.dim(1);
  Tensor out(src.shape());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto [sy, sx] = srcpos(y, x);
      const int ry = static_cast<int>(std::lround(sy));
      const int rx = static_cast<int>(std::lround(sx));
      out[static_cast<std::size_t>(y) * w + x] =
          (ry >= 0 && ry < h && rx >= 0 && rx < w)
              ? src[static_cast<std::size_t>(ry) * w + rx]
              : 0.0f;
    }
  }
  return out;
}

template <class Fn>
TrainItem warp_sample(const TrainItem& s, Fn&& srcpos) {
  return TrainItem{warp_bilinear(s.image, srcpos), warp_nearest(s.gt, srcpos)};
}

// 1D Gaussian taps, truncated at 3 sigma, normalized to sum 1.
inline std::vector<float> gaussian_taps(float sigma) {
  const int radius = static_cast<int>(std::floor(3.0f * sigma));
  std::vector<float> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (static_cast<double>(i) * i) /
                              (static_cast<double>(sigma) * sigma));
    k[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
    sum += v;
  }
  for (float& v : k) v = static_cast<float>(v / sum);
  return k;
}

// Separable smoothing with zero padding beyond the border. The separable
// passes realize convolution with the normalized 2D product kernel, so the
// output magnitude never exceeds the input's maximum magnitude.
inline Tensor gaussian_smooth(const Tensor& field, float sigma) {
  const int h = field.dim(0), w = field.dim(1);
  const std::vector<float> k = gaussian_taps(sigma);
  const int radius = (static_cast<int>(k.size()) - 1) / 2;
  Tensor rows(field.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        const int xs = x + t;
        if (xs >= 0 && xs < w)
          acc += static_cast<double>(k[static_cast<std::size_t>(t + radius)]) *
                 field[static_cast<std::size_t>(y) * w + xs];
      }
      rows[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
    }
  Tensor out(field.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        const int ys = y + t;
        if (ys >= 0 && ys < h)
          acc += static_cast<double>(k[static_cast<std::size_t>(t + radius)]) *
                 rows[static_cast<std::size_t>(ys) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
    }
  return out;
}

}  // namespace detail

// Rotation about the image center; positive degrees turn the content
// counter-clockwise. Bilinear image, nearest mask, zero fill.
inline TrainItem rotate(const TrainItem& s, float degrees) {
  if (std::fabs(degrees) > 180.0f)
    throw std::invalid_argument("rotate: |degrees| must be <= 180");
  const int n = s.image.dim(0);
  const float rad = degrees * 3.14159265358979323846f / 180.0f;
  const float c = std::cos(rad), sn = std::sin(rad);
  const float ctr = 0.5f * static_cast<float>(n - 1);
  auto srcpos = [c, sn, ctr](int y, int x) {
    const float dy = static_cast<float>(y) - ctr;
    const float dx = static_cast<float>(x) - ctr;
    return std::pair<float, float>{ctr + c * dy + sn * dx, ctr - sn * dy + c * dx};
  };
  return detail::warp_sample(s, srcpos);
}

// Integer translation by round(frac * n) pixels per axis (columns move by
// dx_frac, rows by dy_frac), zero fill.
inline TrainItem shift(const TrainItem& s, float dx_frac, float dy_frac) {
  if (std::fabs(dx_frac) > 1.0f || std::fabs(dy_frac) > 1.0f)
    throw std::invalid_argument("shift: |fraction| must be <= 1");
  const int n = s.image.dim(0);
  const int dx = static_cast<int>(std::lround(dx_frac * static_cast<float>(n)));
  const int dy = static_cast<int>(std::lround(dy_frac * static_cast<float>(n)));
  auto srcpos = [dx, dy](int y, int x) {
    return std::pair<float, float>{static_cast<float>(y - dy),
                                   static_cast<float>(x - dx)};
  };
  return detail::warp_sample(s, srcpos);
}

// Center-anchored rescale; content grows by `factor`, the canvas stays n×n
// (implicit crop/pad through the backward map), zero fill.
inline TrainItem scale(const TrainItem& s, float factor) {
  if (!(factor > 0.0f)) throw std::invalid_argument("scale: factor must be > 0");
  const int n = s.image.dim(0);
  const float ctr = 0.5f * static_cast<float>(n - 1);
  const float inv = 1.0f / factor;
  auto srcpos = [ctr, inv](int y, int x) {
    return std::pair<float, float>{ctr + (static_cast<float>(y) - ctr) * inv,
                                   ctr + (static_cast<float>(x) - ctr) * inv};
  };
  return detail::warp_sample(s, srcpos);
}

// Additive intensity shift on the image only, clamped back to [0,1].
inline TrainItem channel_shift(const TrainItem& s, float delta) {
  TrainItem out{Tensor(s.image.shape()), s.gt.clone()};
  for (std::size_t i = 0; i < s.image.size(); ++i)
    out.image[i] = std::min(1.0f, std::max(0.0f, s.image[i] + delta));
  return out;
}

// Random smooth warp: per-pixel displacement fields drawn from U(-1,1)
// (dx field first, then dy, row-major), Gaussian-smoothed and scaled by
// alpha. Backward warp as in the other geometric transforms.
inline TrainItem elastic_deform(const TrainItem& s, float alpha, float sigma,
                                Rng& rng) {
  if (alpha < 0.0f) throw std::invalid_argument("elastic_deform: alpha must be >= 0");
  if (!(sigma > 0.0f)) throw std::invalid_argument("elastic_deform: sigma must be > 0");
  const int n = s.image.dim(0);
  Tensor dx(Shape{n, n}), dy(Shape{n, n});
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = rng.uniform(-1.0f, 1.0f);
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] = rng.uniform(-1.0f, 1.0f);
  if (alpha == 0.0f) {
    // Zero displacement: the warp below would already be the identity, but
    // skip the smoothing work.
    return TrainItem{s.image.clone(), s.gt.clone()};
  }
  dx = detail::gaussian_smooth(dx, sigma);
  dy = detail::gaussian_smooth(dy, sigma);
  auto srcpos = [&dx, &dy, alpha, n](int y, int x) {
    const std::size_t i = static_cast<std::size_t>(y) * n + x;
    return std::pair<float, float>{static_cast<float>(y) + alpha * dy[i],
                                   static_cast<float>(x) + alpha * dx[i]};
  };
  return detail::warp_sample(s, srcpos);
}

// One augmented copy per original, all five transforms composed in a fixed
// order: rotate → shift → scale → elastic → channel shift. Parameters are
// drawn independently per sample; each sample gets its own stream seeded
// from the caller's generator so the parallel map stays deterministic.
inline std::vector<TrainItem> classic_augmentations(const std::vector<TrainItem>& data,
                                                    const AugmentParams& params,
                                                    Rng& rng) {
  std::vector<std::uint64_t> seeds(data.size());
  for (auto& s : seeds) s = rng.next_u64();
  std::vector<TrainItem> out(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    Rng local(seeds[i]);
    const float deg = local.uniform(-params.rotation_deg, params.rotation_deg);
    const float dxf = local.uniform(-params.shift_frac, params.shift_frac);
    const float dyf = local.uniform(-params.shift_frac, params.shift_frac);
    const float fac = local.uniform(params.scale_lo, params.scale_hi);
    const float delta = local.uniform(-params.channel_shift, params.channel_shift);
    TrainItem s = rotate(data[i], deg);
    s = shift(s, dxf, dyf);
    s = scale(s, fac);
    s = elastic_deform(s, params.elastic_alpha, params.elastic_sigma, local);
    out[i] = channel_shift(s, delta);
  });
  return out;
}

}  // namespace adaug
