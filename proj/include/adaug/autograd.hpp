// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation over the small op set a
// U-Net needs. Ops run eagerly; when a Tape is supplied they append a
// backward closure, and Tape::backward replays the closures in reverse
// recording order. The ReLU backward rule is chosen per backward pass,
// not per op, so one recorded forward pass can be differentiated under
// the standard rule or under the deconvnet/guided variants.

#pragma once

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "adaug/rng.hpp"
#include "adaug/tensor.hpp"

namespace adaug {

enum class ReluBackwardMode { kStandard, kDeconv, kGuided };

inline const char* to_string(ReluBackwardMode m) {
  switch (m) {
    case ReluBackwardMode::kStandard: return "standard";
    case ReluBackwardMode::kDeconv: return "deconv";
    case ReluBackwardMode::kGuided: return "guided";
  }
  return "?";
}

// Ordered record of executed primitives. One tape per forward pass, one
// backward replay per tape.
class Tape {
 public:
  using BackwardFn = std::function<void(ReluBackwardMode)>;

  void record(BackwardFn fn) { records_.push_back(std::move(fn)); }

  std::size_t op_count() const { return records_.size(); }
  bool consumed() const { return consumed_; }

  // Layer-activation bookmarks, kept across backward so capture handles can
  // read activation gradients afterwards.
  void mark(const std::string& layer_id, const Tensor& activation) {
    marks_[layer_id] = activation;
  }
  const std::map<std::string, Tensor>& marks() const { return marks_; }

  // Populates grad slots of every tensor reachable from scalar_output with
  // d(scalar)/d(tensor) under the given ReLU rule, then consumes the tape.
  void backward(Tensor scalar_output,
                ReluBackwardMode mode = ReluBackwardMode::kStandard) {
    if (consumed_) throw std::runtime_error("backward: tape already consumed");
    if (scalar_output.size() != 1)
      throw std::invalid_argument("backward: target must be a scalar, got shape " +
                                  shape_str(scalar_output.shape()));
    if (records_.empty())
      throw std::runtime_error("backward: tape holds no recorded operations");
    scalar_output.grad()[0] = 1.0f;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)(mode);
    consumed_ = true;
    records_.clear();
  }

 private:
  std::vector<BackwardFn> records_;
  std::map<std::string, Tensor> marks_;
  bool consumed_ = false;
};

struct CaptureHandle {
  std::string layer_id;
  Tensor activation;  // grad slot carries the activation gradient after backward
};

inline CaptureHandle register_capture(const Tape& tape, const std::string& layer_id) {
  auto it = tape.marks().find(layer_id);
  if (it == tape.marks().end()) {
    std::string valid;
    for (const auto& [k, v] : tape.marks()) {
      if (!valid.empty()) valid += ", ";
      valid += k;
    }
    throw std::invalid_argument("register_capture: unknown layer '" + layer_id +
                                "'; valid layers: " + valid);
  }
  return CaptureHandle{layer_id, it->second};
}

namespace detail {

inline void sgemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                  const float* a, int lda, const float* b, int ldb, float beta,
                  float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
              beta, c, ldc);
}

// col layout: rows indexed by (ci, ki, kj), columns by (y, x) of the output.
inline void im2col(const float* src, int ci, int h, int w, int k, int pad,
                   int ho, int wo, float* col) {
  for (int c = 0; c < ci; ++c) {
    const float* plane = src + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        float* row = col + ((static_cast<std::size_t>(c) * k + ki) * k + kj) *
                               (static_cast<std::size_t>(ho) * wo);
        for (int y = 0; y < ho; ++y) {
          const int sy = y + ki - pad;
          float* dst = row + static_cast<std::size_t>(y) * wo;
          if (sy < 0 || sy >= h) {
            std::memset(dst, 0, sizeof(float) * wo);
            continue;
          }
          const int sx0 = kj - pad;              // source x for output x=0
          int x_lo = std::max(0, -sx0);          // first in-bounds output x
          int x_hi = std::min(wo, w - sx0);      // one past last in-bounds x
          if (x_lo > 0) std::memset(dst, 0, sizeof(float) * x_lo);
          if (x_hi < wo)
            std::memset(dst + std::max(x_lo, x_hi), 0,
                        sizeof(float) * (wo - std::max(x_lo, x_hi)));
          if (x_hi > x_lo)
            std::memcpy(dst + x_lo, plane + static_cast<std::size_t>(sy) * w + sx0 + x_lo,
                        sizeof(float) * (x_hi - x_lo));
        }
      }
    }
  }
}

inline void col2im_acc(const float* col, int ci, int h, int w, int k, int pad,
                       int ho, int wo, float* dst) {
  for (int c = 0; c < ci; ++c) {
    float* plane = dst + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const float* row = col + ((static_cast<std::size_t>(c) * k + ki) * k + kj) *
                                     (static_cast<std::size_t>(ho) * wo);
        for (int y = 0; y < ho; ++y) {
          const int sy = y + ki - pad;
          if (sy < 0 || sy >= h) continue;
          const int sx0 = kj - pad;
          const int x_lo = std::max(0, -sx0);
          const int x_hi = std::min(wo, w - sx0);
          const float* srow = row + static_cast<std::size_t>(y) * wo;
          float* drow = plane + static_cast<std::size_t>(sy) * w + sx0;
          for (int x = x_lo; x < x_hi; ++x) drow[x] += srow[x];
        }
      }
    }
  }
}

}  // namespace detail

// Cross-correlation with zero padding over [B,Cin,H,W]; weights [Cout,Cin,k,k],
// bias [Cout]. Registers gradients for input, weights, and bias.
inline Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& weights,
                     const Tensor& bias, int padding) {
  require_rank(input, 4, "conv2d input");
  require_rank(weights, 4, "conv2d weights");
  require_rank(bias, 1, "conv2d bias");
  const int b_n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int co = weights.dim(0), k = weights.dim(2);
  if (weights.dim(1) != ci)
    throw std::invalid_argument("conv2d: weight input-channel dim " +
                                std::to_string(weights.dim(1)) +
                                " does not match input channel dim " + std::to_string(ci));
  if (weights.dim(3) != k)
    throw std::invalid_argument("conv2d: kernel must be square, got " +
                                std::to_string(k) + "x" + std::to_string(weights.dim(3)));
  if (k % 2 == 0) throw std::invalid_argument("conv2d: kernel size must be odd, got " +
                                              std::to_string(k));
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  if (bias.dim(0) != co)
    throw std::invalid_argument("conv2d: bias dim " + std::to_string(bias.dim(0)) +
                                " does not match output channel dim " + std::to_string(co));
  const int ho = h + 2 * padding - k + 1;
  const int wo = w + 2 * padding - k + 1;
  if (ho <= 0 || wo <= 0)
    throw std::invalid_argument("conv2d: kernel " + std::to_string(k) +
                                " exceeds padded input " + shape_str(input.shape()));

  const int kk = ci * k * k;
  const std::size_t npix = static_cast<std::size_t>(ho) * wo;
  const bool identity_col = (k == 1 && padding == 0);

  Tensor out(Shape{b_n, co, ho, wo});
  // The col buffer is kept for the backward pass; for 1x1 kernels the input
  // itself already has col layout.
  std::shared_ptr<std::vector<float>> col_all;
  if (!identity_col)
    col_all = std::make_shared<std::vector<float>>(static_cast<std::size_t>(b_n) * kk * npix);

  for (int b = 0; b < b_n; ++b) {
    const float* in_b = input.data() + static_cast<std::size_t>(b) * ci * h * w;
    const float* col_b;
    if (identity_col) {
      col_b = in_b;
    } else {
      float* cb = col_all->data() + static_cast<std::size_t>(b) * kk * npix;
      detail::im2col(in_b, ci, h, w, k, padding, ho, wo, cb);
      col_b = cb;
    }
    float* out_b = out.data() + static_cast<std::size_t>(b) * co * npix;
    detail::sgemm(false, false, co, static_cast<int>(npix), kk, 1.0f, weights.data(),
                  kk, col_b, static_cast<int>(npix), 0.0f, out_b, static_cast<int>(npix));
    for (int c = 0; c < co; ++c) {
      const float bv = bias[static_cast<std::size_t>(c)];
      float* row = out_b + static_cast<std::size_t>(c) * npix;
      for (std::size_t i = 0; i < npix; ++i) row[i] += bv;
    }
  }

  if (tape) {
    tape->record([input, weights, bias, out, col_all, padding](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const int b_n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
      const int co = weights.dim(0), k = weights.dim(2);
      const int ho = out.dim(2), wo = out.dim(3);
      const int kk = ci * k * k;
      const std::size_t npix = static_cast<std::size_t>(ho) * wo;
      const bool identity_col = (k == 1 && padding == 0);
      const float* g = out.grad();

      float* gb = bias.grad();
      for (int c = 0; c < co; ++c) {
        double acc = 0.0;
        for (int b = 0; b < b_n; ++b) {
          const float* row = g + (static_cast<std::size_t>(b) * co + c) * npix;
          for (std::size_t i = 0; i < npix; ++i) acc += row[i];
        }
        gb[c] += static_cast<float>(acc);
      }

      float* gw = weights.grad();
      float* gi = input.grad();
      std::vector<float> dcol(static_cast<std::size_t>(kk) * npix);
      for (int b = 0; b < b_n; ++b) {
        const float* g_b = g + static_cast<std::size_t>(b) * co * npix;
        const float* col_b = identity_col
                                 ? input.data() + static_cast<std::size_t>(b) * ci * h * w
                                 : col_all->data() + static_cast<std::size_t>(b) * kk * npix;
        // dW += dOut_b * col_b^T
        detail::sgemm(false, true, co, kk, static_cast<int>(npix), 1.0f, g_b,
                      static_cast<int>(npix), col_b, static_cast<int>(npix), 1.0f, gw, kk);
        // dcol = W^T * dOut_b, scattered back through the padding pattern
        detail::sgemm(true, false, kk, static_cast<int>(npix), co, 1.0f, weights.data(),
                      kk, g_b, static_cast<int>(npix), 0.0f, dcol.data(),
                      static_cast<int>(npix));
        float* gi_b = gi + static_cast<std::size_t>(b) * ci * h * w;
        detail::col2im_acc(dcol.data(), ci, h, w, k, padding, ho, wo, gi_b);
      }
    });
  }
  return out;
}

// Forward max(0, x) in every mode. The backward rule is mode-dependent:
// standard gates on the forward input, deconv rectifies the upstream
// gradient, guided requires both to be positive.
inline Tensor relu(Tape* tape, const Tensor& input) {
  Tensor out(input.shape());
  const float* x = input.data();
  float* y = out.data();
  for (std::size_t i = 0; i < input.size(); ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
  if (tape) {
    tape->record([input, out](ReluBackwardMode mode) mutable {
      if (!out.grad_allocated()) return;
      const float* g = out.grad();
      const float* x = input.data();
      float* gi = input.grad();
      const std::size_t n = input.size();
      switch (mode) {
        case ReluBackwardMode::kStandard:
          for (std::size_t i = 0; i < n; ++i)
            if (x[i] > 0.0f) gi[i] += g[i];
          break;
        case ReluBackwardMode::kDeconv:
          for (std::size_t i = 0; i < n; ++i)
            if (g[i] > 0.0f) gi[i] += g[i];
          break;
        case ReluBackwardMode::kGuided:
          for (std::size_t i = 0; i < n; ++i)
            if (x[i] > 0.0f && g[i] > 0.0f) gi[i] += g[i];
          break;
      }
    });
  }
  return out;
}

// 2x2 non-overlapping max. Gradient routes to each window's argmax; ties go
// to the first element in row-major order.
inline Tensor maxpool2(Tape* tape, const Tensor& input) {
  require_rank(input, 4, "maxpool2");
  const int b_n = input.dim(0), c_n = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0)
    throw std::invalid_argument("maxpool2: spatial extents must be even, got " +
                                shape_str(input.shape()));
  const int ho = h / 2, wo = w / 2;
  Tensor out(Shape{b_n, c_n, ho, wo});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.size());
  const float* x = input.data();
  float* y = out.data();
  std::size_t oi = 0;
  for (int bc = 0; bc < b_n * c_n; ++bc) {
    const float* plane = x + static_cast<std::size_t>(bc) * h * w;
    for (int py = 0; py < ho; ++py) {
      for (int px = 0; px < wo; ++px, ++oi) {
        std::size_t base = static_cast<std::size_t>(2 * py) * w + 2 * px;
        std::size_t best = base;
        float bv = plane[base];
        const std::size_t cand[3] = {base + 1, base + w, base + w + 1};
        for (std::size_t c : cand) {
          if (plane[c] > bv) {
            bv = plane[c];
            best = c;
          }
        }
        y[oi] = bv;
        (*argmax)[oi] = static_cast<std::uint32_t>(static_cast<std::size_t>(bc) * h * w + best);
      }
    }
  }
  if (tape) {
    tape->record([input, out, argmax](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const float* g = out.grad();
      float* gi = input.grad();
      for (std::size_t i = 0; i < out.size(); ++i) gi[(*argmax)[i]] += g[i];
    });
  }
  return out;
}

// Nearest-neighbor 2x upsampling; backward sums the four upstream values per
// source pixel.
inline Tensor upsample_nearest2(Tape* tape, const Tensor& input) {
  require_rank(input, 4, "upsample_nearest2");
  const int b_n = input.dim(0), c_n = input.dim(1), h = input.dim(2), w = input.dim(3);
  Tensor out(Shape{b_n, c_n, 2 * h, 2 * w});
  const float* x = input.data();
  float* y = out.data();
  for (int bc = 0; bc < b_n * c_n; ++bc) {
    const float* sp = x + static_cast<std::size_t>(bc) * h * w;
    float* dp = y + static_cast<std::size_t>(bc) * 4 * h * w;
    for (int sy = 0; sy < h; ++sy) {
      float* row0 = dp + static_cast<std::size_t>(2 * sy) * 2 * w;
      float* row1 = row0 + 2 * w;
      for (int sx = 0; sx < w; ++sx) {
        const float v = sp[static_cast<std::size_t>(sy) * w + sx];
        row0[2 * sx] = v;
        row0[2 * sx + 1] = v;
        row1[2 * sx] = v;
        row1[2 * sx + 1] = v;
      }
    }
  }
  if (tape) {
    tape->record([input, out](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const int h = input.dim(2), w = input.dim(3);
      const int bc_n = input.dim(0) * input.dim(1);
      const float* g = out.grad();
      float* gi = input.grad();
      for (int bc = 0; bc < bc_n; ++bc) {
        const float* gp = g + static_cast<std::size_t>(bc) * 4 * h * w;
        float* ip = gi + static_cast<std::size_t>(bc) * h * w;
        for (int sy = 0; sy < h; ++sy) {
          const float* row0 = gp + static_cast<std::size_t>(2 * sy) * 2 * w;
          const float* row1 = row0 + 2 * w;
          for (int sx = 0; sx < w; ++sx)
            ip[static_cast<std::size_t>(sy) * w + sx] +=
                row0[2 * sx] + row0[2 * sx + 1] + row1[2 * sx] + row1[2 * sx + 1];
        }
      }
    });
  }
  return out;
}

// Per-channel batch normalization over [B,C,H,W]. Training mode normalizes
// by batch statistics (epsilon inside the square root) and folds them into
// the running buffers as running <- (1-momentum)*running + momentum*batch;
// eval mode normalizes by the running statistics. Both modes have a full
// backward. A degenerate batch (zero variance) proceeds through epsilon.
inline Tensor batchnorm(Tape* tape, const Tensor& input, const Tensor& gamma,
                        const Tensor& beta, Tensor& running_mean, Tensor& running_var,
                        float momentum, bool training, float eps = 1e-5f) {
  require_rank(input, 4, "batchnorm");
  const int b_n = input.dim(0), c_n = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (gamma.dim(0) != c_n || beta.dim(0) != c_n || running_mean.dim(0) != c_n ||
      running_var.dim(0) != c_n)
    throw std::invalid_argument("batchnorm: channel parameter dims must equal " +
                                std::to_string(c_n));
  if (momentum < 0.0f || momentum > 1.0f)
    throw std::invalid_argument("batchnorm: momentum must lie in [0,1]");
  const std::size_t m = static_cast<std::size_t>(b_n) * h * w;
  if (training && m < 2)
    throw std::invalid_argument("batchnorm: training mode needs at least 2 values per channel");

  Tensor out(input.shape());
  auto xhat = std::make_shared<std::vector<float>>(input.size());
  auto inv_std = std::make_shared<std::vector<float>>(c_n);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const float* x = input.data();
  float* y = out.data();

  for (int c = 0; c < c_n; ++c) {
    float mean_c, inv_c;
    if (training) {
      double sum = 0.0;
      for (int b = 0; b < b_n; ++b) {
        const float* p = x + (static_cast<std::size_t>(b) * c_n + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      }
      mean_c = static_cast<float>(sum / static_cast<double>(m));
      double ss = 0.0;
      for (int b = 0; b < b_n; ++b) {
        const float* p = x + (static_cast<std::size_t>(b) * c_n + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = static_cast<double>(p[i]) - mean_c;
          ss += d * d;
        }
      }
      const float var_c = static_cast<float>(ss / static_cast<double>(m));
      inv_c = 1.0f / std::sqrt(var_c + eps);
      running_mean[c] = (1.0f - momentum) * running_mean[c] + momentum * mean_c;
      running_var[c] = (1.0f - momentum) * running_var[c] + momentum * var_c;
    } else {
      mean_c = running_mean[c];
      inv_c = 1.0f / std::sqrt(running_var[c] + eps);
    }
    (*inv_std)[c] = inv_c;
    const float g_c = gamma[c], b_c = beta[c];
    for (int b = 0; b < b_n; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * c_n + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const float xh = (x[off + i] - mean_c) * inv_c;
        (*xhat)[off + i] = xh;
        y[off + i] = g_c * xh + b_c;
      }
    }
  }

  if (tape) {
    tape->record([input, gamma, beta, out, xhat, inv_std, training](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const int b_n = input.dim(0), c_n = input.dim(1), h = input.dim(2), w = input.dim(3);
      const std::size_t plane = static_cast<std::size_t>(h) * w;
      const std::size_t m = static_cast<std::size_t>(b_n) * plane;
      const float* g = out.grad();
      float* gi = input.grad();
      float* gg = gamma.grad();
      float* gb = beta.grad();
      for (int c = 0; c < c_n; ++c) {
        double s1 = 0.0, s2 = 0.0;  // sum g, sum g*xhat
        for (int b = 0; b < b_n; ++b) {
          const std::size_t off = (static_cast<std::size_t>(b) * c_n + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            s1 += g[off + i];
            s2 += static_cast<double>(g[off + i]) * (*xhat)[off + i];
          }
        }
        gg[c] += static_cast<float>(s2);
        gb[c] += static_cast<float>(s1);
        const float inv_c = (*inv_std)[c];
        const float gam = gamma[c];
        if (training) {
          const float k1 = static_cast<float>(s1 / static_cast<double>(m));
          const float k2 = static_cast<float>(s2 / static_cast<double>(m));
          for (int b = 0; b < b_n; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * c_n + c) * plane;
            for (std::size_t i = 0; i < plane; ++i)
              gi[off + i] += gam * inv_c * (g[off + i] - k1 - (*xhat)[off + i] * k2);
          }
        } else {
          for (int b = 0; b < b_n; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * c_n + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) gi[off + i] += gam * inv_c * g[off + i];
          }
        }
      }
    });
  }
  return out;
}

// Inverted dropout: survivors are scaled by 1/(1-rate) so eval mode is the
// identity. Eval mode (or rate 0) returns the input handle unchanged.
inline Tensor dropout(Tape* tape, const Tensor& input, float rate, bool training,
                      Rng& rng) {
  if (rate < 0.0f || rate >= 1.0f)
    throw std::invalid_argument("dropout: rate must lie in [0,1), got " +
                                std::to_string(rate));
  if (!training || rate == 0.0f) return input;
  Tensor out(input.shape());
  auto keep = std::make_shared<std::vector<std::uint8_t>>(input.size());
  const float scale = 1.0f / (1.0f - rate);
  const float* x = input.data();
  float* y = out.data();
  for (std::size_t i = 0; i < input.size(); ++i) {
    const bool k = rng.uniform() >= rate;
    (*keep)[i] = k;
    y[i] = k ? x[i] * scale : 0.0f;
  }
  if (tape) {
    tape->record([input, out, keep, scale](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const float* g = out.grad();
      float* gi = input.grad();
      for (std::size_t i = 0; i < input.size(); ++i)
        if ((*keep)[i]) gi[i] += g[i] * scale;
    });
  }
  return out;
}

inline Tensor sigmoid(Tape* tape, const Tensor& input) {
  Tensor out(input.shape());
  const float* x = input.data();
  float* y = out.data();
  for (std::size_t i = 0; i < input.size(); ++i) {
    const float v = x[i];
    if (v >= 0.0f) {
      y[i] = 1.0f / (1.0f + std::exp(-v));
    } else {
      const float e = std::exp(v);
      y[i] = e / (1.0f + e);
    }
  }
  if (tape) {
    tape->record([input, out](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const float* g = out.grad();
      const float* s = out.data();
      float* gi = input.grad();
      for (std::size_t i = 0; i < input.size(); ++i) gi[i] += g[i] * s[i] * (1.0f - s[i]);
    });
  }
  return out;
}

inline Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  if (tape) {
    tape->record([a, b, out](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const float* g = out.grad();
      float* ga = a.grad();
      float* gb = b.grad();
      for (std::size_t i = 0; i < a.size(); ++i) {
        ga[i] += g[i];
        gb[i] += g[i];
      }
    });
  }
  return out;
}

inline Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  if (tape) {
    tape->record([a, b, out](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const float* g = out.grad();
      float* ga = a.grad();
      float* gb = b.grad();
      for (std::size_t i = 0; i < a.size(); ++i) {
        ga[i] += g[i] * b[i];
        gb[i] += g[i] * a[i];
      }
    });
  }
  return out;
}

inline Tensor scale(Tape* tape, const Tensor& a, float factor) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  if (tape) {
    tape->record([a, out, factor](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const float* g = out.grad();
      float* ga = a.grad();
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i] * factor;
    });
  }
  return out;
}

// Concatenate along the channel axis of [B,C,H,W] tensors.
inline Tensor concat_channels(Tape* tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 4, "concat_channels");
  require_rank(b, 4, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw std::invalid_argument("concat_channels: incompatible shapes " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int bn = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const std::size_t plane = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
  Tensor out(Shape{bn, ca + cb, a.dim(2), a.dim(3)});
  for (int bi = 0; bi < bn; ++bi) {
    std::memcpy(out.data() + static_cast<std::size_t>(bi) * (ca + cb) * plane,
                a.data() + static_cast<std::size_t>(bi) * ca * plane,
                sizeof(float) * ca * plane);
    std::memcpy(out.data() + (static_cast<std::size_t>(bi) * (ca + cb) + ca) * plane,
                b.data() + static_cast<std::size_t>(bi) * cb * plane,
                sizeof(float) * cb * plane);
  }
  if (tape) {
    tape->record([a, b, out](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const int bn = a.dim(0), ca = a.dim(1), cb = b.dim(1);
      const std::size_t plane = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
      const float* g = out.grad();
      float* ga = a.grad();
      float* gb = b.grad();
      for (int bi = 0; bi < bn; ++bi) {
        const float* ga_src = g + static_cast<std::size_t>(bi) * (ca + cb) * plane;
        const float* gb_src = ga_src + static_cast<std::size_t>(ca) * plane;
        float* ga_dst = ga + static_cast<std::size_t>(bi) * ca * plane;
        float* gb_dst = gb + static_cast<std::size_t>(bi) * cb * plane;
        for (std::size_t i = 0; i < ca * plane; ++i) ga_dst[i] += ga_src[i];
        for (std::size_t i = 0; i < cb * plane; ++i) gb_dst[i] += gb_src[i];
      }
    });
  }
  return out;
}

inline Tensor sum_all(Tape* tape, const Tensor& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  if (tape) {
    tape->record([a, out](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const float g = out.grad()[0];
      float* ga = a.grad();
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g;
    });
  }
  return out;
}

// Sum of the elements selected by a 0/1 mask of equal length.
inline Tensor masked_sum(Tape* tape, const Tensor& a,
                         std::shared_ptr<const std::vector<std::uint8_t>> sel) {
  if (!sel || sel->size() != a.size())
    throw std::invalid_argument("masked_sum: selection length does not match tensor");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if ((*sel)[i]) acc += a[i];
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  if (tape) {
    tape->record([a, out, sel](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const float g = out.grad()[0];
      float* ga = a.grad();
      for (std::size_t i = 0; i < a.size(); ++i)
        if ((*sel)[i]) ga[i] += g;
    });
  }
  return out;
}

}  // namespace adaug
