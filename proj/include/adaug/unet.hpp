// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// U-Net assembly on top of the autograd primitives: three (configurable)
// downsample stages, a bottleneck, mirrored upsample stages with skip
// concatenation, a 1x1 projection head, and sigmoid output. Every
// convolution is followed by batchnorm -> relu -> dropout. Training is
// pixelwise binary cross-entropy under Adam.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaug/autograd.hpp"
#include "adaug/rng.hpp"
#include "adaug/tensor.hpp"

namespace adaug {

struct UNetConfig {
  int n = 64;              // square input extent in pixels
  int base_channels = 8;   // encoder stage 0 width; doubles per stage
  int kernel = 3;
  int depth = 3;           // number of downsample / upsample stages
  float dropout_rate = 0.5f;
  float bn_momentum = 0.4f;

  void validate() const {
    if (depth < 1) throw std::invalid_argument("UNetConfig: depth must be >= 1");
    if (base_channels < 1)
      throw std::invalid_argument("UNetConfig: base_channels must be >= 1");
    if (kernel < 1 || kernel % 2 == 0)
      throw std::invalid_argument("UNetConfig: kernel must be odd and positive");
    const int stride = 1 << depth;
    if (n <= 0 || n % stride != 0)
      throw std::invalid_argument("UNetConfig: n = " + std::to_string(n) +
                                  " is not divisible by 2^depth = " +
                                  std::to_string(stride));
    if (dropout_rate < 0.0f || dropout_rate >= 1.0f)
      throw std::invalid_argument("UNetConfig: dropout_rate must lie in [0,1)");
    if (bn_momentum < 0.0f || bn_momentum > 1.0f)
      throw std::invalid_argument("UNetConfig: bn_momentum must lie in [0,1]");
  }
};

// One conv unit's tensor names: <unit>/w, <unit>/b, <unit>/bn_g, <unit>/bn_b
// plus non-trainable running stats <unit>/bn_rm, <unit>/bn_rv.
struct ConvUnitSpec {
  std::string name;
  int in_channels;
  int out_channels;
  int kernel;  // spatial kernel; 1 for the projection head
};

// Conv-unit schedule implied by a config, in execution order. This is the
// single source of truth for architecture shape; builders, forward, and the
// checkpoint round-trip all iterate it.
inline std::vector<ConvUnitSpec> unet_units(const UNetConfig& cfg) {
  cfg.validate();
  std::vector<ConvUnitSpec> units;
  const int c = cfg.base_channels;
  for (int d = 0; d < cfg.depth; ++d) {
    const int in_ch = d == 0 ? 1 : c << (d - 1);
    const int out_ch = c << d;
    units.push_back({"enc" + std::to_string(d) + "a", in_ch, out_ch, cfg.kernel});
    units.push_back({"enc" + std::to_string(d) + "b", out_ch, out_ch, cfg.kernel});
  }
  const int bot_in = c << (cfg.depth - 1);
  const int bot_out = c << cfg.depth;
  units.push_back({"bot_a", bot_in, bot_out, cfg.kernel});
  units.push_back({"bot_b", bot_out, bot_out, cfg.kernel});
  for (int d = cfg.depth - 1; d >= 0; --d) {
    const int skip_ch = c << d;
    const int up_ch = c << (d + 1);
    units.push_back(
        {"dec" + std::to_string(d) + "a", up_ch + skip_ch, skip_ch, cfg.kernel});
    units.push_back({"dec" + std::to_string(d) + "b", skip_ch, skip_ch, cfg.kernel});
  }
  units.push_back({"out", c, 1, 1});
  return units;
}

struct ModelParams {
  UNetConfig config;
  std::map<std::string, Tensor> tensors;
  std::vector<std::string> trainable;  // canonical update order
  std::vector<std::string> all_names;  // trainable + running stats

  Tensor& at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw std::invalid_argument("ModelParams: no tensor named '" + name + "'");
    return it->second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw std::invalid_argument("ModelParams: no tensor named '" + name + "'");
    return it->second;
  }

  void drop_grads() {
    for (const auto& name : trainable) at(name).drop_grad();
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& name : trainable) n += at(name).size();
    return n;
  }

  bool all_finite() const {
    for (const auto& [name, t] : tensors)
      if (!t.all_finite()) return false;
    return true;
  }
};

// He-style initialization: conv weights ~ N(0, sqrt(2/fan_in)), biases 0,
// batchnorm gamma 1 / beta 0, running mean 0 / variance 1.
inline ModelParams build_unet(const UNetConfig& cfg, Rng& rng) {
  ModelParams params;
  params.config = cfg;
  for (const ConvUnitSpec& u : unet_units(cfg)) {
    Tensor w(Shape{u.out_channels, u.in_channels, u.kernel, u.kernel});
    const double stddev =
        std::sqrt(2.0 / (static_cast<double>(u.in_channels) * u.kernel * u.kernel));
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = static_cast<float>(rng.normal(0.0, stddev));
    params.tensors[u.name + "/w"] = w;
    params.tensors[u.name + "/b"] = Tensor(Shape{u.out_channels});
    params.trainable.push_back(u.name + "/w");
    params.trainable.push_back(u.name + "/b");
    params.all_names.push_back(u.name + "/w");
    params.all_names.push_back(u.name + "/b");
    if (u.name != "out") {  // projection head has no batchnorm
      params.tensors[u.name + "/bn_g"] = Tensor(Shape{u.out_channels}, 1.0f);
      params.tensors[u.name + "/bn_b"] = Tensor(Shape{u.out_channels});
      params.tensors[u.name + "/bn_rm"] = Tensor(Shape{u.out_channels});
      params.tensors[u.name + "/bn_rv"] = Tensor(Shape{u.out_channels}, 1.0f);
      params.trainable.push_back(u.name + "/bn_g");
      params.trainable.push_back(u.name + "/bn_b");
      params.all_names.push_back(u.name + "/bn_g");
      params.all_names.push_back(u.name + "/bn_b");
      params.all_names.push_back(u.name + "/bn_rm");
      params.all_names.push_back(u.name + "/bn_rv");
    }
  }
  return params;
}

namespace detail {

// conv -> bn -> relu -> dropout. The post-relu activation is bookmarked on
// the tape under the unit name so interpretability code can capture it.
inline Tensor conv_unit(ModelParams& params, const std::string& name, Tape* tape,
                        const Tensor& x, bool training, Rng* rng) {
  const Tensor& w = params.at(name + "/w");
  const int pad = (w.dim(2) - 1) / 2;
  Tensor cur = conv2d(tape, x, w, params.at(name + "/b"), pad);
  cur = batchnorm(tape, cur, params.at(name + "/bn_g"), params.at(name + "/bn_b"),
                  params.at(name + "/bn_rm"), params.at(name + "/bn_rv"),
                  params.config.bn_momentum, training);
  cur = relu(tape, cur);
  if (tape) tape->mark(name, cur);
  if (training) {
    if (!rng) throw std::invalid_argument("conv_unit: training forward needs an rng");
    cur = dropout(tape, cur, params.config.dropout_rate, true, *rng);
  }
  return cur;
}

}  // namespace detail

// Full forward pass over [B,1,n,n]; returns per-pixel probabilities. With a
// tape, bookmarks are left for "input", every conv unit, "bottleneck" (the
// deepest activation), and "logits" (pre-sigmoid head output).
inline Tensor unet_forward(ModelParams& params, const Tensor& images, bool training,
                           Tape* tape = nullptr, Rng* rng = nullptr) {
  require_rank(images, 4, "unet_forward input");
  const UNetConfig& cfg = params.config;
  if (images.dim(1) != 1)
    throw std::invalid_argument("unet_forward: expected 1 input channel, got " +
                                std::to_string(images.dim(1)));
  if (images.dim(2) != cfg.n || images.dim(3) != cfg.n)
    throw std::invalid_argument("unet_forward: spatial size " +
                                std::to_string(images.dim(2)) + "x" +
                                std::to_string(images.dim(3)) +
                                " does not match configured n = " +
                                std::to_string(cfg.n));
  if (tape) tape->mark("input", images);

  std::vector<Tensor> skips;
  Tensor cur = images;
  for (int d = 0; d < cfg.depth; ++d) {
    const std::string stage = "enc" + std::to_string(d);
    cur = detail::conv_unit(params, stage + "a", tape, cur, training, rng);
    cur = detail::conv_unit(params, stage + "b", tape, cur, training, rng);
    skips.push_back(cur);
    cur = maxpool2(tape, cur);
  }
  cur = detail::conv_unit(params, "bot_a", tape, cur, training, rng);
  cur = detail::conv_unit(params, "bot_b", tape, cur, training, rng);
  if (tape) tape->mark("bottleneck", tape->marks().at("bot_b"));
  for (int d = cfg.depth - 1; d >= 0; --d) {
    const std::string stage = "dec" + std::to_string(d);
    cur = upsample_nearest2(tape, cur);
    cur = concat_channels(tape, cur, skips[static_cast<std::size_t>(d)]);
    cur = detail::conv_unit(params, stage + "a", tape, cur, training, rng);
    cur = detail::conv_unit(params, stage + "b", tape, cur, training, rng);
  }
  cur = conv2d(tape, cur, params.at("out/w"), params.at("out/b"), 0);
  if (tape) tape->mark("logits", cur);
  return sigmoid(tape, cur);
}

// Mean pixelwise binary cross-entropy with predictions clamped to
// [1e-7, 1-1e-7]. Fused forward/backward; the mean is accumulated in double.
inline Tensor bce_loss(Tape* tape, const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw std::invalid_argument("bce_loss: shape mismatch " + shape_str(pred.shape()) +
                                " vs " + shape_str(target.shape()));
  const std::size_t n = pred.size();
  if (n == 0) throw std::invalid_argument("bce_loss: empty tensors");
  constexpr float kLo = 1e-7f;
  constexpr float kHi = 1.0f - 1e-7f;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const float t = target[i];
    if (t != 0.0f && t != 1.0f)
      throw std::invalid_argument("bce_loss: target values must be binary");
    const float p = std::min(kHi, std::max(kLo, pred[i]));
    acc -= t * std::log(static_cast<double>(p)) +
           (1.0 - t) * std::log(1.0 - static_cast<double>(p));
  }
  Tensor out = Tensor::scalar(static_cast<float>(acc / static_cast<double>(n)));
  if (tape) {
    tape->record([pred, target, out](ReluBackwardMode) mutable {
      if (!out.grad_allocated()) return;
      const float g = out.grad()[0];
      const std::size_t n = pred.size();
      const float inv_n = 1.0f / static_cast<float>(n);
      float* gp = pred.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const float p = pred[i];
        if (p < kLo || p > kHi) continue;  // clamp region: zero slope
        const float t = target[i];
        gp[i] += g * inv_n * (-t / p + (1.0f - t) / (1.0f - p));
      }
    });
  }
  return out;
}

struct AdamState {
  float lr = 0.001f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  std::int64_t t = 0;
  std::map<std::string, Tensor> m;  // first moments, keyed by parameter name
  std::map<std::string, Tensor> v;  // second moments
};

// One Adam update over every trainable parameter, reading the gradients
// accumulated on the tensors. Moment buffers are created lazily.
inline void adam_step(ModelParams& params, AdamState& state) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), state.t);
  const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), state.t);
  for (const std::string& name : params.trainable) {
    Tensor& p = params.at(name);
    if (!p.grad_allocated()) p.grad();  // zero gradient: still a valid step
    if (!p.grad_all_finite())
      throw std::runtime_error("adam_step: non-finite gradient on parameter '" +
                               name + "'");
    auto mi = state.m.find(name);
    if (mi == state.m.end()) {
      mi = state.m.emplace(name, Tensor(p.shape())).first;
      state.v.emplace(name, Tensor(p.shape()));
    }
    Tensor& m = mi->second;
    Tensor& v = state.v.at(name);
    const float* g = p.grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0f - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0f - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= static_cast<float>(state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

// Training items pair a [n,n] image with its [n,n] binary mask.
struct TrainItem {
  Tensor image;
  Tensor gt;
};

// Stacks rank-2 samples into a [B,1,n,n] batch tensor.
inline Tensor stack_batch(const std::vector<const Tensor*>& items) {
  if (items.empty()) throw std::invalid_argument("stack_batch: empty batch");
  const int n_rows = items[0]->dim(0), n_cols = items[0]->dim(1);
  Tensor out(Shape{static_cast<int>(items.size()), 1, n_rows, n_cols});
  for (std::size_t b = 0; b < items.size(); ++b) {
    if (items[b]->shape() != items[0]->shape())
      throw std::invalid_argument("stack_batch: inconsistent sample shapes");
    std::copy(items[b]->data(), items[b]->data() + items[b]->size(),
              out.data() + b * items[b]->size());
  }
  return out;
}

// One epoch of shuffled mini-batch training; returns the sample-weighted
// mean loss. A trailing partial batch is trained like any other.
inline double train_epoch(ModelParams& params, AdamState& state,
                          const std::vector<TrainItem>& data, int batch_size,
                          Rng& rng) {
  if (data.empty()) throw std::invalid_argument("train_epoch: empty dataset");
  if (batch_size < 1) throw std::invalid_argument("train_epoch: batch_size must be >= 1");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  double loss_acc = 0.0;
  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop =
        std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const Tensor*> imgs, gts;
    for (std::size_t i = start; i < stop; ++i) {
      imgs.push_back(&data[order[i]].image);
      gts.push_back(&data[order[i]].gt);
    }
    Tensor batch = stack_batch(imgs);
    Tensor target = stack_batch(gts);

    Tape tape;
    Tensor pred = unet_forward(params, batch, true, &tape, &rng);
    Tensor loss = bce_loss(&tape, pred, target);
    tape.backward(loss, ReluBackwardMode::kStandard);
    adam_step(params, state);
    params.drop_grads();
    loss_acc += static_cast<double>(loss[0]) * static_cast<double>(stop - start);
  }
  return loss_acc / static_cast<double>(data.size());
}

// Eval-mode forward + inclusive 0.5 threshold, for a single [n,n] image.
inline Tensor predict_mask(ModelParams& params, const Tensor& image) {
  Tensor batch = stack_batch({&image});
  Tensor prob = unet_forward(params, batch, false);
  Tensor mask(image.shape());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = prob[i] >= 0.5f ? 1.0f : 0.0f;
  return mask;
}

}  // namespace adaug
