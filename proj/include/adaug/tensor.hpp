// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaug {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw std::invalid_argument("tensor extent must be nonnegative");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

// Dense float32 array with an optional same-shape gradient buffer.
//
// A Tensor is a cheap handle onto shared storage: copies alias the same
// payload, which is what lets a Tape closure see gradients accumulated after
// the forward pass. Activation data is treated as immutable once the op that
// produced it returns; parameter tensors are mutated only by the optimizer
// (single writer).
class Tensor {
 public:
  Tensor() : p_(std::make_shared<Payload>()) {}

  explicit Tensor(Shape shape, float fill = 0.0f) : p_(std::make_shared<Payload>()) {
    p_->shape = std::move(shape);
    p_->data.assign(shape_numel(p_->shape), fill);
  }

  static Tensor from_data(Shape shape, std::vector<float> values) {
    if (shape_numel(shape) != values.size())
      throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                  " does not match shape " + shape_str(shape));
    Tensor t;
    t.p_->shape = std::move(shape);
    t.p_->data = std::move(values);
    return t;
  }

  static Tensor scalar(float v) { return from_data({1}, {v}); }

  const Shape& shape() const { return p_->shape; }
  int rank() const { return static_cast<int>(p_->shape.size()); }
  int dim(int i) const { return p_->shape.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return p_->data.size(); }

  float* data() { return p_->data.data(); }
  const float* data() const { return p_->data.data(); }
  std::vector<float>& vec() { return p_->data; }
  const std::vector<float>& vec() const { return p_->data; }

  float& operator[](std::size_t i) { return p_->data[i]; }
  float operator[](std::size_t i) const { return p_->data[i]; }

  // Gradient buffer; allocated zero-filled on first touch. An unallocated
  // buffer reads as an all-zero gradient.
  bool grad_allocated() const { return !p_->grad.empty() || p_->data.empty(); }
  float* grad() const {
    if (p_->grad.size() != p_->data.size()) p_->grad.assign(p_->data.size(), 0.0f);
    return p_->grad.data();
  }
  const std::vector<float>& grad_vec() const {
    if (p_->grad.size() != p_->data.size())
      throw std::runtime_error("gradient not populated for this tensor");
    return p_->grad;
  }
  void zero_grad() {
    if (!p_->grad.empty()) p_->grad.assign(p_->data.size(), 0.0f);
  }
  void drop_grad() { p_->grad.clear(); }

  // Deep copy of the data; gradient buffer is not carried over.
  Tensor clone() const {
    Tensor t;
    t.p_->shape = p_->shape;
    t.p_->data = p_->data;
    return t;
  }

  bool same_payload(const Tensor& other) const { return p_ == other.p_; }

  bool all_finite() const {
    for (float v : p_->data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool grad_all_finite() const {
    for (float v : p_->grad)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  struct Payload {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;
  };
  std::shared_ptr<Payload> p_;
};

// Flat offset into a [B,C,H,W] tensor.
inline std::size_t idx4(const Shape& s, int b, int c, int h, int w) {
  return ((static_cast<std::size_t>(b) * s[1] + c) * s[2] + h) * s[3] + w;
}

inline void require_rank(const Tensor& t, int rank, const char* what) {
  if (t.rank() != rank)
    throw std::invalid_argument(std::string(what) + ": expected rank " +
                                std::to_string(rank) + " tensor, got shape " +
                                shape_str(t.shape()));
}

}  // namespace adaug
