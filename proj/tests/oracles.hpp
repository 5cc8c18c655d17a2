// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations the test suites compare the library
// against: central finite differences for gradients plus small brute-force
// helpers. Everything here is deliberately naive — O(whatever) loops, no
// shared code with the library paths under test.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

// Central difference d f / d x[i] with step h. `f` must be a pure function
// of the full input vector (any internal randomness re-derived from fixed
// seeds so repeated evaluations see identical draws).
inline double fd_derivative(const std::function<double(const std::vector<float>&)>& f,
                            std::vector<float> x, std::size_t i, double h) {
  const double xi = x[i];
  x[i] = static_cast<float>(xi + h);
  const double up = f(x);
  x[i] = static_cast<float>(xi - h);
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

// Relative error with a unit floor in the denominator, so near-zero pairs
// are compared absolutely. This is the scheme used for all gradient checks.
inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

// Worst per-element rel_err between an analytic gradient vector and the
// finite-difference gradient of f.
inline double max_fd_rel_err(const std::function<double(const std::vector<float>&)>& f,
                             const std::vector<float>& x,
                             const std::vector<float>& analytic, double h) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, rel_err(analytic[i], fd_derivative(f, x, i, h)));
  return worst;
}

// Direct rectangle sum over [r0, r0+hh) x [c0, c0+ww) of a row-major map.
inline double rect_sum(const std::vector<float>& map, int n, int r0, int c0, int hh,
                       int ww) {
  double acc = 0.0;
  for (int r = r0; r < r0 + hh; ++r)
    for (int c = c0; c < c0 + ww; ++c) acc += map[static_cast<std::size_t>(r) * n + c];
  return acc;
}

}  // namespace oracle
