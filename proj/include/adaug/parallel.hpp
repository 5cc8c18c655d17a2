// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace adaug {

// Process-wide worker budget, set once from the CLI --threads flag.
class ThreadBudget {
 public:
  static int get() { return slot(); }
  static void set(int n) { slot() = std::max(1, n); }

 private:
  static int& slot() {
    static int v = default_budget();
    return v;
  }
  static int default_budget() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
  }
};

// Parallel map over [0, n). Bodies must write disjoint state per index; the
// schedule never affects results, only which worker touches which index.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                         int threads = 0) {
  if (threads <= 0) threads = ThreadBudget::get();
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        body(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace adaug
