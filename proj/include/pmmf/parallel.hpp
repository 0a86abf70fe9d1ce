// SPDX-License-Identifier: Apache-2.0
//
// Fork-join helper for block-level parallelism. Work items own disjoint
// output slots, so numeric results never depend on how many workers run.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pmmf::parallel {

namespace detail {
inline std::atomic<int>& max_threads_slot() {
  static std::atomic<int> value{0};  // 0 = use hardware concurrency
  return value;
}
}  // namespace detail

inline int max_threads() {
  int configured = detail::max_threads_slot().load(std::memory_order_relaxed);
  if (configured > 0) return configured;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Caps the worker pool; 0 restores the hardware default.
inline void set_max_threads(int n) { detail::max_threads_slot().store(n, std::memory_order_relaxed); }

/// Runs fn(i) for i in [0, count). Items must not share mutable state.
template <typename Fn>
void for_each_index(std::size_t count, Fn&& fn) {
  if (count == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(max_threads()), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count || failed.load(std::memory_order_relaxed)) return;
      try {
        fn(i);
      } catch (...) {
        {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace pmmf::parallel
