#pragma once

#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace survkit {

inline int hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Worker count resolution: explicit request > SURVKIT_THREADS > hardware.
inline int default_threads() {
  if (const char* env = std::getenv("SURVKIT_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return hardware_threads();
}

// Runs fn(i) for i in [0, n) on up to n_threads workers (0 = default_threads).
// Items are claimed dynamically, so each item must write only to its own
// output slot; results are then independent of scheduling and worker count.
// The first exception thrown by any item is rethrown after all workers join.
inline void parallel_for(std::size_t n, int n_threads,
                         const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  std::size_t workers = static_cast<std::size_t>(
      n_threads > 0 ? n_threads : default_threads());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (;;) {
          const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
          if (i >= n) break;
          fn(i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace survkit
