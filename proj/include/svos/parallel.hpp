#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace svos {

// Worker count comes from SVOS_THREADS when set, else the hardware.
inline int thread_count() {
  if (const char* e = std::getenv("SVOS_THREADS")) {
    int n = std::atoi(e);
    if (n >= 1) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks so results
// written to per-index slots land identically regardless of thread count.
// The first exception thrown by any worker is rethrown to the caller.
inline void parallel_for(int n, const std::function<void(int)>& fn, int workers = 0) {
  if (workers <= 0) workers = thread_count();
  if (n <= 0) return;
  if (workers == 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  workers = std::min(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  std::exception_ptr error;
  std::mutex error_mu;
  int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    int lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn, &error, &error_mu] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace svos
