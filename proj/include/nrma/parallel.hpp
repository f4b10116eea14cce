#pragma once

// Order-independent parallel evaluation of indexed work items. Results land in
// slots keyed by index, so callers aggregate in index order and get the same
// answer for any thread count.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nrma {

/// Thread count from an explicit request, else NOMA_BENCH_THREADS, else hardware.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NOMA_BENCH_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [begin, end) on up to `threads` threads.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, int threads, Fn&& fn) {
  if (end <= begin) return;
  const std::size_t count = end - begin;
  const int workers = static_cast<int>(std::min<std::size_t>(std::max(threads, 1), count));
  if (workers == 1) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{begin};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < end; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace nrma
