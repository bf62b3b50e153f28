#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace exk {

/// Worker count from EXK_THREADS, else the hardware concurrency.
inline int default_threads() {
  if (const char* env = std::getenv("EXK_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots. If several indices throw, the exception of the
/// smallest index is rethrown, so failures do not depend on scheduling.
inline void parallel_for(long long n, int threads, const std::function<void(long long)>& body) {
  if (n <= 0) return;
  const int workers = static_cast<int>(std::min<long long>(std::max(1, threads), n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<long long> next{0};
  auto run = [&] {
    for (long long i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace exk
