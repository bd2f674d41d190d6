#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace cohnet {

/// Worker cap from COHNET_THREADS (0 or unset = hardware concurrency).
inline int worker_count() {
  int n = 0;
  if (const char* env = std::getenv("COHNET_THREADS")) n = std::atoi(env);
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return n < 1 ? 1 : n;
}

/// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker;
/// results must be written to per-index slots so output does not depend on
/// scheduling.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&, t] {
        try {
          for (int i = t; i < n; i += workers) fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace cohnet
