#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace hamassim {

/// Calls body(i) for i in [0, n) on up to `jobs` threads with a static
/// strided assignment. The first exception (by worker) is rethrown.
template <class F>
void parallel_for(int n, int jobs, F&& body) {
  const int workers = std::max(1, std::min(jobs, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace hamassim
