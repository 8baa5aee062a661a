#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace sfda {

/// Worker cap: SFDA_THREADS when set (>=1), otherwise hardware concurrency.
/// Read on every call so tests can vary the environment between runs.
inline int worker_count() {
  if (const char* env = std::getenv("SFDA_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace detail {
inline thread_local bool inside_parallel_region = false;
}

/// Runs body(i) for i in [0, count) across worker threads. Each index is
/// processed exactly once; bodies must only write to disjoint state so that
/// results cannot depend on scheduling. Nested calls degrade to sequential
/// execution. The first exception thrown by any body is rethrown.
template <typename Body>
void parallel_for(int count, Body&& body) {
  if (count <= 0) return;
  const int workers = std::min(worker_count(), count);
  if (workers <= 1 || detail::inside_parallel_region) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      detail::inside_parallel_region = true;
      for (int i = w; i < count; i += workers) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          break;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

} // namespace sfda
