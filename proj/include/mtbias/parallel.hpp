#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mtbias {

// Worker-thread ceiling. MTBIAS_THREADS caps the hardware count; it never
// raises it.
inline unsigned thread_cap() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MTBIAS_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) hw = std::min(hw, static_cast<unsigned>(v));
  }
  return hw;
}

// Runs fn(i) for i in [0, n). fn must only write state owned by index i, so
// results are identical no matter how the indices are scheduled.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn, unsigned max_threads = 0) {
  unsigned t = max_threads ? std::min(max_threads, thread_cap()) : thread_cap();
  if (n < 2 || t < 2) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  t = static_cast<unsigned>(std::min<size_t>(t, n));
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(t);
  for (unsigned w = 0; w < t; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (size_t i = w; i < n; i += t) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : workers) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mtbias
