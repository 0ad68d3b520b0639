#ifndef IBFLOW_PARALLEL_HPP
#define IBFLOW_PARALLEL_HPP

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ibflow {

/// Worker cap: IBFLOW_THREADS when set, otherwise the hardware count.
inline std::size_t worker_limit() {
  if (const char* env = std::getenv("IBFLOW_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? hc : 1;
}

/// Apply fn(i) for i in [0, count) across at most `workers` threads.
/// Items must be independent; results are indexed, so scheduling order
/// cannot change the outcome. The first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  if (count == 0) return;
  workers = std::min(workers ? workers : 1, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ibflow

#endif  // IBFLOW_PARALLEL_HPP
