#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace fieldshift {

namespace detail {
inline std::atomic<int>& thread_count_slot() {
  static std::atomic<int> count{0};  // 0 = not yet resolved
  return count;
}

inline int resolve_thread_count() {
  // FIELDSHIFT_NUM_THREADS caps worker threads. Default is 1.
  const char* env = std::getenv("FIELDSHIFT_NUM_THREADS");
  int n = 1;
  if (env != nullptr) {
    n = std::atoi(env);
    if (n < 1) n = 1;
  }
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw > 0) n = std::min(n, hw);
  return n;
}
}  // namespace detail

inline int num_threads() {
  int n = detail::thread_count_slot().load(std::memory_order_relaxed);
  if (n == 0) {
    n = detail::resolve_thread_count();
    detail::thread_count_slot().store(n, std::memory_order_relaxed);
  }
  return n;
}

inline void set_num_threads(int n) {
  detail::thread_count_slot().store(n < 1 ? 1 : n, std::memory_order_relaxed);
}

/// Run f(begin, end) over a partition of [0, n). Each index is processed by
/// exactly one worker and per-index work must be independent, so results do
/// not depend on the thread count.
template <typename F>
void parallel_for(long n, F&& f) {
  if (n <= 0) return;
  const int nt = std::min<long>(num_threads(), n);
  if (nt <= 1) {
    f(0L, n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(nt) - 1);
  const long chunk = (n + nt - 1) / nt;
  for (int t = 1; t < nt; ++t) {
    const long begin = t * chunk;
    const long end = std::min(n, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&f, begin, end] { f(begin, end); });
  }
  f(0L, std::min(n, chunk));
  for (auto& w : workers) w.join();
}

}  // namespace fieldshift
