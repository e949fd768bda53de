#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace semhash {

/// Worker count for data-parallel read-only work. Controlled by the
/// SEMHASH_THREADS environment variable; 0 or unset means one worker per
/// hardware thread.
inline std::size_t worker_count() {
  const char* env = std::getenv("SEMHASH_THREADS");
  if (env != nullptr && *env != '\0') {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Static range split across workers; f(begin, end) runs on each chunk.
/// Chunks write disjoint output slots, so results never depend on the
/// worker count or scheduling.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
  const std::size_t workers = std::min(worker_count(), n == 0 ? std::size_t{1} : n);
  if (n == 0) return;
  if (workers <= 1) {
    f(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&f, begin, end] { f(begin, end); });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace semhash
