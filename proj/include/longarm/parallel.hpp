#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace longarm {

/// Worker count from LONGARM_WORKERS, else the hardware concurrency.
inline unsigned default_workers() {
  if (const char* env = std::getenv("LONGARM_WORKERS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

inline unsigned resolve_workers(unsigned workers) { return workers == 0 ? default_workers() : workers; }

/// Runs task(i) for i in [0, n) on a pool of `workers` threads. Tasks write
/// into caller-owned slots indexed by i, so the merge order never depends on
/// scheduling. The first exception thrown by any task is rethrown here.
template <typename Task>
void parallel_tasks(std::size_t n, unsigned workers, Task&& task) {
  workers = resolve_workers(workers);
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  pool.reserve(count);
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Fixed partition of `samples` into blocks of `block` samples; block b owns
/// samples [b*block, min((b+1)*block, samples)).
struct Blocks {
  std::int64_t samples;
  std::int64_t block;

  std::size_t count() const { return static_cast<std::size_t>((samples + block - 1) / block); }
  std::int64_t begin(std::size_t b) const { return static_cast<std::int64_t>(b) * block; }
  std::int64_t size(std::size_t b) const { return std::min(block, samples - begin(b)); }
};

}  // namespace longarm
