#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace echo {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};
  return cap;
}
}  // namespace detail

/// Caps module-internal parallelism; 0 restores the hardware default.
inline void set_num_threads(unsigned n) { detail::thread_cap().store(n); }

inline unsigned num_threads() {
  const unsigned cap = detail::thread_cap().load();
  if (cap != 0) return cap;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits [begin, end) into contiguous blocks, one per worker, and calls
/// fn(lo, hi) on each. Work below `grain` items runs inline. Callers must only
/// write to disjoint per-index outputs so results do not depend on the split.
template <class Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn&& fn, std::size_t grain = 1024) {
  if (end <= begin) return;
  const std::size_t n = end - begin;
  const std::size_t workers = std::min<std::size_t>(num_threads(), (n + grain - 1) / grain);
  if (workers <= 1) {
    fn(begin, end);
    return;
  }
  const std::size_t block = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t lo = begin + w * block;
    const std::size_t hi = std::min(end, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  fn(begin, std::min(end, begin + block));
  for (auto& t : pool) t.join();
}

}  // namespace echo
