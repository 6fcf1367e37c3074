#pragma once

// Sample-level parallelism. Work item i always sees the same inputs whatever
// the thread count; accumulators are merged in block order.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gwcouple {

inline unsigned resolve_threads(unsigned requested) {
  if (requested) return requested;
  return std::max(1U, std::thread::hardware_concurrency());
}

/// Runs fn(acc, i) for i in [0, n) over contiguous blocks, one accumulator per
/// block, then folds the blocks left to right with acc.merge(other).
template <class Acc, class Fn>
Acc parallel_accumulate(std::uint64_t n, unsigned threads, Fn&& fn, const Acc& init = Acc{}) {
  threads = static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(threads), std::max<std::uint64_t>(n, 1)));
  std::vector<Acc> parts(threads, init);
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&](unsigned t) {
    const std::uint64_t lo = n * t / threads, hi = n * (t + 1) / threads;
    try {
      for (std::uint64_t i = lo; i < hi; ++i) fn(parts[t], i);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  if (threads == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(run, t);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  Acc out = std::move(parts[0]);
  for (unsigned t = 1; t < threads; ++t) out.merge(parts[t]);
  return out;
}

/// out[i] = fn(i), computed in parallel.
template <class T, class Fn>
std::vector<T> parallel_map(std::uint64_t n, unsigned threads, Fn&& fn) {
  std::vector<T> out(n);
  struct Nothing {
    void merge(const Nothing&) {}
  };
  parallel_accumulate<Nothing>(n, threads, [&](Nothing&, std::uint64_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace gwcouple
