#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace lowrank_gp {

/// Thread budget handed down from the CLI. Every parallel loop in the library
/// writes disjoint outputs per index, so results do not depend on `threads`.
struct Parallelism {
  unsigned threads = 1;

  static Parallelism hardware() {
    return {std::max(1u, std::thread::hardware_concurrency())};
  }

  /// `LOWRANK_GP_THREADS` when set and positive, otherwise hardware().
  static Parallelism from_env() {
    if (const char* env = std::getenv("LOWRANK_GP_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v > 0) return {static_cast<unsigned>(v)};
    }
    return hardware();
  }
};

/// Calls fn(i) for i in [begin, end) over contiguous static chunks.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, const Parallelism& par, Fn&& fn) {
  if (end <= begin) return;
  const std::size_t count = end - begin;
  const std::size_t workers = std::min<std::size_t>(std::max(1u, par.threads), count);
  if (workers <= 1 || count < 64) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t lo = begin + w * chunk;
    const std::size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (std::size_t i = begin; i < std::min(end, begin + chunk); ++i) fn(i);
}

}  // namespace lowrank_gp
