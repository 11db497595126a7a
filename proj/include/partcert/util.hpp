#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace partcert {

/* Chunked parallel loop.  Each index writes only its own slot, so results are
 * deterministic regardless of scheduling.  workers <= 1 runs inline. */
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  int nw = std::min(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (int w = 0; w < nw; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += nw) fn(i);
    });
  for (auto& t : pool) t.join();
}

// splitmix64 step; used to derive independent stream seeds from a master seed
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace partcert
