#pragma once

#include <cstdint>
#include <thread>
#include <vector>

namespace bdff {

// Worker cap shared by all kernels. 0 restores the default
// (BDFF_THREADS env var if set, otherwise hardware_concurrency).
void set_num_threads(int n);
int num_threads();

// Static block partition of [0, n). Each index must touch disjoint state;
// within a block, work runs in index order, so results are bitwise identical
// for any thread count. `work_hint` estimates total scalar operations; jobs
// below the threshold run serially to avoid thread spawn overhead.
template <class F>
void parallel_for(int64_t n, int64_t work_hint, F&& fn) {
  constexpr int64_t kSerialThreshold = 1 << 16;
  if (n <= 0) return;
  const int nt = std::min<int64_t>(num_threads(), n);
  if (nt <= 1 || work_hint < kSerialThreshold) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nt - 1);
  auto run = [&](int t) {
    const int64_t begin = n * t / nt;
    const int64_t end = n * (t + 1) / nt;
    for (int64_t i = begin; i < end; ++i) fn(i);
  };
  for (int t = 1; t < nt; ++t) pool.emplace_back(run, t);
  run(0);
  for (auto& th : pool) th.join();
}

}  // namespace bdff
