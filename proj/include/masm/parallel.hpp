#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace masm {

// Static-chunked parallel loop over [begin, end). Each index is processed by
// exactly one worker and workers write disjoint output slots, so results are
// identical for any worker count.
inline void parallel_for(long begin, long end, int threads, const std::function<void(long)>& body) {
  const long n = end - begin;
  if (n <= 0) return;
  int workers = std::max(1, threads);
  workers = static_cast<int>(std::min<long>(workers, n));
  if (workers == 1) {
    for (long i = begin; i < end; ++i) body(i);
    return;
  }
  const long chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const long lo = begin + w * chunk;
    const long hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (long i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline int default_threads() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace masm
