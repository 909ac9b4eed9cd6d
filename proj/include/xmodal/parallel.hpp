#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace xmodal {

// Thread cap from XMODAL_THREADS (0 or unset = hardware auto).
inline int thread_cap() {
  static const int cap = [] {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("XMODAL_THREADS")) {
      char* end = nullptr;
      long v = std::strtol(env, &end, 10);
      if (end != env && v > 0) return std::min<int>(static_cast<int>(v), hw);
    }
    return hw;
  }();
  return cap;
}

// Runs fn(row) over [0, rows). Each row writes disjoint output, so results
// are bit-identical for any thread count; reductions must not live here.
inline void parallel_rows(int rows, const std::function<void(int)>& fn) {
  const int n = std::min(thread_cap(), rows);
  if (n <= 1 || rows <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(n));
  const int chunk = (rows + n - 1) / n;
  for (int t = 0; t < n; ++t) {
    const int lo = t * chunk;
    const int hi = std::min(rows, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int r = lo; r < hi; ++r) fn(r);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace xmodal
