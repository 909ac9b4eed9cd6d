#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

namespace xmodal {

namespace detail {

// Deterministic pairwise reduction; order-stable and accurate to eps*log(n).
inline double pairwise_sum(std::span<const double> v) {
  const size_t n = v.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const size_t half = n / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(std::span<const double>(v));
}

}  // namespace detail

// Linear-interpolation quantile over the value multiset, inclusive endpoints:
// position p*(n-1) into the sorted values, interpolated between neighbors.
// Shared by thermal percentile normalization and loss trimming so the two
// stay consistent.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::domain_error("quantile: empty sample");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

}  // namespace xmodal
