#pragma once

#include <algorithm>
#include <vector>

#include "xmodal/grid.hpp"
#include "xmodal/stats.hpp"

namespace xmodal {

struct NormalizedThermal {
  Grid<double> values;  // in [0,1]
  bool degenerate = false;
  double p2 = 0.0;
  double p98 = 0.0;
};

// Rescales raw 16-bit counts to [0,1] between the image's 2nd and 98th
// percentiles, clamping the tails. Flat images (p98 - p2 < 1 count) are
// degenerate and map to all zeros.
inline NormalizedThermal normalize_thermal(const ThermalImageRaw& raw) {
  NormalizedThermal out;
  out.values = Grid<double>(raw.rows(), raw.cols(), 0.0);
  if (raw.size() == 0) {
    out.degenerate = true;
    return out;
  }
  std::vector<double> sorted(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) sorted[i] = static_cast<double>(raw[i]);
  std::sort(sorted.begin(), sorted.end());
  out.p2 = quantile_sorted(sorted, 0.02);
  out.p98 = quantile_sorted(sorted, 0.98);
  const double span = out.p98 - out.p2;
  if (span < 1.0) {
    out.degenerate = true;
    return out;
  }
  for (size_t i = 0; i < raw.size(); ++i) {
    const double v = (static_cast<double>(raw[i]) - out.p2) / span;
    out.values[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

}  // namespace xmodal
