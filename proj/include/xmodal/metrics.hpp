#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "xmodal/grid.hpp"
#include "xmodal/stats.hpp"

namespace xmodal {

// Standard monocular-depth evaluation metrics. Threshold accuracies use
// strict inequality: max(d/d^, d^/d) < 1.25^n.
struct MetricSet {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  long num_pixels = 0;
};

inline MetricSet compute_metrics(const DepthMap& pred, const DepthMap& gt, const Mask& mask) {
  if (!pred.values.same_shape(gt.values) || !pred.values.same_shape(mask))
    throw std::invalid_argument("compute_metrics: shape mismatch");
  std::vector<double> abs_rel, sq_rel, sq_err, sq_log;
  long d1 = 0, d2 = 0, d3 = 0;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || !pred.valid[i] || !gt.valid[i]) continue;
    const double p = pred.values[i], g = gt.values[i];
    if (!(p > 0.0) || !(g > 0.0))
      throw std::domain_error("compute_metrics: depths must be positive on the mask");
    const double diff = p - g;
    abs_rel.push_back(std::abs(diff) / g);
    sq_rel.push_back(diff * diff / g);
    sq_err.push_back(diff * diff);
    const double lg = std::log(p) - std::log(g);
    sq_log.push_back(lg * lg);
    const double ratio = std::max(p / g, g / p);
    if (ratio < 1.25) ++d1;
    if (ratio < 1.25 * 1.25) ++d2;
    if (ratio < 1.25 * 1.25 * 1.25) ++d3;
  }
  const long n = static_cast<long>(abs_rel.size());
  if (n == 0) throw std::domain_error("compute_metrics: empty evaluation mask");
  const double nd = static_cast<double>(n);
  MetricSet m;
  m.num_pixels = n;
  m.abs_rel = detail::pairwise_sum(abs_rel) / nd;
  m.sq_rel = detail::pairwise_sum(sq_rel) / nd;
  m.rmse = std::sqrt(detail::pairwise_sum(sq_err) / nd);
  m.rmse_log = std::sqrt(detail::pairwise_sum(sq_log) / nd);
  m.delta1 = static_cast<double>(d1) / nd;
  m.delta2 = static_cast<double>(d2) / nd;
  m.delta3 = static_cast<double>(d3) / nd;
  return m;
}

// Metrics averaged per ground-truth depth bin, then across non-empty bins,
// so near-field pixels cannot dominate. Pixels with gt >= max_depth are
// excluded (half-open bins).
struct BinnedMetricSet {
  double bin_width = 5.0;
  double max_depth = 80.0;
  std::vector<std::optional<MetricSet>> bins;
  MetricSet aggregate;
};

inline BinnedMetricSet compute_weighted_metrics(const DepthMap& pred, const DepthMap& gt,
                                                const Mask& mask, double bin_width = 5.0,
                                                double max_depth = 80.0) {
  if (!(bin_width > 0.0) || !(max_depth > 0.0))
    throw std::invalid_argument("compute_weighted_metrics: bin_width and max_depth must be positive");
  const int num_bins = static_cast<int>(std::ceil(max_depth / bin_width));
  BinnedMetricSet out;
  out.bin_width = bin_width;
  out.max_depth = max_depth;
  out.bins.resize(static_cast<size_t>(num_bins));

  // One evaluation mask per bin, then reuse the unweighted kernel.
  std::vector<Mask> bin_masks(static_cast<size_t>(num_bins),
                              Mask(pred.rows(), pred.cols(), 0));
  std::vector<long> bin_counts(static_cast<size_t>(num_bins), 0);
  for (size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || !pred.valid[i] || !gt.valid[i]) continue;
    const double g = gt.values[i];
    if (g >= max_depth) continue;
    const int b = static_cast<int>(g / bin_width);
    if (b < 0 || b >= num_bins) continue;
    bin_masks[static_cast<size_t>(b)][i] = 1;
    ++bin_counts[static_cast<size_t>(b)];
  }

  int non_empty = 0;
  MetricSet agg;
  for (int b = 0; b < num_bins; ++b) {
    if (bin_counts[static_cast<size_t>(b)] == 0) continue;
    const MetricSet ms = compute_metrics(pred, gt, bin_masks[static_cast<size_t>(b)]);
    out.bins[static_cast<size_t>(b)] = ms;
    agg.abs_rel += ms.abs_rel;
    agg.sq_rel += ms.sq_rel;
    agg.rmse += ms.rmse;
    agg.rmse_log += ms.rmse_log;
    agg.delta1 += ms.delta1;
    agg.delta2 += ms.delta2;
    agg.delta3 += ms.delta3;
    agg.num_pixels += ms.num_pixels;
    ++non_empty;
  }
  if (non_empty == 0) throw std::domain_error("compute_weighted_metrics: all bins empty");
  const double k = static_cast<double>(non_empty);
  agg.abs_rel /= k;
  agg.sq_rel /= k;
  agg.rmse /= k;
  agg.rmse_log /= k;
  agg.delta1 /= k;
  agg.delta2 /= k;
  agg.delta3 /= k;
  out.aggregate = agg;
  return out;
}

}  // namespace xmodal
