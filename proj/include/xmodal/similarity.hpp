#pragma once

#include <cmath>
#include <stdexcept>

#include "xmodal/grid.hpp"
#include "xmodal/warp.hpp"

namespace xmodal {

inline constexpr double kZeroNormEps = 1e-12;

// Per-pixel cosine similarity dot(a,b)/(|a||b|) in [-1,1]. Zero-norm vectors
// carry no direction and map to similarity 0, still valid.
inline SimilarityMap cosine_similarity_map(const FeatureMap& a, const FeatureMap& b,
                                           const Mask* b_valid = nullptr) {
  if (!a.same_shape(b)) throw std::invalid_argument("cosine_similarity_map: shape mismatch");
  SimilarityMap out(a.rows(), a.cols());
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) {
      if (b_valid && !(*b_valid)(r, c)) continue;
      const double* pa = a.at(r, c);
      const double* pb = b.at(r, c);
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (int ch = 0; ch < a.channels(); ++ch) {
        dot += pa[ch] * pb[ch];
        na += pa[ch] * pa[ch];
        nb += pb[ch] * pb[ch];
      }
      na = std::sqrt(na);
      nb = std::sqrt(nb);
      out.valid(r, c) = 1;
      if (na < kZeroNormEps || nb < kZeroNormEps) continue;  // similarity stays 0
      out.values(r, c) = dot / (na * nb);
    }
  return out;
}

// The 8-channel RGB-aligned confidence-network input:
//   0: S_r      cross-modal feature similarity on the RGB grid
//   1: S_tr     thermal-side similarity resampled to the RGB grid
//   2: |D_r - D_tr|  L1 depth residual, meters
//   3: D_tr     warped thermal depth, meters
//   4: D_r      RGB depth, meters
//   5-7: RGB image, [0,1]
// All channels share the RGB grid; validity is the conjunction of the
// contributing masks.
struct MetadataStack {
  static constexpr int kChannels = 8;
  FeatureMap channels;  // H x W x 8
  Mask valid;

  Grid<double> channel(int idx) const {
    Grid<double> g(channels.rows(), channels.cols(), 0.0);
    for (int r = 0; r < channels.rows(); ++r)
      for (int c = 0; c < channels.cols(); ++c) g(r, c) = channels.at(r, c, idx);
    return g;
  }
};

// Builds the confidence metadata. u_rt are RGB->thermal correspondences from
// the RGB depth, u_tr the thermal->RGB correspondences from the thermal
// depth; the thermal-side similarity S_t is formed on the thermal grid via
// u_tr and then resampled to the RGB grid.
inline MetadataStack assemble_metadata(const DepthMap& rgb_depth, const DepthMap& warped_thermal,
                                       const FeatureMap& feat_rgb, const FeatureMap& feat_thermal,
                                       const PixelCoordGrid& u_rt, const PixelCoordGrid& u_tr,
                                       const Image3& rgb_image) {
  const int rows = rgb_depth.rows(), cols = rgb_depth.cols();
  if (feat_rgb.rows() != rows || feat_rgb.cols() != cols)
    throw std::invalid_argument("assemble_metadata: RGB features must be on the RGB grid");
  if (feat_rgb.channels() != feat_thermal.channels())
    throw std::invalid_argument("assemble_metadata: feature channel mismatch");
  if (rgb_image.rows() != rows || rgb_image.cols() != cols || rgb_image.channels() != 3)
    throw std::invalid_argument("assemble_metadata: RGB image must be 3-channel on the RGB grid");

  Mask ft_sampled_valid;
  const FeatureMap ft_on_rgb = bilinear_sample(feat_thermal, u_rt, &ft_sampled_valid);
  SimilarityMap s_r = cosine_similarity_map(feat_rgb, ft_on_rgb, &ft_sampled_valid);

  Mask fr_sampled_valid;
  const FeatureMap fr_on_thermal = bilinear_sample(feat_rgb, u_tr, &fr_sampled_valid);
  const SimilarityMap s_t = cosine_similarity_map(feat_thermal, fr_on_thermal, &fr_sampled_valid);
  const SampledGrid s_tr = bilinear_sample(s_t.values, s_t.valid, u_rt);

  MetadataStack out;
  out.channels = FeatureMap(rows, cols, MetadataStack::kChannels, 0.0);
  out.valid = Mask(rows, cols, 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const bool ok = s_r.valid(r, c) && s_tr.valid(r, c) && rgb_depth.valid(r, c) &&
                      warped_thermal.valid(r, c);
      if (!ok) continue;
      double* dst = out.channels.at(r, c);
      dst[0] = s_r.values(r, c);
      dst[1] = s_tr.values(r, c);
      dst[4] = rgb_depth.values(r, c);
      dst[3] = warped_thermal.values(r, c);
      dst[2] = std::abs(dst[4] - dst[3]);
      const double* img = rgb_image.at(r, c);
      dst[5] = img[0];
      dst[6] = img[1];
      dst[7] = img[2];
      out.valid(r, c) = 1;
    }
  return out;
}

}  // namespace xmodal
