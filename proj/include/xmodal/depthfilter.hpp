#pragma once

#include <cmath>

#include "xmodal/camera.hpp"
#include "xmodal/grid.hpp"
#include "xmodal/warp.hpp"

namespace xmodal {

// Calibrated stereo pair; baseline maps left-camera coordinates to
// right-camera coordinates.
struct StereoRig {
  CameraIntrinsics left;
  CameraIntrinsics right;
  RigidTransform T_right_left;
};

struct FilterStats {
  long removed = 0;
  long kept = 0;
};

// Drops LiDAR depths whose left/right pixel intensities disagree: each valid
// depth pixel is reprojected into the right image and the resampled right
// intensity is compared against the left one. Pixels leaving the right image
// cannot be verified and are dropped too.
inline DepthMap photometric_filter(const DepthMap& lidar_depth, const Grid<double>& left_img,
                                   const Grid<double>& right_img, const StereoRig& rig,
                                   double tau_photo, FilterStats* stats = nullptr) {
  if (!lidar_depth.values.same_shape(left_img))
    throw std::invalid_argument("photometric_filter: depth must live on the left grid");
  DepthMap out = lidar_depth;
  const WarpResult w = warp_depth(lidar_depth, rig.left, rig.right, rig.T_right_left);
  const Mask right_all_valid(right_img.rows(), right_img.cols(), 1);
  const SampledGrid sampled = bilinear_sample(right_img, right_all_valid, w.dst_coords);
  long removed = 0;
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) {
      if (!out.valid(r, c)) continue;
      const bool verifiable = sampled.valid(r, c);
      if (!verifiable || std::abs(left_img(r, c) - sampled.values(r, c)) > tau_photo) {
        out.valid(r, c) = 0;
        ++removed;
      }
    }
  if (stats) {
    stats->removed = removed;
    stats->kept = mask_count(out.valid);
  }
  return out;
}

// Drops LiDAR depths that deviate from a precomputed stereo-matching depth by
// more than tau_rel relative. Missing stereo depth is not evidence of error,
// so those pixels are kept.
inline DepthMap stereo_deviation_filter(const DepthMap& lidar_depth, const DepthMap& stereo_depth,
                                        double tau_rel, FilterStats* stats = nullptr) {
  if (!lidar_depth.values.same_shape(stereo_depth.values))
    throw std::invalid_argument("stereo_deviation_filter: shape mismatch");
  DepthMap out = lidar_depth;
  long removed = 0;
  for (size_t i = 0; i < out.valid.size(); ++i) {
    if (!out.valid[i] || !stereo_depth.valid[i]) continue;
    const double rel = std::abs(lidar_depth.values[i] - stereo_depth.values[i]) / lidar_depth.values[i];
    if (rel > tau_rel) {
      out.valid[i] = 0;
      ++removed;
    }
  }
  if (stats) {
    stats->removed = removed;
    stats->kept = mask_count(out.valid);
  }
  return out;
}

}  // namespace xmodal
