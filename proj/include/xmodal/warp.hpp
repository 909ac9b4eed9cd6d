#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "xmodal/camera.hpp"
#include "xmodal/grid.hpp"
#include "xmodal/parallel.hpp"

namespace xmodal {

// Sub-pixel destination coordinates per source pixel. Valid entries lie in
// [0, width-1] x [0, height-1] of the destination camera.
struct PixelCoordGrid {
  Grid<double> x;
  Grid<double> y;
  Mask valid;

  PixelCoordGrid() = default;
  PixelCoordGrid(int rows, int cols)
      : x(rows, cols, 0.0), y(rows, cols, 0.0), valid(rows, cols, 0) {}

  int rows() const { return x.rows(); }
  int cols() const { return x.cols(); }
};

struct Projection {
  Eigen::Vector2d pixel;
  double depth;
};

// Camera projection: (fx*X/Z + cx, fy*Y/Z + cy), depth Z.
inline Projection project(const Eigen::Vector3d& point, const CameraIntrinsics& K) {
  if (point.z() <= kBehindCameraEps)
    throw std::domain_error("project: point at or behind the camera plane");
  return {{K.fx * point.x() / point.z() + K.cx, K.fy * point.y() / point.z() + K.cy}, point.z()};
}

// Inverse projection scaled by depth: depth * ((u-cx)/fx, (v-cy)/fy, 1).
inline Eigen::Vector3d backproject(const Eigen::Vector2d& pixel, double depth,
                                   const CameraIntrinsics& K) {
  if (!(depth > 0.0)) throw std::domain_error("backproject: depth must be positive");
  return {depth * (pixel.x() - K.cx) / K.fx, depth * (pixel.y() - K.cy) / K.fy, depth};
}

struct WarpResult {
  DepthMap dst_frame_depth;  // transformed Z, stored on the source pixel grid
  PixelCoordGrid dst_coords; // destination sub-pixel locations
};

// Per-pixel transformed depth is affine in source depth:
//   Z'(u) = coeff(u) * d(u) + offset,  coeff(u) = r3 . K^-1 u~,  offset = t_z.
struct DepthTransformCoeffs {
  Grid<double> coeff;
  double offset = 0.0;
};

inline DepthTransformCoeffs depth_transform_coeffs(int rows, int cols,
                                                   const CameraIntrinsics& K_src,
                                                   const RigidTransform& T_dst_src) {
  DepthTransformCoeffs out;
  out.coeff = Grid<double>(rows, cols, 0.0);
  out.offset = T_dst_src.translation.z();
  const Eigen::Vector3d r3 = T_dst_src.rotation.row(2).transpose();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const Eigen::Vector3d ray((c - K_src.cx) / K_src.fx, (r - K_src.cy) / K_src.fy, 1.0);
      out.coeff(r, c) = r3.dot(ray);
    }
  return out;
}

// Warps every valid source pixel into the destination camera:
// backproject, apply T_dst_src, project with K_dst. Pixels that land behind
// the destination camera or outside its sampling domain are marked invalid;
// the operation never aborts. Occlusions are kept (no z-buffer): downstream
// losses handle them by residual trimming.
inline WarpResult warp_depth(const DepthMap& src_depth, const CameraIntrinsics& K_src,
                             const CameraIntrinsics& K_dst, const RigidTransform& T_dst_src) {
  const int rows = src_depth.rows(), cols = src_depth.cols();
  WarpResult out;
  out.dst_frame_depth = DepthMap(rows, cols);
  out.dst_coords = PixelCoordGrid(rows, cols);

  // Identity rigs short-circuit so the documented no-op is exact to the bit.
  if (T_dst_src.is_identity() && K_src == K_dst) {
    out.dst_frame_depth = src_depth;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        out.dst_coords.x(r, c) = static_cast<double>(c);
        out.dst_coords.y(r, c) = static_cast<double>(r);
        out.dst_coords.valid(r, c) = src_depth.valid(r, c);
      }
    return out;
  }

  const Eigen::Matrix3d R = T_dst_src.rotation;
  const Eigen::Vector3d t = T_dst_src.translation;
  const double xmax = static_cast<double>(K_dst.width - 1);
  const double ymax = static_cast<double>(K_dst.height - 1);

  parallel_rows(rows, [&](int r) {
    for (int c = 0; c < cols; ++c) {
      if (!src_depth.valid(r, c)) continue;
      const double d = src_depth.values(r, c);
      const Eigen::Vector3d p(d * (c - K_src.cx) / K_src.fx, d * (r - K_src.cy) / K_src.fy, d);
      const Eigen::Vector3d q = R * p + t;
      if (q.z() <= kBehindCameraEps) continue;
      const double u = K_dst.fx * q.x() / q.z() + K_dst.cx;
      const double v = K_dst.fy * q.y() / q.z() + K_dst.cy;
      if (u < 0.0 || u > xmax || v < 0.0 || v > ymax) continue;
      out.dst_frame_depth.values(r, c) = q.z();
      out.dst_frame_depth.valid(r, c) = 1;
      out.dst_coords.x(r, c) = u;
      out.dst_coords.y(r, c) = v;
      out.dst_coords.valid(r, c) = 1;
    }
  });
  return out;
}

struct SampledGrid {
  Grid<double> values;
  Mask valid;
};

namespace detail {

struct BilinearTaps {
  int x0, y0, x1, y1;
  double w00, w10, w01, w11;  // weights for (y0,x0), (y0,x1), (y1,x0), (y1,x1)
  bool in_domain;
};

inline BilinearTaps bilinear_taps(double x, double y, int width, int height) {
  BilinearTaps t{};
  t.in_domain = !(x < 0.0 || y < 0.0 || x > width - 1 || y > height - 1) &&
                std::isfinite(x) && std::isfinite(y);
  if (!t.in_domain) return t;
  t.x0 = static_cast<int>(std::floor(x));
  t.y0 = static_cast<int>(std::floor(y));
  const double fx = x - t.x0;
  const double fy = y - t.y0;
  t.x1 = t.x0 + 1;
  t.y1 = t.y0 + 1;
  t.w00 = (1.0 - fx) * (1.0 - fy);
  t.w10 = fx * (1.0 - fy);
  t.w01 = (1.0 - fx) * fy;
  t.w11 = fx * fy;
  return t;
}

}  // namespace detail

// Four-neighbor bilinear sampling with mask propagation. A neighbor
// contributes only when its weight is nonzero, so integer and edge
// coordinates read single pixels exactly. Output is invalid where the
// coordinate is invalid/out of domain or any contributing neighbor of the
// map is invalid.
inline SampledGrid bilinear_sample(const Grid<double>& map, const Mask& map_valid,
                                   const PixelCoordGrid& coords) {
  if (!map.same_shape(map_valid)) throw std::invalid_argument("bilinear_sample: map/mask mismatch");
  const int rows = coords.rows(), cols = coords.cols();
  SampledGrid out{Grid<double>(rows, cols, 0.0), Mask(rows, cols, 0)};

  parallel_rows(rows, [&](int r) {
    for (int c = 0; c < cols; ++c) {
      if (!coords.valid(r, c)) continue;
      const auto t = detail::bilinear_taps(coords.x(r, c), coords.y(r, c), map.cols(), map.rows());
      if (!t.in_domain) continue;
      double acc = 0.0;
      bool ok = true;
      auto tap = [&](int y, int x, double w) {
        if (w <= 0.0) return;
        if (y >= map.rows() || x >= map.cols() || !map_valid(y, x)) { ok = false; return; }
        acc += w * map(y, x);
      };
      tap(t.y0, t.x0, t.w00);
      tap(t.y0, t.x1, t.w10);
      tap(t.y1, t.x0, t.w01);
      tap(t.y1, t.x1, t.w11);
      if (!ok) continue;
      out.values(r, c) = acc;
      out.valid(r, c) = 1;
    }
  });
  return out;
}

inline SampledGrid bilinear_sample(const DepthMap& map, const PixelCoordGrid& coords) {
  return bilinear_sample(map.values, map.valid, coords);
}

inline FeatureMap bilinear_sample(const FeatureMap& map, const PixelCoordGrid& coords,
                                  Mask* out_valid) {
  const int rows = coords.rows(), cols = coords.cols();
  FeatureMap out(rows, cols, map.channels(), 0.0);
  Mask valid(rows, cols, 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (!coords.valid(r, c)) continue;
      const auto t = detail::bilinear_taps(coords.x(r, c), coords.y(r, c), map.cols(), map.rows());
      if (!t.in_domain) continue;
      double* dst = out.at(r, c);
      auto tap = [&](int y, int x, double w) {
        if (w <= 0.0) return;
        const double* src = map.at(y, x);
        for (int ch = 0; ch < map.channels(); ++ch) dst[ch] += w * src[ch];
      };
      tap(t.y0, t.x0, t.w00);
      tap(t.y0, t.x1, t.w10);
      tap(t.y1, t.x0, t.w01);
      tap(t.y1, t.x1, t.w11);
      valid(r, c) = 1;
    }
  if (out_valid) *out_valid = valid;
  return out;
}

// Adjoint of bilinear_sample for the value path: accumulates w_k * g into the
// contributing source cells of each sampled pixel. Serial row-major scan so
// the accumulation order is deterministic.
inline Grid<double> bilinear_scatter_grad(const Grid<double>& out_grad, const Mask& out_valid,
                                          const PixelCoordGrid& coords, int src_rows,
                                          int src_cols) {
  Grid<double> src_grad(src_rows, src_cols, 0.0);
  for (int r = 0; r < coords.rows(); ++r)
    for (int c = 0; c < coords.cols(); ++c) {
      if (!out_valid(r, c) || !coords.valid(r, c)) continue;
      const double g = out_grad(r, c);
      if (g == 0.0) continue;
      const auto t = detail::bilinear_taps(coords.x(r, c), coords.y(r, c), src_cols, src_rows);
      if (!t.in_domain) continue;
      auto tap = [&](int y, int x, double w) {
        if (w <= 0.0 || y >= src_rows || x >= src_cols) return;
        src_grad(y, x) += w * g;
      };
      tap(t.y0, t.x0, t.w00);
      tap(t.y0, t.x1, t.w10);
      tap(t.y1, t.x0, t.w01);
      tap(t.y1, t.x1, t.w11);
    }
  return src_grad;
}

// RGB-aligned thermal depth: warps the thermal prediction into the RGB
// camera frame (values stay on the thermal grid), then samples it at the
// RGB->thermal correspondences u_rt produced from the RGB depth.
inline DepthMap warped_thermal_depth(const DepthMap& thermal_depth, const PixelCoordGrid& u_rt,
                                     const CameraIntrinsics& K_t, const CameraIntrinsics& K_r,
                                     const RigidTransform& T_r_t) {
  const WarpResult w = warp_depth(thermal_depth, K_t, K_r, T_r_t);
  const SampledGrid s = bilinear_sample(w.dst_frame_depth, u_rt);
  DepthMap out;
  out.values = s.values;
  out.valid = s.valid;
  out.sanitize();
  return out;
}

}  // namespace xmodal
