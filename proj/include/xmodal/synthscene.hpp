#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "xmodal/camera.hpp"
#include "xmodal/error.hpp"
#include "xmodal/grid.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/metrics.hpp"
#include "xmodal/parallel.hpp"
#include "xmodal/similarity.hpp"
#include "xmodal/warp.hpp"

namespace xmodal {

// Deterministic RNG; explicit Box-Muller so streams do not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  double uniform() {  // [0,1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  std::uint64_t next() {  // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Axis-aligned rectangular plane patch: the plane {axis coordinate == value}
// bounded on the two remaining world axes (in x,y,z order).
struct PlanePatch {
  int axis = 2;  // 0=x, 1=y, 2=z
  double value = 0.0;
  double lo0 = 0.0, hi0 = 0.0;
  double lo1 = 0.0, hi1 = 0.0;
};

struct Sphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
};

// Scene primitives plus an infinite background plane z = background_depth
// (world frame). Valid scenes guarantee every rig camera ray reaches at
// least the background.
struct Scene {
  std::vector<PlanePatch> planes;
  std::vector<Sphere> spheres;
  double background_depth = 10.0;
  std::uint64_t seed = 0;
};

struct RayHit {
  static constexpr int kBackgroundId = -1;
  double depth = 0.0;  // camera-frame Z of the hit
  int primitive = kBackgroundId;
};

namespace detail {

inline constexpr double kRayEps = 1e-9;

// Intersects origin + s*dir with the scene; dir is scaled so that s equals
// the camera-frame depth. Returns the nearest hit, if any.
inline std::optional<RayHit> first_hit(const Scene& scene, const Eigen::Vector3d& origin,
                                       const Eigen::Vector3d& dir) {
  std::optional<RayHit> best;
  auto consider = [&](double s, int prim) {
    if (s <= kRayEps) return;
    if (!best || s < best->depth) best = RayHit{s, prim};
  };

  for (size_t i = 0; i < scene.planes.size(); ++i) {
    const PlanePatch& p = scene.planes[i];
    const double d = dir(p.axis);
    if (std::abs(d) < 1e-15) continue;
    const double s = (p.value - origin(p.axis)) / d;
    if (s <= kRayEps) continue;
    const Eigen::Vector3d hit = origin + s * dir;
    const int a0 = (p.axis == 0) ? 1 : 0;
    const int a1 = (p.axis == 2) ? 1 : 2;
    if (hit(a0) < p.lo0 || hit(a0) > p.hi0 || hit(a1) < p.lo1 || hit(a1) > p.hi1) continue;
    consider(s, static_cast<int>(i));
  }
  for (size_t i = 0; i < scene.spheres.size(); ++i) {
    const Sphere& sp = scene.spheres[i];
    const Eigen::Vector3d oc = origin - sp.center;
    const double a = dir.squaredNorm();
    const double b = 2.0 * dir.dot(oc);
    const double c = oc.squaredNorm() - sp.radius * sp.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) continue;
    const double sq = std::sqrt(disc);
    const double s0 = (-b - sq) / (2.0 * a);
    const double s1 = (-b + sq) / (2.0 * a);
    const int prim = static_cast<int>(scene.planes.size() + i);
    if (s0 > kRayEps)
      consider(s0, prim);
    else if (s1 > kRayEps)
      consider(s1, prim);
  }
  if (std::abs(dir.z()) >= 1e-15) {
    const double s = (scene.background_depth - origin.z()) / dir.z();
    consider(s, RayHit::kBackgroundId);
  }
  return best;
}

}  // namespace detail

// Camera ray through continuous pixel (x, y); pose maps world -> camera, so
// the returned direction is scaled to make the ray parameter equal camera
// depth.
struct CameraRay {
  Eigen::Vector3d origin;  // camera center, world frame
  Eigen::Vector3d dir;     // world frame, camera-Z-normalized
};

inline CameraRay camera_ray(const CameraIntrinsics& K, const RigidTransform& cam_from_world,
                            double x, double y) {
  const RigidTransform world_from_cam = cam_from_world.inverse();
  CameraRay ray;
  ray.origin = world_from_cam.translation;
  ray.dir = world_from_cam.rotation *
            Eigen::Vector3d((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
  return ray;
}

inline std::optional<RayHit> render_hit_at(const Scene& scene, const CameraIntrinsics& K,
                                           const RigidTransform& cam_from_world, double x,
                                           double y) {
  const CameraRay ray = camera_ray(K, cam_from_world, x, y);
  return detail::first_hit(scene, ray.origin, ray.dir);
}

// Analytic ground-truth depth render; closed-form per pixel, deterministic.
// primitive_ids, when requested, records which primitive each pixel saw.
inline DepthMap render_depth(const Scene& scene, const CameraIntrinsics& K,
                             const RigidTransform& cam_from_world,
                             Grid<int>* primitive_ids = nullptr) {
  DepthMap out(K.height, K.width);
  if (primitive_ids) *primitive_ids = Grid<int>(K.height, K.width, RayHit::kBackgroundId - 1);
  parallel_rows(K.height, [&](int r) {
    for (int c = 0; c < K.width; ++c) {
      const auto hit = render_hit_at(scene, K, cam_from_world, c, r);
      if (!hit) continue;
      out.values(r, c) = hit->depth;
      out.valid(r, c) = 1;
      if (primitive_ids) (*primitive_ids)(r, c) = hit->primitive;
    }
  });
  return out;
}

// Distance from a hit to the silhouette of its primitive, used by test
// oracles to exclude pixels whose visibility flips under roundoff. Rect
// patches report the in-plane distance to the nearest edge; spheres the
// half-chord of the ray (small when grazing); the background is never
// marginal.
inline double hit_boundary_margin(const Scene& scene, const CameraRay& ray, const RayHit& hit) {
  if (hit.primitive == RayHit::kBackgroundId) return std::numeric_limits<double>::infinity();
  const size_t idx = static_cast<size_t>(hit.primitive);
  if (idx < scene.planes.size()) {
    const PlanePatch& p = scene.planes[idx];
    const Eigen::Vector3d pt = ray.origin + hit.depth * ray.dir;
    const int a0 = (p.axis == 0) ? 1 : 0;
    const int a1 = (p.axis == 2) ? 1 : 2;
    return std::min({pt(a0) - p.lo0, p.hi0 - pt(a0), pt(a1) - p.lo1, p.hi1 - pt(a1)});
  }
  const Sphere& sp = scene.spheres[idx - scene.planes.size()];
  const Eigen::Vector3d oc = ray.origin - sp.center;
  const double a = ray.dir.squaredNorm();
  const double b = 2.0 * ray.dir.dot(oc);
  const double c = oc.squaredNorm() - sp.radius * sp.radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc <= 0.0) return 0.0;
  return std::sqrt(disc) / (2.0 * a);
}

// Whether the world point X (known to lie on a surface) is blocked from the
// camera by a strictly nearer intersection. tol is in meters of depth.
inline bool point_occluded(const Scene& scene, const CameraIntrinsics& K,
                           const RigidTransform& cam_from_world, const Eigen::Vector3d& x_world,
                           double tol = 1e-6) {
  const Eigen::Vector3d x_cam = cam_from_world.apply(x_world);
  if (x_cam.z() <= kBehindCameraEps) return true;
  const Projection proj = project(x_cam, K);
  const auto hit = render_hit_at(scene, K, cam_from_world, proj.pixel.x(), proj.pixel.y());
  if (!hit) return true;
  return hit->depth < x_cam.z() - tol;
}

// ---------------------------------------------------------------------------
// Teacher corruption
// ---------------------------------------------------------------------------

struct CorruptionRegion {
  int x = 0, y = 0, width = 0, height = 0;
};

struct CorruptionSpec {
  std::vector<CorruptionRegion> regions;
  double bias = 0.0;           // meters, added inside regions
  double noise_inside = 0.0;   // meters, 1-sigma inside regions
  double noise_outside = 0.0;  // meters, 1-sigma elsewhere
};

struct CorruptedDepth {
  DepthMap depth;
  Mask corrupted;  // pixels belonging to a region with a nonzero effect
};

inline CorruptedDepth corrupt_depth(const DepthMap& depth, const CorruptionSpec& spec,
                                    std::uint64_t seed) {
  for (const auto& reg : spec.regions) {
    if (reg.x < 0 || reg.y < 0 || reg.width < 0 || reg.height < 0 ||
        reg.x + reg.width > depth.cols() || reg.y + reg.height > depth.rows())
      throw config_error("corrupt_depth: region outside image bounds");
  }
  CorruptedDepth out;
  out.depth = depth;
  out.corrupted = Mask(depth.rows(), depth.cols(), 0);
  const bool region_effect = spec.bias != 0.0 || spec.noise_inside != 0.0;
  Mask in_region(depth.rows(), depth.cols(), 0);
  for (const auto& reg : spec.regions)
    for (int r = reg.y; r < reg.y + reg.height; ++r)
      for (int c = reg.x; c < reg.x + reg.width; ++c) in_region(r, c) = 1;

  Rng rng(seed);
  for (int r = 0; r < depth.rows(); ++r)
    for (int c = 0; c < depth.cols(); ++c) {
      if (!out.depth.valid(r, c)) continue;
      if (in_region(r, c)) {
        out.depth.values(r, c) += spec.bias + spec.noise_inside * rng.normal();
        if (region_effect) out.corrupted(r, c) = 1;
      } else if (spec.noise_outside != 0.0) {
        out.depth.values(r, c) += spec.noise_outside * rng.normal();
      }
    }
  out.depth.sanitize();
  return out;
}

// ---------------------------------------------------------------------------
// Per-pixel confidence
// ---------------------------------------------------------------------------

// Closed-form per-pixel minimizer of the Laplacian NLL: W = beta / |r|,
// clamped into the open confidence interval.
inline ConfidenceMap oracle_confidence(const Grid<double>& residual, double beta) {
  ConfidenceMap out(residual.rows(), residual.cols(), 0.0);
  for (size_t i = 0; i < residual.size(); ++i) {
    if (residual[i] < 0.0) throw std::domain_error("oracle_confidence: residual must be >= 0");
    out[i] = std::clamp(beta / std::max(residual[i], 1e-9), kConfidenceLo, kConfidenceHi);
  }
  return out;
}

// Gradient descent on logit-parameterized per-pixel confidence, minimizing
// the per-pixel Laplacian NLL  W|r| - beta log W. The update uses the stable
// form  dL/dtheta = (1-W)(|r| W - beta)  and is scaled by 1/max(|r|, beta)
// so one fixed step size covers residual magnitudes spanning several orders.
// Starts at W = 0.5. Pixels without joint validity stay at the start value.
inline ConfidenceMap fit_confidence(const DepthMap& pred, const DepthMap& gt, double beta,
                                    long steps = 200000, double step_size = 2.0) {
  if (!pred.values.same_shape(gt.values)) throw std::invalid_argument("fit_confidence: shape mismatch");
  if (!(beta >= 0.0)) throw std::invalid_argument("fit_confidence: beta must be >= 0");
  const Mask base = mask_and(pred.valid, gt.valid);
  ConfidenceMap out(pred.rows(), pred.cols(), 0.5);
  for (size_t i = 0; i < base.size(); ++i) {
    if (!base[i]) continue;
    const double r = std::abs(pred.values[i] - gt.values[i]);
    const double scale = step_size / std::max({r, beta, 1e-12});
    double theta = 0.0;
    double w = 0.5;
    for (long s = 0; s < steps; ++s) {
      const double g = (1.0 - w) * (r * w - beta);
      const double update = scale * g;
      if (!std::isfinite(update))
        throw std::domain_error("fit_confidence: diverged at pixel " + std::to_string(i) +
                                ", step " + std::to_string(s) + ", theta " + std::to_string(theta));
      theta -= update;
      w = 1.0 / (1.0 + std::exp(-theta));
      if (std::abs(update) < 1e-13) break;
    }
    out[i] = w;
  }
  return out;
}

// Pluggable confidence source for learned predictors operating on the
// 8-channel metadata stack.
class ConfidenceProvider {
 public:
  virtual ~ConfidenceProvider() = default;
  virtual ConfidenceMap predict(const MetadataStack& metadata) const = 0;
};

// Closed-form provider: treats the metadata's L1 residual channel as the
// Laplacian residual.
class ResidualProxyConfidence final : public ConfidenceProvider {
 public:
  explicit ResidualProxyConfidence(double beta) : beta_(beta) {}
  ConfidenceMap predict(const MetadataStack& metadata) const override {
    return oracle_confidence(metadata.channel(2), beta_);
  }

 private:
  double beta_;
};

// ---------------------------------------------------------------------------
// Distillation demo
// ---------------------------------------------------------------------------

enum class ConfidenceMode { kOracle, kFitted, kUniform };

struct DistillConfig {
  std::uint64_t seed = 7;
  CameraIntrinsics rgb_camera;
  CameraIntrinsics thermal_camera;
  RigidTransform T_thermal_rgb;  // RGB camera frame -> thermal camera frame
  Scene scene;
  CorruptionSpec corruption;
  double student_init_scale = 1.05;
  ConfidenceMode confidence_mode = ConfidenceMode::kOracle;
  double beta = 0.1;
  long fit_steps = 200000;
  double fit_step_size = 2.0;
  long opt_steps = 1000;
  double opt_step_size = 6.0;
  double keep_fraction = 0.8;
  double sim_keep = 0.8;

  void validate() const {
    rgb_camera.validate();
    thermal_camera.validate();
    T_thermal_rgb.validate();
    if (!(student_init_scale > 0.0)) throw config_error("student_init_scale must be positive");
    if (opt_steps < 1 || !(opt_step_size > 0.0)) throw config_error("bad optimizer settings");
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0 || !(sim_keep > 0.0) || sim_keep > 1.0)
      throw config_error("keep fractions must be in (0,1]");
    for (const auto& reg : corruption.regions)
      if (reg.x < 0 || reg.y < 0 || reg.x + reg.width > rgb_camera.width ||
          reg.y + reg.height > rgb_camera.height)
        throw config_error("corruption region outside RGB image bounds");
  }
};

struct DistillReport {
  double absrel_init = 0.0;
  double absrel_confident = 0.0;
  double absrel_uniform = 0.0;
  double improvement_pct = 0.0;
  long covered_pixels = 0;
  std::vector<double> loss_curve_confident;
  std::vector<double> loss_curve_uniform;
  // Artifacts for optional dumps.
  DepthMap rgb_gt, thermal_gt, teacher;
  DepthMap student_init, student_confident, student_uniform;
  ConfidenceMap confidence;
  Mask coverage;
};

namespace detail {

// Thermal pixels the consistency gradient can actually steer: those whose
// accumulated bilinear weight over validly warped RGB samples reaches at
// least a quarter of a full tap. Image-edge slivers below that receive
// negligible signal and are not counted as supervised.
inline constexpr double kMinSupervisionWeight = 0.25;

inline Mask supervision_coverage(const DepthMap& student, const PixelCoordGrid& u_rt,
                                 const CameraIntrinsics& K_t, const CameraIntrinsics& K_r,
                                 const RigidTransform& T_r_t) {
  const WarpResult w = warp_depth(student, K_t, K_r, T_r_t);
  const SampledGrid s = bilinear_sample(w.dst_frame_depth, u_rt);
  Grid<double> ones(s.values.rows(), s.values.cols(), 1.0);
  const Grid<double> weight_sum =
      bilinear_scatter_grad(ones, s.valid, u_rt, student.rows(), student.cols());
  Mask cov(student.rows(), student.cols(), 0);
  for (size_t i = 0; i < cov.size(); ++i)
    cov[i] = weight_sum[i] >= kMinSupervisionWeight ? 1 : 0;
  return cov;
}

}  // namespace detail

// Runs the toy confidence-aware distillation experiment: renders rig ground
// truth, corrupts the RGB teacher, and trains a per-pixel thermal student
// with the consistency loss through the full warp chain, once with the
// selected confidence and once with uniform weights. Reports student AbsRel
// against thermal ground truth over the supervised (covered) pixels.
inline DistillReport run_distillation_demo(const DistillConfig& cfg) {
  cfg.validate();
  DistillReport rep;

  const RigidTransform rgb_pose = RigidTransform::identity();  // world == RGB frame
  const RigidTransform& thermal_pose = cfg.T_thermal_rgb;
  rep.rgb_gt = render_depth(cfg.scene, cfg.rgb_camera, rgb_pose);
  rep.thermal_gt = render_depth(cfg.scene, cfg.thermal_camera, thermal_pose);

  CorruptedDepth teacher = corrupt_depth(rep.rgb_gt, cfg.corruption, cfg.seed);
  rep.teacher = teacher.depth;

  // Correspondences from the (frozen) teacher depth, RGB->thermal direction.
  const RigidTransform T_t_r = cfg.T_thermal_rgb;
  const RigidTransform T_r_t = cfg.T_thermal_rgb.inverse();
  const WarpResult rgb_to_thermal =
      warp_depth(rep.teacher, cfg.rgb_camera, cfg.thermal_camera, T_t_r);
  const PixelCoordGrid& u_rt = rgb_to_thermal.dst_coords;

  // Teacher confidence from ground-truth residuals (the supervised phase of
  // the confidence network, collapsed to its per-pixel optimum).
  Grid<double> residual(rep.teacher.rows(), rep.teacher.cols(), 0.0);
  for (size_t i = 0; i < residual.size(); ++i)
    if (rep.teacher.valid[i] && rep.rgb_gt.valid[i])
      residual[i] = std::abs(rep.teacher.values[i] - rep.rgb_gt.values[i]);
  switch (cfg.confidence_mode) {
    case ConfidenceMode::kOracle:
      rep.confidence = oracle_confidence(residual, cfg.beta);
      break;
    case ConfidenceMode::kFitted:
      rep.confidence = fit_confidence(rep.teacher, rep.rgb_gt, cfg.beta, cfg.fit_steps,
                                      cfg.fit_step_size);
      break;
    case ConfidenceMode::kUniform:
      rep.confidence = ConfidenceMap(rep.teacher.rows(), rep.teacher.cols(), 1.0);
      break;
  }
  const ConfidenceMap uniform(rep.teacher.rows(), rep.teacher.cols(), 1.0);

  // Student: dense per-pixel thermal depth, biased copy of the thermal GT.
  rep.student_init = rep.thermal_gt;
  for (size_t i = 0; i < rep.student_init.values.size(); ++i)
    rep.student_init.values[i] *= cfg.student_init_scale;

  const SimilarityMap sim_all(rep.rgb_gt.rows(), rep.rgb_gt.cols(), 1.0, true);

  rep.coverage = detail::supervision_coverage(rep.student_init, u_rt, cfg.thermal_camera,
                                              cfg.rgb_camera, T_r_t);
  for (size_t i = 0; i < rep.coverage.size(); ++i)
    rep.coverage[i] = rep.coverage[i] && rep.thermal_gt.valid[i];
  rep.covered_pixels = mask_count(rep.coverage);
  if (rep.covered_pixels == 0) throw std::domain_error("distillation demo: no covered pixels");

  auto optimize = [&](const ConfidenceMap& w, std::vector<double>& curve) {
    DepthMap student = rep.student_init;
    curve.clear();
    curve.reserve(static_cast<size_t>(cfg.opt_steps));
    for (long s = 0; s < cfg.opt_steps; ++s) {
      LossResult res = consistency_through_warp(w, rep.teacher, student, u_rt,
                                                cfg.thermal_camera, cfg.rgb_camera, T_r_t,
                                                sim_all, cfg.keep_fraction, cfg.sim_keep);
      curve.push_back(res.value);
      const Grid<double>& g = res.gradients.at("thermal_depth");
      for (size_t i = 0; i < student.values.size(); ++i) {
        student.values[i] -= cfg.opt_step_size * g[i];
        if (student.values[i] < 0.01) student.values[i] = 0.01;  // keep depths physical
      }
    }
    return student;
  };

  rep.student_confident = optimize(rep.confidence, rep.loss_curve_confident);
  rep.student_uniform = optimize(uniform, rep.loss_curve_uniform);

  rep.absrel_init = compute_metrics(rep.student_init, rep.thermal_gt, rep.coverage).abs_rel;
  rep.absrel_confident =
      compute_metrics(rep.student_confident, rep.thermal_gt, rep.coverage).abs_rel;
  rep.absrel_uniform = compute_metrics(rep.student_uniform, rep.thermal_gt, rep.coverage).abs_rel;
  rep.improvement_pct =
      100.0 * (rep.absrel_init - rep.absrel_confident) / std::max(rep.absrel_init, 1e-300);
  return rep;
}

}  // namespace xmodal
