#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <cmath>
#include <stdexcept>

namespace xmodal {

// Points with Z at or below this project behind the camera and are culled.
inline constexpr double kBehindCameraEps = 1e-6;

// Pinhole intrinsics. Pixel (u,v) samples the continuous image plane at
// exactly (u,v); the valid sampling domain is [0, width-1] x [0, height-1].
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;  // focal lengths, pixels
  double cx = 0.0, cy = 0.0;  // principal point, pixels
  int width = 0, height = 0;

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, int w, int h)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h) {
    validate();
  }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("intrinsics: focal lengths must be positive");
    if (width < 1 || height < 1) throw std::invalid_argument("intrinsics: image size must be >= 1");
  }

  bool operator==(const CameraIntrinsics& o) const {
    return fx == o.fx && fy == o.fy && cx == o.cx && cy == o.cy && width == o.width &&
           height == o.height;
  }
};

// SE(3) coordinate map X_dst = R * X_src + t. Rotation must be orthonormal
// with det +1 within 1e-9.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  RigidTransform() = default;
  RigidTransform(const Eigen::Matrix3d& R, const Eigen::Vector3d& t)
      : rotation(R), translation(t) {
    validate();
  }

  void validate() const {
    const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > 1e-9)
      throw std::invalid_argument("rigid transform: rotation not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > 1e-9)
      throw std::invalid_argument("rigid transform: rotation determinant must be +1");
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.translation = -(out.rotation * translation);
    return out;
  }

  // Composition: (*this) after other, i.e. X -> this(other(X)).
  RigidTransform compose(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation = rotation * other.rotation;
    out.translation = rotation * other.translation + translation;
    return out;
  }

  bool is_identity() const {
    return rotation == Eigen::Matrix3d::Identity() && translation == Eigen::Vector3d::Zero();
  }

  static RigidTransform identity() { return RigidTransform{}; }
};

inline Eigen::Matrix3d rotation_x(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d R;
  R << 1, 0, 0, 0, c, -s, 0, s, c;
  return R;
}

inline Eigen::Matrix3d rotation_y(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d R;
  R << c, 0, s, 0, 1, 0, -s, 0, c;
  return R;
}

inline Eigen::Matrix3d rotation_z(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d R;
  R << c, -s, 0, s, c, 0, 0, 0, 1;
  return R;
}

}  // namespace xmodal
