#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "xmodal/camera.hpp"
#include "xmodal/synthscene.hpp"
#include "xmodal/warp.hpp"

using namespace xmodal;

TEST_CASE("project maps camera points to pixels") {
  const CameraIntrinsics K(100, 100, 320, 240, 640, 480);
  const Projection on_axis = project({0, 0, 2}, K);
  CHECK(on_axis.pixel.x() == 320.0);
  CHECK(on_axis.pixel.y() == 240.0);
  CHECK(on_axis.depth == 2.0);

  const CameraIntrinsics K0(100, 100, 0, 0, 640, 480);
  const Projection p = project({1, 1, 2}, K0);
  CHECK(p.pixel.x() == Catch::Approx(50.0).margin(1e-12));
  CHECK(p.pixel.y() == Catch::Approx(50.0).margin(1e-12));
  CHECK(p.depth == 2.0);

  CHECK_THROWS_AS(project({0, 0, -1}, K), std::domain_error);
  CHECK_THROWS_AS(project({0, 0, 0}, K), std::domain_error);
}

TEST_CASE("backproject inverts projection") {
  const CameraIntrinsics K(100, 100, 320, 240, 640, 480);
  const Eigen::Vector3d pp = backproject({320, 240}, 5, K);
  CHECK(pp.isApprox(Eigen::Vector3d(0, 0, 5), 0));

  const CameraIntrinsics K0(100, 100, 0, 0, 640, 480);
  const Eigen::Vector3d q = backproject({50, 50}, 2, K0);
  CHECK(q.x() == Catch::Approx(1.0).margin(1e-12));
  CHECK(q.y() == Catch::Approx(1.0).margin(1e-12));
  CHECK(q.z() == 2.0);

  CHECK_THROWS_AS(backproject({0, 0}, 0.0, K), std::domain_error);
  CHECK_THROWS_AS(backproject({0, 0}, -1.0, K), std::domain_error);
}

TEST_CASE("project/backproject round trip on random pixels") {
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    const CameraIntrinsics K(rng.uniform(50, 900), rng.uniform(50, 900), rng.uniform(100, 500),
                             rng.uniform(100, 400), 1024, 768);
    const Eigen::Vector2d pixel(rng.uniform(0, 1023), rng.uniform(0, 767));
    const double depth = rng.uniform(0.2, 50.0);
    const Projection back = project(backproject(pixel, depth, K), K);
    CHECK(std::abs(back.pixel.x() - pixel.x()) < 1e-9);
    CHECK(std::abs(back.pixel.y() - pixel.y()) < 1e-9);
    CHECK(std::abs(back.depth - depth) < 1e-12);
  }
}

TEST_CASE("rigid transform validates orthonormality") {
  Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
  bad(0, 0) = 1.001;
  CHECK_THROWS_AS(RigidTransform(bad, Eigen::Vector3d::Zero()), std::invalid_argument);

  Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity();
  reflect(2, 2) = -1.0;  // orthonormal but det -1
  CHECK_THROWS_AS(RigidTransform(reflect, Eigen::Vector3d::Zero()), std::invalid_argument);

  const RigidTransform T(rotation_y(0.3), {1, 2, 3});
  const RigidTransform round = T.compose(T.inverse());
  CHECK(round.rotation.isApprox(Eigen::Matrix3d::Identity(), 1e-12));
  CHECK(round.translation.norm() < 1e-12);
}

TEST_CASE("identity-rig warp is a bit-exact no-op") {
  const CameraIntrinsics K(90.5, 91.25, 31.5, 23.5, 64, 48);
  Rng rng(3);
  DepthMap src(48, 64);
  for (size_t i = 0; i < src.values.size(); ++i) {
    src.values[i] = rng.uniform(0.5, 20.0);
    src.valid[i] = rng.uniform() > 0.1;
  }
  const WarpResult w = warp_depth(src, K, K, RigidTransform::identity());
  CHECK(w.dst_frame_depth.values == src.values);
  CHECK(w.dst_frame_depth.valid == src.valid);
  for (int r = 0; r < src.rows(); ++r)
    for (int c = 0; c < src.cols(); ++c) {
      CHECK(w.dst_coords.valid(r, c) == src.valid(r, c));
      if (!src.valid(r, c)) continue;
      CHECK(w.dst_coords.x(r, c) == static_cast<double>(c));
      CHECK(w.dst_coords.y(r, c) == static_cast<double>(r));
    }
}

TEST_CASE("warp of a fronto-parallel plane under forward translation") {
  const CameraIntrinsics K(100, 100, 320, 240, 640, 480);
  DepthMap plane(480, 640, 4.0, true);
  // camera moved 1 m toward the plane
  const RigidTransform T(Eigen::Matrix3d::Identity(), {0, 0, -1});
  const WarpResult w = warp_depth(plane, K, K, T);
  const int r = 240, c = 420;  // (cx+100, cy)
  REQUIRE(w.dst_frame_depth.valid(r, c));
  CHECK(w.dst_frame_depth.values(r, c) == Catch::Approx(3.0).margin(1e-12));
  CHECK(w.dst_coords.x(r, c) == Catch::Approx(320.0 + 400.0 / 3.0).margin(1e-9));
  CHECK(w.dst_coords.y(r, c) == Catch::Approx(240.0).margin(1e-9));
}

TEST_CASE("warp culls pixels pushed behind the destination camera") {
  const CameraIntrinsics K(100, 100, 16, 16, 32, 32);
  DepthMap src(32, 32, 5.0, true);
  src.values(3, 3) = 1.0;
  const RigidTransform T(Eigen::Matrix3d::Identity(), {0, 0, -1});
  const WarpResult w = warp_depth(src, K, K, T);
  CHECK_FALSE(w.dst_frame_depth.valid(3, 3));
  CHECK_FALSE(w.dst_coords.valid(3, 3));
  CHECK(w.dst_frame_depth.valid(16, 16));
}

TEST_CASE("warp coordinates stay in the destination sampling domain") {
  Rng rng(11);
  const CameraIntrinsics K_src(60, 60, 15.5, 15.5, 32, 32);
  const CameraIntrinsics K_dst(55, 58, 14.0, 16.0, 30, 34);
  DepthMap src(32, 32);
  for (size_t i = 0; i < src.values.size(); ++i) {
    src.values[i] = rng.uniform(1.0, 12.0);
    src.valid[i] = rng.uniform() > 0.05;
  }
  const RigidTransform T(rotation_y(0.05), {-0.2, 0.03, 0.01});
  const WarpResult w = warp_depth(src, K_src, K_dst, T);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) {
      if (!w.dst_coords.valid(r, c)) continue;
      CHECK(w.dst_coords.x(r, c) >= 0.0);
      CHECK(w.dst_coords.x(r, c) <= K_dst.width - 1);
      CHECK(w.dst_coords.y(r, c) >= 0.0);
      CHECK(w.dst_coords.y(r, c) <= K_dst.height - 1);
    }
}

TEST_CASE("bilinear sampling hits grid nodes exactly") {
  Grid<double> map(3, 3, 0.0);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) map(r, c) = 10.0 * r + c;
  Mask valid(3, 3, 1);
  PixelCoordGrid coords(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      coords.x(r, c) = c;
      coords.y(r, c) = r;
      coords.valid(r, c) = 1;
    }
  const SampledGrid s = bilinear_sample(map, valid, coords);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      REQUIRE(s.valid(r, c));
      CHECK(s.values(r, c) == map(r, c));  // includes the far corner at (2,2)
    }
}

TEST_CASE("bilinear sampling interpolates cell centers and masks out-of-domain") {
  Grid<double> map(2, 2, 0.0);
  map(0, 0) = 0;
  map(0, 1) = 2;
  map(1, 0) = 4;
  map(1, 1) = 6;
  Mask valid(2, 2, 1);
  PixelCoordGrid coords(1, 2);
  coords.x(0, 0) = 0.5;
  coords.y(0, 0) = 0.5;
  coords.valid(0, 0) = 1;
  coords.x(0, 1) = -0.1;
  coords.y(0, 1) = 0.0;
  coords.valid(0, 1) = 1;
  const SampledGrid s = bilinear_sample(map, valid, coords);
  REQUIRE(s.valid(0, 0));
  CHECK(s.values(0, 0) == Catch::Approx(3.0).margin(1e-15));
  CHECK_FALSE(s.valid(0, 1));
}

TEST_CASE("bilinear sampling masks contributing invalid neighbors only") {
  Grid<double> map(2, 2, 1.0);
  Mask valid(2, 2, 1);
  valid(0, 1) = 0;
  PixelCoordGrid coords(1, 2);
  coords.x(0, 0) = 0.25;  // touches the invalid (0,1) with weight > 0
  coords.y(0, 0) = 0.0;
  coords.valid(0, 0) = 1;
  coords.x(0, 1) = 0.0;  // integer coordinate, invalid neighbor has weight 0
  coords.y(0, 1) = 0.5;
  coords.valid(0, 1) = 1;
  const SampledGrid s = bilinear_sample(map, valid, coords);
  CHECK_FALSE(s.valid(0, 0));
  CHECK(s.valid(0, 1));
}

TEST_CASE("warped thermal depth equals RGB depth on an identity rig") {
  const CameraIntrinsics K(70, 70, 15.5, 15.5, 32, 32);
  Rng rng(5);
  DepthMap depth(32, 32, 0.0, true);
  for (size_t i = 0; i < depth.values.size(); ++i) depth.values[i] = rng.uniform(2.0, 9.0);
  const WarpResult rt = warp_depth(depth, K, K, RigidTransform::identity());
  const DepthMap breve =
      warped_thermal_depth(depth, rt.dst_coords, K, K, RigidTransform::identity());
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) {
      REQUIRE(breve.valid(r, c));
      CHECK(breve.values(r, c) == depth.values(r, c));
    }
}

TEST_CASE("thermal pixels landing outside the RGB image are masked") {
  const CameraIntrinsics K(70, 70, 15.5, 15.5, 32, 32);
  DepthMap thermal(32, 32, 5.0, true);
  // Large baseline pushes part of the image out of the destination view.
  const RigidTransform T_r_t(Eigen::Matrix3d::Identity(), {2.0, 0, 0});
  const WarpResult w = warp_depth(thermal, K, K, T_r_t);
  long culled = 0;
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      if (!w.dst_coords.valid(r, c)) ++culled;
  CHECK(culled > 0);  // those pixels can never join the consistency set
}

TEST_CASE("transformed depth is affine in source depth") {
  const CameraIntrinsics K(80, 85, 16.2, 15.1, 32, 32);
  const RigidTransform T(rotation_y(0.2) * rotation_x(-0.1), {0.3, -0.2, 0.15});
  const DepthTransformCoeffs coeffs = depth_transform_coeffs(32, 32, K, T);
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int r = static_cast<int>(rng.uniform(0, 32));
    const int c = static_cast<int>(rng.uniform(0, 32));
    const double d = rng.uniform(1.0, 10.0);
    const double h = 1e-4;
    auto transformed_z = [&](double depth) {
      const Eigen::Vector3d p(depth * (c - K.cx) / K.fx, depth * (r - K.cy) / K.fy, depth);
      return (T.rotation * p + T.translation).z();
    };
    const double fd = (transformed_z(d + h) - transformed_z(d - h)) / (2.0 * h);
    CHECK(std::abs(fd - coeffs.coeff(r, c)) < 1e-8);
    CHECK(std::abs(transformed_z(d) - (coeffs.coeff(r, c) * d + coeffs.offset)) < 1e-9);
  }
}
