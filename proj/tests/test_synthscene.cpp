#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "xmodal/config_json.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/metrics.hpp"
#include "xmodal/synthscene.hpp"

using namespace xmodal;

TEST_CASE("rendered depth of a fronto-parallel plane is constant") {
  Scene scene;
  scene.background_depth = 4.0;
  const CameraIntrinsics K(100, 100, 31.5, 31.5, 64, 64);
  const DepthMap d = render_depth(scene, K, RigidTransform::identity());
  for (size_t i = 0; i < d.values.size(); ++i) {
    REQUIRE(d.valid[i]);
    CHECK(d.values[i] == Catch::Approx(4.0).margin(1e-12));
  }
}

TEST_CASE("ray through a sphere center hits at center minus radius") {
  Scene scene;
  scene.background_depth = 10.0;
  scene.spheres.push_back({{0, 0, 5}, 1.0});
  const CameraIntrinsics K(100, 100, 32, 32, 65, 65);
  const DepthMap d = render_depth(scene, K, RigidTransform::identity());
  CHECK(d.values(32, 32) == Catch::Approx(4.0).margin(1e-12));
  CHECK(d.values(0, 0) == Catch::Approx(scene.background_depth).margin(1e-9));
}

TEST_CASE("rendering is deterministic") {
  Rng rng(1);
  const Scene scene = oracle::random_scene(rng);
  const CameraIntrinsics K(80, 80, 23.5, 17.5, 48, 36);
  const RigidTransform pose(rotation_y(0.01), {0.05, -0.02, 0.0});
  const DepthMap a = render_depth(scene, K, pose);
  const DepthMap b = render_depth(scene, K, pose);
  CHECK(a.values == b.values);
  CHECK(a.valid == b.valid);
}

TEST_CASE("corrupt_depth adds bias inside regions only") {
  DepthMap depth(32, 32, 6.0, true);
  CorruptionSpec spec;
  spec.regions.push_back({4, 4, 8, 8});
  spec.bias = 2.0;
  const CorruptedDepth out = corrupt_depth(depth, spec, 9);
  double region_err = 0.0;
  long region_n = 0;
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) {
      const double err = std::abs(out.depth.values(r, c) - 6.0);
      const bool inside = r >= 4 && r < 12 && c >= 4 && c < 12;
      CHECK(static_cast<bool>(out.corrupted(r, c)) == inside);
      if (inside) {
        region_err += err;
        ++region_n;
      } else {
        CHECK(err == 0.0);
      }
    }
  CHECK(region_err / static_cast<double>(region_n) == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("corrupt_depth with zero magnitudes is the identity") {
  DepthMap depth(8, 8, 3.0, true);
  CorruptionSpec spec;
  spec.regions.push_back({1, 1, 4, 4});
  const CorruptedDepth out = corrupt_depth(depth, spec, 5);
  CHECK(out.depth.values == depth.values);
  CHECK(mask_count(out.corrupted) == 0);

  CorruptionSpec oob;
  oob.regions.push_back({30, 0, 4, 4});
  CHECK_THROWS_AS(corrupt_depth(DepthMap(8, 8, 1.0, true), oob, 0), config_error);
}

TEST_CASE("corrupt_depth is seed-deterministic") {
  DepthMap depth(16, 16, 5.0, true);
  CorruptionSpec spec;
  spec.regions.push_back({2, 2, 6, 6});
  spec.bias = 1.0;
  spec.noise_inside = 0.2;
  spec.noise_outside = 0.05;
  const CorruptedDepth a = corrupt_depth(depth, spec, 1234);
  const CorruptedDepth b = corrupt_depth(depth, spec, 1234);
  CHECK(a.depth.values == b.depth.values);
  const CorruptedDepth c = corrupt_depth(depth, spec, 1235);
  CHECK_FALSE(c.depth.values == a.depth.values);
}

TEST_CASE("oracle confidence is the clamped NLL minimizer") {
  Grid<double> residual(1, 3, 0.0);
  residual[0] = 0.5;
  residual[1] = 0.0;
  residual[2] = 1e6;
  const ConfidenceMap w = oracle_confidence(residual, 0.1);
  CHECK(w[0] == Catch::Approx(0.2).margin(1e-12));
  CHECK(w[1] == kConfidenceHi);
  CHECK(w[2] == kConfidenceLo);

  Grid<double> neg(1, 1, -0.1);
  CHECK_THROWS_AS(oracle_confidence(neg, 0.1), std::domain_error);
}

TEST_CASE("fit_confidence converges to the oracle") {
  // beta = 0.1, |r| = 0.5: optimum 0.2
  const DepthMap gt(1, 1, 5.0, true);
  const DepthMap pred(1, 1, 5.5, true);
  const ConfidenceMap w = fit_confidence(pred, gt, 0.1);
  CHECK(w[0] == Catch::Approx(0.2).margin(1e-3));

  // zero residual: confidence runs to the upper bound
  const ConfidenceMap hi = fit_confidence(gt, gt, 0.1);
  CHECK(hi[0] > 0.99);

  // descent property
  Rng rng(22);
  DepthMap p(4, 4, 0.0, true), g(4, 4, 0.0, true);
  for (size_t i = 0; i < p.values.size(); ++i) {
    g.values[i] = rng.uniform(2.0, 9.0);
    p.values[i] = g.values[i] + rng.uniform(-1.0, 1.0);
  }
  const ConfidenceMap init(4, 4, 0.5);
  const ConfidenceMap fitted = fit_confidence(p, g, 0.1);
  const double before = laplacian_nll(init, p, g, 0.1, 1.0).value;
  const double after = laplacian_nll(fitted, p, g, 0.1, 1.0).value;
  CHECK(after <= before);
}

TEST_CASE("fit_confidence matches the oracle across the ratio range") {
  const double beta = 0.1;
  const std::vector<double> ratios = {2e-6, 1e-4, 1e-3, 0.05, 0.3, 0.5, 0.9, 0.999, 1.0 - 2e-6};
  DepthMap gt(1, static_cast<int>(ratios.size()), 5.0, true);
  DepthMap pred = gt;
  for (size_t i = 0; i < ratios.size(); ++i) pred.values[i] = 5.0 + beta / ratios[i];
  const ConfidenceMap fitted = fit_confidence(pred, gt, beta, 600000, 2.0);
  for (size_t i = 0; i < ratios.size(); ++i) {
    const double target = std::clamp(ratios[i], kConfidenceLo, kConfidenceHi);
    CHECK(fitted[i] == Catch::Approx(target).margin(1e-3));
  }
}

TEST_CASE("warped thermal depth reproduces RGB-frame ground truth on a 0.2 m rig") {
  // Full warp-and-resample chain on noiseless renders of a plane:
  // the sampled warped depth must agree with the RGB-frame ground truth on
  // every co-visible pixel.
  const CameraIntrinsics K(70, 70, 31.5, 31.5, 64, 64);
  const RigidTransform T_t_r(rotation_y(0.0087266462599716),
                             Eigen::Vector3d(-0.2 * std::cos(0.0087266462599716), 0.0,
                                             0.2 * std::sin(0.0087266462599716)));
  Scene scene;
  scene.background_depth = 8.0;
  const DepthMap rgb_gt = render_depth(scene, K, RigidTransform::identity());
  const DepthMap thermal_gt = render_depth(scene, K, T_t_r);
  const WarpResult rt = warp_depth(rgb_gt, K, K, T_t_r);
  const DepthMap breve = warped_thermal_depth(thermal_gt, rt.dst_coords, K, K, T_t_r.inverse());
  long compared = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      if (!breve.valid(r, c)) continue;
      CHECK(std::abs(breve.values(r, c) - rgb_gt.values(r, c)) < 1e-6);
      ++compared;
    }
  CHECK(compared > 3000);
}

TEST_CASE("rig renders are mutually consistent under warping") {
  const CameraIntrinsics K(70, 70, 31.5, 23.5, 64, 48);
  const RigidTransform pose_a = RigidTransform::identity();
  const RigidTransform pose_b(rotation_y(0.012), {-0.2, 0.0, 0.0});
  Rng rng(100);
  for (int i = 0; i < 3; ++i) {
    const Scene scene = oracle::random_scene(rng);
    const oracle::RoundTripStats stats = oracle::warp_round_trip(scene, K, pose_a, K, pose_b);
    CHECK(stats.compared > 500);
    CHECK(stats.max_err < 1e-6);
  }
}

namespace {

DistillConfig small_demo_config() {
  DistillConfig cfg;
  cfg.seed = 11;
  cfg.rgb_camera = CameraIntrinsics(40, 40, 15.5, 15.5, 32, 32);
  cfg.thermal_camera = cfg.rgb_camera;
  cfg.T_thermal_rgb =
      RigidTransform(rotation_y(0.0087266462599716), {-0.2 * std::cos(0.0087266462599716), 0.0,
                                                      0.2 * std::sin(0.0087266462599716)});
  cfg.scene.background_depth = 8.0;
  cfg.scene.planes.push_back({2, 5.0, -1.2, 1.0, -1.2, 1.0});
  cfg.corruption.regions.push_back({4, 4, 16, 16});
  cfg.corruption.bias = 2.0;
  cfg.corruption.noise_inside = 0.05;
  cfg.corruption.noise_outside = 0.01;
  cfg.student_init_scale = 1.05;
  cfg.opt_steps = 600;
  cfg.opt_step_size = 2.0;
  return cfg;
}

}  // namespace

TEST_CASE("distillation demo: confidence weighting beats uniform weighting") {
  const DistillConfig cfg = small_demo_config();
  const DistillReport rep = run_distillation_demo(cfg);
  CHECK(rep.covered_pixels > 400);
  CHECK(rep.absrel_confident < rep.absrel_uniform);
  CHECK(rep.absrel_confident < rep.absrel_init);
  CHECK(rep.improvement_pct >= 10.0);
}

TEST_CASE("distillation demo: clean teacher drives the student to ground truth") {
  // The bundled zero-corruption config; the per-pixel student can only
  // converge up to the null modes of the sampling operator, and this rig
  // keeps them well under the 1e-3 contract.
  const json cfg_json =
      load_json_file(std::string(XMODAL_CONFIG_DIR) + "/distill_demo_clean.json");
  const DistillConfig cfg = distill_config_from_json(cfg_json);
  const DistillReport rep = run_distillation_demo(cfg);
  CHECK(rep.absrel_confident < 1e-3);
  CHECK(rep.absrel_uniform < 1e-3);
}

TEST_CASE("distillation demo is deterministic") {
  const DistillConfig cfg = small_demo_config();
  const DistillReport a = run_distillation_demo(cfg);
  const DistillReport b = run_distillation_demo(cfg);
  CHECK(a.absrel_confident == b.absrel_confident);
  CHECK(a.absrel_uniform == b.absrel_uniform);
  CHECK(a.loss_curve_confident == b.loss_curve_confident);
}

TEST_CASE("residual-proxy confidence provider uses the metadata residual channel") {
  MetadataStack meta;
  meta.channels = FeatureMap(2, 2, MetadataStack::kChannels, 0.0);
  meta.valid = Mask(2, 2, 1);
  meta.channels.at(0, 0, 2) = 0.5;
  meta.channels.at(0, 1, 2) = 0.0;
  meta.channels.at(1, 0, 2) = 2.0;
  meta.channels.at(1, 1, 2) = 0.1;
  const ResidualProxyConfidence provider(0.1);
  const ConfidenceMap w = provider.predict(meta);
  CHECK(w(0, 0) == Catch::Approx(0.2).margin(1e-12));
  CHECK(w(0, 1) == kConfidenceHi);
  CHECK(w(1, 0) == Catch::Approx(0.05).margin(1e-12));
  CHECK(w(1, 1) == Catch::Approx(1.0).margin(1e-6));
}
