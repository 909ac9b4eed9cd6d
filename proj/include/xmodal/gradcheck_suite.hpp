#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "xmodal/gradcheck.hpp"
#include "xmodal/grid.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/synthscene.hpp"
#include "xmodal/warp.hpp"

namespace xmodal {

struct ProbeReport {
  std::string name;
  std::uint64_t seed = 0;
  GradCheckReport check;
};

struct GradSuiteReport {
  double max_rel_error = 0.0;
  long num_checked = 0;
  long num_skipped_kinks = 0;
  std::string worst_probe;
  std::vector<ProbeReport> probes;
};

namespace detail {

inline DepthMap random_depth(Rng& rng, int rows, int cols, double invalid_frac = 0.05) {
  DepthMap d(rows, cols);
  for (size_t i = 0; i < d.values.size(); ++i) {
    d.values[i] = rng.uniform(2.0, 10.0);
    d.valid[i] = rng.uniform() >= invalid_frac;
  }
  return d;
}

inline void accumulate(GradSuiteReport& suite, ProbeReport rep) {
  suite.num_checked += rep.check.num_checked;
  suite.num_skipped_kinks += rep.check.num_skipped_kinks;
  if (rep.check.max_rel_error > suite.max_rel_error) {
    suite.max_rel_error = rep.check.max_rel_error;
    suite.worst_probe = rep.name;
  }
  suite.probes.push_back(std::move(rep));
}

}  // namespace detail

// Finite-difference verification of every analytic gradient the losses
// expose: SILOG (pred), smoothness (field), Laplacian NLL (confidence),
// consistency (warped thermal depth) and consistency composed with the
// geometric warp (thermal depth). inject_sign_error flips the SILOG
// analytic gradient to prove the harness detects wrong gradients.
inline GradSuiteReport run_gradcheck_suite(std::uint64_t seed, int instances, int rows = 16,
                                           int cols = 16, bool inject_sign_error = false) {
  GradSuiteReport suite;
  for (int inst = 0; inst < instances; ++inst) {
    const std::uint64_t inst_seed = seed + static_cast<std::uint64_t>(inst) * 1000003ull;
    Rng rng(inst_seed);

    // --- SILOG w.r.t. pred ---
    {
      DepthMap pred = detail::random_depth(rng, rows, cols);
      DepthMap gt = detail::random_depth(rng, rows, cols);
      const double lambda = 0.15;
      LossResult base = silog(pred, gt, lambda);
      Grid<double> analytic = base.gradients.at("pred");
      if (inject_sign_error)
        for (size_t i = 0; i < analytic.size(); ++i) analytic[i] = -analytic[i];
      LossProbe probe;
      probe.input_name = "pred";
      probe.eval = [&](const Grid<double>& g) {
        DepthMap p{};
        p.values = g;
        p.valid = pred.valid;
        LossResult r = silog(p, gt, lambda);
        return std::make_pair(r.value, r.structure_hash);
      };
      detail::accumulate(suite, {"silog", inst_seed, check_gradient(probe, pred.values, analytic)});
    }

    // --- smoothness w.r.t. field ---
    {
      Grid<double> field(rows, cols, 0.0);
      for (size_t i = 0; i < field.size(); ++i) field[i] = rng.uniform(1.0, 5.0);
      Image3 image(rows, cols, 3, 0.0);
      for (auto& v : image.raw()) v = rng.uniform();
      LossResult base = smoothness(field, image);
      // Nearest incident forward difference per pixel; |.| kinks live there.
      Grid<double> kink(rows, cols, std::numeric_limits<double>::infinity());
      for (int r = 0; r + 1 < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c) {
          const double gx = std::abs(field(r, c + 1) - field(r, c));
          const double gy = std::abs(field(r + 1, c) - field(r, c));
          kink(r, c) = std::min({kink(r, c), gx, gy});
          kink(r, c + 1) = std::min(kink(r, c + 1), gx);
          kink(r + 1, c) = std::min(kink(r + 1, c), gy);
        }
      LossProbe probe;
      probe.input_name = "field";
      probe.eval = [&](const Grid<double>& g) {
        LossResult r = smoothness(g, image);
        return std::make_pair(r.value, r.structure_hash);
      };
      probe.kink_residual = kink;
      probe.has_kink_residual = true;
      detail::accumulate(suite, {"smoothness", inst_seed,
                                 check_gradient(probe, field, base.gradients.at("field"))});
    }

    // --- Laplacian NLL w.r.t. confidence ---
    {
      DepthMap pred = detail::random_depth(rng, rows, cols);
      DepthMap gt = detail::random_depth(rng, rows, cols);
      ConfidenceMap w(rows, cols, 0.0);
      for (size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(0.1, 0.9);
      const double beta = 0.1;
      LossResult base = laplacian_nll(w, pred, gt, beta);
      LossProbe probe;
      probe.input_name = "confidence";
      probe.eval = [&](const Grid<double>& g) {
        LossResult r = laplacian_nll(g, pred, gt, beta);
        return std::make_pair(r.value, r.structure_hash);
      };
      detail::accumulate(
          suite, {"laplacian_nll", inst_seed, check_gradient(probe, w, base.gradients.at("confidence"))});
    }

    // --- consistency w.r.t. the warped thermal depth ---
    {
      DepthMap rgb = detail::random_depth(rng, rows, cols);
      DepthMap warped = rgb;
      for (size_t i = 0; i < warped.values.size(); ++i) {
        warped.values[i] += rng.uniform(-1.0, 1.0);
        if (rng.uniform() < 0.05) warped.valid[i] = 0;
      }
      warped.sanitize();
      ConfidenceMap w(rows, cols, 0.0);
      for (size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(0.05, 0.95);
      SimilarityMap sim(rows, cols, 0.0, true);
      for (size_t i = 0; i < sim.values.size(); ++i) sim.values[i] = rng.uniform(-1.0, 1.0);
      LossResult base = consistency(w, rgb, warped, sim);
      Grid<double> kink(rows, cols, 0.0);
      for (size_t i = 0; i < kink.size(); ++i)
        kink[i] = std::abs(rgb.values[i] - warped.values[i]);
      LossProbe probe;
      probe.input_name = "warped_thermal_depth";
      probe.eval = [&](const Grid<double>& g) {
        DepthMap wd{};
        wd.values = g;
        wd.valid = warped.valid;
        LossResult r = consistency(w, rgb, wd, sim);
        return std::make_pair(r.value, r.structure_hash);
      };
      probe.kink_residual = kink;
      probe.has_kink_residual = true;
      detail::accumulate(suite, {"consistency", inst_seed,
                                 check_gradient(probe, warped.values,
                                                base.gradients.at("warped_thermal_depth"))});
    }

    // --- consistency through the warp chain w.r.t. the thermal depth ---
    {
      const CameraIntrinsics K(static_cast<double>(cols), static_cast<double>(cols),
                               (cols - 1) / 2.0, (rows - 1) / 2.0, cols, rows);
      const RigidTransform T_t_r(rotation_y(0.02), Eigen::Vector3d(-0.2, 0.0, 0.0));
      const RigidTransform T_r_t = T_t_r.inverse();
      DepthMap rgb = detail::random_depth(rng, rows, cols, 0.02);
      DepthMap thermal = detail::random_depth(rng, rows, cols, 0.02);
      // Smooth the thermal map a little so warps stay in bounds more often.
      ConfidenceMap w(rows, cols, 0.0);
      for (size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(0.05, 0.95);
      SimilarityMap sim(rows, cols, 0.0, true);
      for (size_t i = 0; i < sim.values.size(); ++i) sim.values[i] = rng.uniform(-1.0, 1.0);
      const WarpResult rt = warp_depth(rgb, K, K, T_t_r);
      LossResult base =
          consistency_through_warp(w, rgb, thermal, rt.dst_coords, K, K, T_r_t, sim);
      LossProbe probe;
      probe.input_name = "thermal_depth";
      probe.eval = [&](const Grid<double>& g) {
        DepthMap td{};
        td.values = g;
        td.valid = thermal.valid;
        LossResult r = consistency_through_warp(w, rgb, td, rt.dst_coords, K, K, T_r_t, sim);
        return std::make_pair(r.value, r.structure_hash);
      };
      detail::accumulate(suite, {"consistency_through_warp", inst_seed,
                                 check_gradient(probe, thermal.values,
                                                base.gradients.at("thermal_depth"))});
    }
  }
  return suite;
}

}  // namespace xmodal
