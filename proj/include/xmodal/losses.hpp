#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xmodal/error.hpp"
#include "xmodal/grid.hpp"
#include "xmodal/stats.hpp"
#include "xmodal/warp.hpp"

namespace xmodal {

// Confidence clamp used where log(W) must stay finite (the NLL path). The
// consistency weighting uses W as given: it is a frozen weight there and
// clamping would bias the weighted mean.
inline constexpr double kConfidenceLo = 1e-6;
inline constexpr double kConfidenceHi = 1.0 - 1e-6;

// Scalar loss value plus named gradient grids. A gradient entry exists
// exactly for the inputs the operation declares differentiable; everything
// else is stop-gradded by omission.
struct LossResult {
  double value = 0.0;
  std::map<std::string, Grid<double>> gradients;
  long num_pixels_kept = 0;
  bool at_nondifferentiable_point = false;
  bool empty_kept_set = false;
  Mask kept;
  // Fingerprint of the discrete structure (kept set, residual signs,
  // validity). Central differences are meaningless across a structure
  // change; gradient checks compare hashes of the two probe evaluations.
  std::uint64_t structure_hash = 0;
};

namespace detail {

inline std::uint64_t fnv1a(const void* data, size_t n, std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t hash_mask(const Mask& m, std::uint64_t h = 1469598103934665603ull) {
  return fnv1a(m.data(), m.size(), h);
}

inline int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

// Keeps valid pixels whose residual does not exceed the keep_fraction
// quantile of the valid residuals; the top tail (occlusions, gross outliers)
// is excluded from loss sums.
inline Mask trim_mask(const Grid<double>& residuals, const Mask& valid, double keep_fraction) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
    throw std::invalid_argument("trim_mask: keep_fraction must be in (0,1]");
  if (!residuals.same_shape(valid)) throw std::invalid_argument("trim_mask: shape mismatch");
  Mask out(valid.rows(), valid.cols(), 0);
  std::vector<double> vals;
  vals.reserve(residuals.size());
  for (size_t i = 0; i < residuals.size(); ++i)
    if (valid[i]) vals.push_back(residuals[i]);
  if (vals.empty()) return out;
  std::sort(vals.begin(), vals.end());
  const double thresh = quantile_sorted(vals, keep_fraction);
  for (size_t i = 0; i < residuals.size(); ++i)
    if (valid[i] && residuals[i] <= thresh) out[i] = 1;
  return out;
}

// Keeps valid pixels with similarity at or above the (1 - keep_fraction)
// quantile: the top keep_fraction of feature similarity.
inline Mask similarity_mask(const SimilarityMap& sim, double keep_fraction) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
    throw std::invalid_argument("similarity_mask: keep_fraction must be in (0,1]");
  Mask out(sim.valid.rows(), sim.valid.cols(), 0);
  std::vector<double> vals;
  vals.reserve(sim.values.size());
  for (size_t i = 0; i < sim.values.size(); ++i)
    if (sim.valid[i]) vals.push_back(sim.values[i]);
  if (vals.empty()) return out;
  std::sort(vals.begin(), vals.end());
  const double thresh = quantile_sorted(vals, 1.0 - keep_fraction);
  for (size_t i = 0; i < sim.values.size(); ++i)
    if (sim.valid[i] && sim.values[i] >= thresh) out[i] = 1;
  return out;
}

// Scale-invariant log loss over the shared valid mask:
//   value = sqrt( (1/N) sum g^2 - (lambda/N^2) (sum g)^2 ),  g = log(pred/gt).
// Gradient w.r.t. pred; the loss is non-differentiable at value 0, where the
// gradient is reported as zero with a flag.
inline LossResult silog(const DepthMap& pred, const DepthMap& gt, double lambda_silog) {
  if (!pred.values.same_shape(gt.values)) throw std::invalid_argument("silog: shape mismatch");
  const Mask both = mask_and(pred.valid, gt.valid);
  const long n = mask_count(both);
  if (n < 1) throw std::domain_error("silog: no jointly valid pixels");

  const int rows = pred.rows(), cols = pred.cols();
  Grid<double> g(rows, cols, 0.0);
  std::vector<double> gs, g2s;
  gs.reserve(static_cast<size_t>(n));
  g2s.reserve(static_cast<size_t>(n));
  for (size_t i = 0; i < both.size(); ++i) {
    if (!both[i]) continue;
    if (!(pred.values[i] > 0.0) || !(gt.values[i] > 0.0))
      throw std::domain_error("silog: depths must be positive on the valid mask");
    const double gi = std::log(pred.values[i]) - std::log(gt.values[i]);
    g[i] = gi;
    gs.push_back(gi);
    g2s.push_back(gi * gi);
  }
  const double sum_g = detail::pairwise_sum(gs);
  const double sum_g2 = detail::pairwise_sum(g2s);
  const double nd = static_cast<double>(n);
  const double sq = sum_g2 / nd - lambda_silog * (sum_g / nd) * (sum_g / nd);

  LossResult out;
  out.kept = both;
  out.num_pixels_kept = n;
  out.structure_hash = detail::hash_mask(both);
  Grid<double> grad(rows, cols, 0.0);
  if (sq <= 0.0) {
    out.value = 0.0;
    out.at_nondifferentiable_point = true;
  } else {
    out.value = std::sqrt(sq);
    for (size_t i = 0; i < both.size(); ++i) {
      if (!both[i]) continue;
      grad[i] = (g[i] / nd - lambda_silog * sum_g / (nd * nd)) / (out.value * pred.values[i]);
    }
  }
  out.gradients.emplace("pred", std::move(grad));
  return out;
}

// Laplacian negative log-likelihood of the confidence:
//   value = (1/N) sum_kept [ W |pred - gt| - beta log W ].
// The prediction is stop-gradded; only the confidence receives a gradient.
// The kept set trims the top residual tail and does not depend on W.
inline LossResult laplacian_nll(const ConfidenceMap& confidence, const DepthMap& pred,
                                const DepthMap& gt, double beta, double keep_fraction = 0.8) {
  if (!pred.values.same_shape(gt.values) || !pred.values.same_shape(confidence))
    throw std::invalid_argument("laplacian_nll: shape mismatch");
  const Mask base = mask_and(pred.valid, gt.valid);
  const int rows = pred.rows(), cols = pred.cols();
  Grid<double> residual(rows, cols, 0.0);
  for (size_t i = 0; i < base.size(); ++i) {
    if (!base[i]) continue;
    if (confidence[i] <= 0.0) throw std::domain_error("laplacian_nll: confidence must be positive");
    residual[i] = std::abs(pred.values[i] - gt.values[i]);
  }
  const Mask kept = trim_mask(residual, base, keep_fraction);
  const long n = mask_count(kept);

  LossResult out;
  out.kept = kept;
  out.num_pixels_kept = n;
  out.structure_hash = detail::hash_mask(kept);
  Grid<double> grad(rows, cols, 0.0);
  if (n == 0) {
    out.empty_kept_set = true;
    out.gradients.emplace("confidence", std::move(grad));
    return out;
  }
  const double nd = static_cast<double>(n);
  std::vector<double> terms;
  terms.reserve(static_cast<size_t>(n));
  for (size_t i = 0; i < kept.size(); ++i) {
    if (!kept[i]) continue;
    const double w = std::clamp(confidence[i], kConfidenceLo, kConfidenceHi);
    terms.push_back(w * residual[i] - beta * std::log(w));
    grad[i] = (residual[i] - beta / w) / nd;
  }
  out.value = detail::pairwise_sum(terms) / nd;
  out.gradients.emplace("confidence", std::move(grad));
  return out;
}

// Confidence-weighted L1 distillation loss:
//   value = (1/M) sum_kept W |rgb_pred - warped_thermal|.
// Kept set = valid pixels, intersected with the top-similarity mask and the
// residual trim mask (each computed over the valid set). Confidence and the
// RGB prediction are stop-gradded; the gradient flows to the warped thermal
// depth only.
inline LossResult consistency(const ConfidenceMap& confidence, const DepthMap& rgb_pred,
                              const DepthMap& warped_thermal, const SimilarityMap& similarity,
                              double keep_fraction = 0.8, double sim_keep = 0.8) {
  if (!rgb_pred.values.same_shape(warped_thermal.values) ||
      !rgb_pred.values.same_shape(confidence) || !rgb_pred.values.same_shape(similarity.values))
    throw std::invalid_argument("consistency: shape mismatch");
  const int rows = rgb_pred.rows(), cols = rgb_pred.cols();
  Mask base = mask_and(mask_and(rgb_pred.valid, warped_thermal.valid), similarity.valid);
  Grid<double> residual(rows, cols, 0.0);
  Grid<std::int8_t> sgn(rows, cols, 0);
  for (size_t i = 0; i < base.size(); ++i) {
    if (!base[i]) continue;
    const double d = rgb_pred.values[i] - warped_thermal.values[i];
    residual[i] = std::abs(d);
    sgn[i] = static_cast<std::int8_t>(detail::sign_of(d));
  }
  const Mask sim_kept = similarity_mask(similarity, sim_keep);
  const Mask trim_kept = trim_mask(residual, base, keep_fraction);
  const Mask kept = mask_and(mask_and(base, sim_kept), trim_kept);
  const long m = mask_count(kept);

  LossResult out;
  out.kept = kept;
  out.num_pixels_kept = m;
  std::uint64_t h = detail::hash_mask(kept);
  h = detail::fnv1a(sgn.data(), sgn.size(), h);
  out.structure_hash = h;

  Grid<double> grad(rows, cols, 0.0);
  if (m == 0) {
    out.empty_kept_set = true;
    out.gradients.emplace("warped_thermal_depth", std::move(grad));
    return out;
  }
  const double md = static_cast<double>(m);
  std::vector<double> terms;
  terms.reserve(static_cast<size_t>(m));
  for (size_t i = 0; i < kept.size(); ++i) {
    if (!kept[i]) continue;
    terms.push_back(confidence[i] * residual[i]);
    grad[i] = -confidence[i] * static_cast<double>(sgn[i]) / md;
  }
  out.value = detail::pairwise_sum(terms) / md;
  out.gradients.emplace("warped_thermal_depth", std::move(grad));
  return out;
}

// Edge-aware smoothness with absolute values on both factors:
//   value = mean over interior pixels of
//           |dx X| exp(-|dx Ibar|) + |dy X| exp(-|dy Ibar|),
// forward differences, Ibar the channel-mean image. Defined on dense grids
// (predicted maps); validity masks are not consulted.
inline LossResult smoothness(const Grid<double>& field, const Image3& image) {
  if (image.rows() != field.rows() || image.cols() != field.cols() || image.channels() != 3)
    throw std::invalid_argument("smoothness: image must be 3-channel on the field grid");
  const int rows = field.rows(), cols = field.cols();

  LossResult out;
  Grid<double> grad(rows, cols, 0.0);
  const long n_int = static_cast<long>(rows - 1) * (cols - 1);
  if (n_int <= 0) {
    out.gradients.emplace("field", std::move(grad));
    return out;
  }

  Grid<double> ibar(rows, cols, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double* px = image.at(r, c);
      ibar(r, c) = (px[0] + px[1] + px[2]) / 3.0;
    }

  const double nd = static_cast<double>(n_int);
  std::vector<double> terms;
  terms.reserve(static_cast<size_t>(n_int));
  Grid<std::int8_t> sgnx(rows, cols, 0), sgny(rows, cols, 0);
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) {
      const double gx = field(r, c + 1) - field(r, c);
      const double gy = field(r + 1, c) - field(r, c);
      const double wx = std::exp(-std::abs(ibar(r, c + 1) - ibar(r, c)));
      const double wy = std::exp(-std::abs(ibar(r + 1, c) - ibar(r, c)));
      terms.push_back(std::abs(gx) * wx + std::abs(gy) * wy);
      const int sx = detail::sign_of(gx);
      const int sy = detail::sign_of(gy);
      sgnx(r, c) = static_cast<std::int8_t>(sx);
      sgny(r, c) = static_cast<std::int8_t>(sy);
      grad(r, c + 1) += sx * wx / nd;
      grad(r, c) -= sx * wx / nd;
      grad(r + 1, c) += sy * wy / nd;
      grad(r, c) -= sy * wy / nd;
    }
  out.value = detail::pairwise_sum(terms) / nd;
  out.num_pixels_kept = n_int;
  std::uint64_t h = detail::fnv1a(sgnx.data(), sgnx.size());
  out.structure_hash = detail::fnv1a(sgny.data(), sgny.size(), h);
  out.gradients.emplace("field", std::move(grad));
  return out;
}

// Loss weighting of the combined objective. beta both weights the NLL term
// and acts as the Laplacian scale inside it; the two lambdas are unrelated
// knobs that conventionally share a symbol.
struct LossWeights {
  double alpha = 0.2;
  double beta = 0.1;
  double gamma = 0.01;
  double lambda_comb = 0.001;
  double lambda_silog = 0.15;

  void validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0 || lambda_comb < 0 || lambda_silog < 0)
      throw std::invalid_argument("loss weights must be non-negative");
  }
};

struct CombinedInputs {
  const DepthMap* rgb_pred = nullptr;
  const DepthMap* rgb_gt = nullptr;
  const DepthMap* thermal_pred = nullptr;
  const DepthMap* thermal_gt = nullptr;
  const DepthMap* warped_thermal = nullptr;
  const ConfidenceMap* confidence = nullptr;
  const SimilarityMap* similarity = nullptr;
  const Image3* rgb_image = nullptr;
};

namespace detail {

inline void merge_grad(std::map<std::string, Grid<double>>& dst, const std::string& key,
                       const Grid<double>& g, double scale) {
  auto it = dst.find(key);
  if (it == dst.end()) {
    Grid<double> scaled(g.rows(), g.cols(), 0.0);
    for (size_t i = 0; i < g.size(); ++i) scaled[i] = scale * g[i];
    dst.emplace(key, std::move(scaled));
  } else {
    for (size_t i = 0; i < g.size(); ++i) it->second[i] += scale * g[i];
  }
}

}  // namespace detail

// Full training objective. Supervised:
//   L = silog_r + silog_t + alpha*cons + beta*nll
//       + gamma*smooth(rgb_pred) + lambda_comb*smooth(confidence).
// Unsupervised (self-supervised fine-tuning): L = alpha*cons only.
// Gradients are merged under the stop-gradient contract: silog terms reach
// their own predictions, nll and the confidence smoothness reach the
// confidence, the consistency term reaches the warped thermal depth; no
// other path exists.
inline LossResult combined_loss(const CombinedInputs& in, const LossWeights& w, bool supervised,
                                double keep_fraction = 0.8, double sim_keep = 0.8) {
  w.validate();
  auto need = [](const void* p, const char* name) {
    if (!p) throw config_error(std::string("combined_loss: missing required input: ") + name);
  };
  need(in.rgb_pred, "rgb_pred");
  need(in.warped_thermal, "warped_thermal");
  need(in.confidence, "confidence");
  need(in.similarity, "similarity");
  if (supervised) {
    need(in.rgb_gt, "rgb_gt");
    need(in.thermal_pred, "thermal_pred");
    need(in.thermal_gt, "thermal_gt");
    need(in.rgb_image, "rgb_image");
  }

  LossResult cons = consistency(*in.confidence, *in.rgb_pred, *in.warped_thermal, *in.similarity,
                                keep_fraction, sim_keep);
  LossResult out;
  out.num_pixels_kept = cons.num_pixels_kept;
  out.kept = cons.kept;
  out.empty_kept_set = cons.empty_kept_set;
  out.structure_hash = cons.structure_hash;
  out.value = w.alpha * cons.value;
  detail::merge_grad(out.gradients, "warped_thermal_depth", cons.gradients.at("warped_thermal_depth"),
                     w.alpha);
  if (!supervised) return out;

  LossResult silog_r = silog(*in.rgb_pred, *in.rgb_gt, w.lambda_silog);
  LossResult silog_t = silog(*in.thermal_pred, *in.thermal_gt, w.lambda_silog);
  LossResult nll = laplacian_nll(*in.confidence, *in.rgb_pred, *in.rgb_gt, w.beta, keep_fraction);
  LossResult sm_d = smoothness(in.rgb_pred->values, *in.rgb_image);
  LossResult sm_w = smoothness(*in.confidence, *in.rgb_image);

  out.value += silog_r.value + silog_t.value + w.beta * nll.value + w.gamma * sm_d.value +
               w.lambda_comb * sm_w.value;
  out.at_nondifferentiable_point =
      silog_r.at_nondifferentiable_point || silog_t.at_nondifferentiable_point;
  detail::merge_grad(out.gradients, "rgb_depth", silog_r.gradients.at("pred"), 1.0);
  detail::merge_grad(out.gradients, "rgb_depth", sm_d.gradients.at("field"), w.gamma);
  detail::merge_grad(out.gradients, "thermal_depth", silog_t.gradients.at("pred"), 1.0);
  detail::merge_grad(out.gradients, "confidence", nll.gradients.at("confidence"), w.beta);
  detail::merge_grad(out.gradients, "confidence", sm_w.gradients.at("field"), w.lambda_comb);
  return out;
}

// Consistency loss composed with the geometric warp: forward-warps the
// thermal prediction to the RGB frame, samples it at the fixed u_rt
// correspondences, evaluates the consistency loss, and pulls the gradient
// back to the thermal depth grid. Per pixel the transform is affine in the
// source depth, so the chain rule is bilinear weight x depth coefficient;
// u_rt stays a constant (it derives from the stop-gradded RGB depth).
struct WarpChainForward {
  WarpResult warp;
  DepthMap warped;  // on the RGB grid
};

inline LossResult consistency_through_warp(const ConfidenceMap& confidence,
                                           const DepthMap& rgb_pred, const DepthMap& thermal_pred,
                                           const PixelCoordGrid& u_rt, const CameraIntrinsics& K_t,
                                           const CameraIntrinsics& K_r, const RigidTransform& T_r_t,
                                           const SimilarityMap& similarity,
                                           double keep_fraction = 0.8, double sim_keep = 0.8,
                                           WarpChainForward* fw_out = nullptr) {
  WarpChainForward fw;
  fw.warp = warp_depth(thermal_pred, K_t, K_r, T_r_t);
  const SampledGrid s = bilinear_sample(fw.warp.dst_frame_depth, u_rt);
  fw.warped.values = s.values;
  fw.warped.valid = s.valid;
  fw.warped.sanitize();

  LossResult base =
      consistency(confidence, rgb_pred, fw.warped, similarity, keep_fraction, sim_keep);

  const Grid<double>& g_warped = base.gradients.at("warped_thermal_depth");
  Grid<double> g_thermal = bilinear_scatter_grad(g_warped, fw.warped.valid, u_rt,
                                                 thermal_pred.rows(), thermal_pred.cols());
  const DepthTransformCoeffs coeffs =
      depth_transform_coeffs(thermal_pred.rows(), thermal_pred.cols(), K_t, T_r_t);
  for (size_t i = 0; i < g_thermal.size(); ++i) g_thermal[i] *= coeffs.coeff[i];

  LossResult out;
  out.value = base.value;
  out.num_pixels_kept = base.num_pixels_kept;
  out.kept = base.kept;
  out.empty_kept_set = base.empty_kept_set;
  std::uint64_t h = base.structure_hash;
  h = detail::hash_mask(fw.warp.dst_frame_depth.valid, h);
  h = detail::hash_mask(fw.warped.valid, h);
  out.structure_hash = h;
  out.gradients.emplace("thermal_depth", std::move(g_thermal));
  if (fw_out) *fw_out = std::move(fw);
  return out;
}

}  // namespace xmodal
