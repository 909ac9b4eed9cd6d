// xmodal: confidence-aware RGB->thermal depth distillation toolkit.
//
// Subcommands: warp, eval, gradcheck, distill-demo, filter-lidar,
// obstacle-map, synth, normalize-thermal. Every run is deterministic given
// its config (including seed) and echoes the fully-resolved configuration
// into the output directory. XMODAL_THREADS caps parallelism (0 = auto).
//
// Exit codes: 0 success, 1 check failure, 2 input/parse error, 3 domain
// error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "xmodal/config_json.hpp"
#include "xmodal/depthfilter.hpp"
#include "xmodal/gradcheck_suite.hpp"
#include "xmodal/io.hpp"
#include "xmodal/metrics.hpp"
#include "xmodal/obstacle.hpp"
#include "xmodal/synthscene.hpp"
#include "xmodal/thermal.hpp"
#include "xmodal/warp.hpp"

namespace fs = std::filesystem;
using namespace xmodal;

namespace {

// Loads the per-subcommand section of a config file; a file may either hold
// flat sections keyed by subcommand name or be the section itself.
json config_section(const std::string& path, const std::string& section) {
  if (path.empty()) return json::object();
  json j = load_json_file(path);
  if (j.is_object() && j.contains(section)) j = j.at(section);
  return j;
}

void require_key(const json& cfg, const char* key, const std::string& cmd) {
  if (!cfg.contains(key) || cfg.at(key).is_null())
    throw config_error(cmd + ": missing required setting '" + key + "'");
}

fs::path prepare_out_dir(const json& cfg, const std::string& cmd) {
  require_key(cfg, "out_dir", cmd);
  const fs::path dir = cfg.at("out_dir").get<std::string>();
  fs::create_directories(dir);
  return dir;
}

void echo_config(const fs::path& out_dir, const json& resolved) {
  write_json_file((out_dir / "resolved_config.json").string(), resolved);
}

// ---------------------------------------------------------------------------

int run_warp(json cfg) {
  cfg["direction"] = cfg.value("direction", "rgb2thermal");
  check_keys(cfg, {"calib", "src_depth", "sample_depth", "direction", "out_dir"}, "warp");
  require_key(cfg, "calib", "warp");
  require_key(cfg, "src_depth", "warp");
  const fs::path out_dir = prepare_out_dir(cfg, "warp");

  const RigCalibration rig = load_rig_calibration(cfg.at("calib").get<std::string>());
  const DepthMap src = read_pfm(cfg.at("src_depth").get<std::string>());
  if (mask_count(src.valid) == 0) throw std::domain_error("warp: source depth has no valid pixels");

  const std::string direction = cfg.at("direction").get<std::string>();
  const RigidTransform T_t_r = rig.T_thermal_rgb;
  const RigidTransform T_r_t = rig.T_thermal_rgb.inverse();

  if (direction == "rgb2thermal" || direction == "thermal2rgb") {
    const bool fwd = direction == "rgb2thermal";
    const CameraIntrinsics& K_src = fwd ? rig.rgb : rig.thermal;
    const CameraIntrinsics& K_dst = fwd ? rig.thermal : rig.rgb;
    if (src.rows() != K_src.height || src.cols() != K_src.width)
      throw config_error("warp: source depth does not match the source camera size");
    const WarpResult w = warp_depth(src, K_src, K_dst, fwd ? T_t_r : T_r_t);
    write_pfm((out_dir / "dst_depth.pfm").string(), w.dst_frame_depth);
    write_pfm_grid((out_dir / "coords_x.pfm").string(), w.dst_coords.x, &w.dst_coords.valid);
    write_pfm_grid((out_dir / "coords_y.pfm").string(), w.dst_coords.y, &w.dst_coords.valid);
  } else if (direction == "rgb-aligned") {
    require_key(cfg, "sample_depth", "warp");
    const DepthMap thermal = read_pfm(cfg.at("sample_depth").get<std::string>());
    if (src.rows() != rig.rgb.height || src.cols() != rig.rgb.width)
      throw config_error("warp: RGB depth does not match the RGB camera size");
    if (thermal.rows() != rig.thermal.height || thermal.cols() != rig.thermal.width)
      throw config_error("warp: thermal depth does not match the thermal camera size");
    if (mask_count(thermal.valid) == 0)
      throw std::domain_error("warp: thermal depth has no valid pixels");
    const WarpResult rt = warp_depth(src, rig.rgb, rig.thermal, T_t_r);
    const DepthMap breve = warped_thermal_depth(thermal, rt.dst_coords, rig.thermal, rig.rgb, T_r_t);
    write_pfm((out_dir / "warped.pfm").string(), breve);
  } else {
    throw config_error("warp: direction must be rgb2thermal, thermal2rgb or rgb-aligned");
  }
  echo_config(out_dir, cfg);
  return 0;
}

// ---------------------------------------------------------------------------

std::string format_metrics_row(const std::string& split, const std::string& method,
                               const std::string& variant, const MetricSet& m) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                split.c_str(), method.c_str(), variant.c_str(), m.abs_rel, m.sq_rel, m.rmse,
                m.rmse_log, m.delta1, m.delta2, m.delta3);
  return buf;
}

int run_eval(json cfg) {
  cfg["split"] = cfg.value("split", "test");
  cfg["method"] = cfg.value("method", "pred");
  cfg["bin_width"] = cfg.value("bin_width", 5.0);
  cfg["max_depth"] = cfg.value("max_depth", 80.0);
  check_keys(cfg, {"pred", "gt", "split", "method", "bin_width", "max_depth", "out_dir"}, "eval");
  require_key(cfg, "pred", "eval");
  require_key(cfg, "gt", "eval");
  const fs::path out_dir = prepare_out_dir(cfg, "eval");

  const DepthMap pred = read_pfm(cfg.at("pred").get<std::string>());
  const DepthMap gt = read_pfm(cfg.at("gt").get<std::string>());
  if (!pred.values.same_shape(gt.values)) throw config_error("eval: pred/gt size mismatch");
  const Mask all(pred.rows(), pred.cols(), 1);
  const MetricSet unweighted = compute_metrics(pred, gt, all);
  const BinnedMetricSet weighted = compute_weighted_metrics(
      pred, gt, all, cfg.at("bin_width").get<double>(), cfg.at("max_depth").get<double>());

  std::ofstream csv(out_dir / "metrics.csv");
  if (!csv) throw io_error("cannot write metrics.csv");
  csv << "split,method,variant,AbsRel,SqRel,RMSE,RMSElog,d1,d2,d3\n";
  csv << format_metrics_row(cfg.at("split").get<std::string>(),
                            cfg.at("method").get<std::string>(), "unweighted", unweighted);
  csv << format_metrics_row(cfg.at("split").get<std::string>(),
                            cfg.at("method").get<std::string>(), "weighted", weighted.aggregate);
  csv.close();
  echo_config(out_dir, cfg);
  return 0;
}

// ---------------------------------------------------------------------------

int run_gradcheck(json cfg) {
  cfg["seed"] = cfg.value("seed", 0ull);
  cfg["tolerance"] = cfg.value("tolerance", 1e-4);
  cfg["instances"] = cfg.value("instances", 20);
  cfg["rows"] = cfg.value("rows", 16);
  cfg["cols"] = cfg.value("cols", 16);
  cfg["inject_sign_error"] = cfg.value("inject_sign_error", false);
  check_keys(cfg, {"seed", "tolerance", "instances", "rows", "cols", "inject_sign_error", "out_dir"},
             "gradcheck");
  const fs::path out_dir = prepare_out_dir(cfg, "gradcheck");

  const GradSuiteReport suite = run_gradcheck_suite(
      cfg.at("seed").get<std::uint64_t>(), cfg.at("instances").get<int>(),
      cfg.at("rows").get<int>(), cfg.at("cols").get<int>(), cfg.at("inject_sign_error").get<bool>());
  const double tol = cfg.at("tolerance").get<double>();
  write_json_file((out_dir / "report.json").string(), gradsuite_report_json(suite, tol));
  echo_config(out_dir, cfg);
  std::cout << "gradcheck: max_rel_error " << suite.max_rel_error << " over "
            << suite.num_checked << " entries (" << suite.num_skipped_kinks << " kinks skipped)\n";
  return suite.max_rel_error <= tol ? 0 : 1;
}

// ---------------------------------------------------------------------------

Image3 confidence_error_heatmap(const DistillReport& rep) {
  const int rows = rep.teacher.rows(), cols = rep.teacher.cols();
  double max_err = 1e-9;
  Grid<double> err(rows, cols, 0.0);
  for (size_t i = 0; i < err.size(); ++i) {
    if (!rep.teacher.valid[i] || !rep.rgb_gt.valid[i]) continue;
    err[i] = std::abs(rep.teacher.values[i] - rep.rgb_gt.values[i]);
    max_err = std::max(max_err, err[i]);
  }
  Image3 img(rows, cols, 3, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      img.at(r, c, 0) = err(r, c) / max_err;          // red: teacher depth error
      img.at(r, c, 2) = rep.confidence(r, c);         // blue: predicted confidence
    }
  return img;
}

int run_distill_demo(const std::string& config_path, json overrides, bool dump_maps) {
  if (config_path.empty()) throw config_error("distill-demo: --config is required");
  json cfg = config_section(config_path, "distill-demo");
  if (overrides.contains("steps")) {
    cfg["optimizer"]["steps"] = overrides.at("steps");
    overrides.erase("steps");
  }
  for (auto it = overrides.begin(); it != overrides.end(); ++it) cfg[it.key()] = it.value();
  require_key(cfg, "out_dir", "distill-demo");
  const fs::path out_dir = cfg.at("out_dir").get<std::string>();
  fs::create_directories(out_dir);
  json cfg_no_out = cfg;
  cfg_no_out.erase("out_dir");
  const DistillConfig dc = distill_config_from_json(cfg_no_out);

  const DistillReport rep = run_distillation_demo(dc);
  write_json_file((out_dir / "report.json").string(), distill_report_json(rep));
  json resolved = distill_config_to_json(dc);
  resolved["out_dir"] = out_dir.string();
  echo_config(out_dir, resolved);

  if (dump_maps) {
    write_pfm((out_dir / "rgb_gt.pfm").string(), rep.rgb_gt);
    write_pfm((out_dir / "thermal_gt.pfm").string(), rep.thermal_gt);
    write_pfm((out_dir / "teacher.pfm").string(), rep.teacher);
    write_pfm((out_dir / "student_init.pfm").string(), rep.student_init);
    write_pfm((out_dir / "student_confident.pfm").string(), rep.student_confident);
    write_pfm((out_dir / "student_uniform.pfm").string(), rep.student_uniform);
    write_pfm_grid((out_dir / "confidence.pfm").string(), rep.confidence);
    write_ppm((out_dir / "confidence_vs_error.ppm").string(), confidence_error_heatmap(rep));
  }
  std::cout << "distill-demo: absrel init " << rep.absrel_init << " -> confident "
            << rep.absrel_confident << " vs uniform " << rep.absrel_uniform << " (improvement "
            << rep.improvement_pct << "%)\n";
  return 0;
}

// ---------------------------------------------------------------------------

StereoRig load_stereo_rig(const std::string& path) {
  const json j = load_json_file(path);
  check_keys(j, {"left", "right", "T_right_left"}, "stereo calibration");
  StereoRig rig;
  try {
    rig.left = intrinsics_from_json(j.at("left"));
    rig.right = intrinsics_from_json(j.at("right"));
    rig.T_right_left = transform_from_json(j.at("T_right_left"));
  } catch (const json::exception& e) {
    throw io_error("bad stereo calibration " + path + ": " + e.what());
  }
  return rig;
}

int run_filter_lidar(json cfg) {
  cfg["tau_photo"] = cfg.value("tau_photo", 0.2);
  cfg["tau_rel"] = cfg.value("tau_rel", 0.1);
  check_keys(cfg, {"calib", "lidar", "left", "right", "stereo_depth", "tau_photo", "tau_rel",
                   "out_dir"},
             "filter-lidar");
  require_key(cfg, "lidar", "filter-lidar");
  const fs::path out_dir = prepare_out_dir(cfg, "filter-lidar");

  DepthMap depth = read_pfm(cfg.at("lidar").get<std::string>());
  const bool photometric = cfg.contains("left") && cfg.contains("right");
  const bool stereo = cfg.contains("stereo_depth");
  if (!photometric && !stereo)
    throw config_error("filter-lidar: provide left+right images and/or a stereo depth map");

  FilterStats photo_stats{}, stereo_stats{};
  if (photometric) {
    require_key(cfg, "calib", "filter-lidar");
    const StereoRig rig = load_stereo_rig(cfg.at("calib").get<std::string>());
    const Grid<double> left = read_pgm_normalized(cfg.at("left").get<std::string>());
    const Grid<double> right = read_pgm_normalized(cfg.at("right").get<std::string>());
    depth = photometric_filter(depth, left, right, rig, cfg.at("tau_photo").get<double>(),
                               &photo_stats);
  }
  if (stereo) {
    const DepthMap stereo_depth = read_pfm(cfg.at("stereo_depth").get<std::string>());
    depth = stereo_deviation_filter(depth, stereo_depth, cfg.at("tau_rel").get<double>(),
                                    &stereo_stats);
  }
  write_pfm((out_dir / "filtered.pfm").string(), depth);
  write_json_file((out_dir / "summary.json").string(),
                  json{{"removed_photometric", photo_stats.removed},
                       {"removed_stereo", stereo_stats.removed},
                       {"kept", mask_count(depth.valid)}});
  echo_config(out_dir, cfg);
  return 0;
}

// ---------------------------------------------------------------------------

RigidTransform default_world_from_camera() {
  // Z-up world; camera looks along world +X from 0.5 m above the ground.
  Eigen::Matrix3d R;
  R << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  return RigidTransform(R, Eigen::Vector3d(0.0, 0.0, 0.5));
}

int run_obstacle_map(json cfg) {
  cfg["voxel"] = cfg.value("voxel", 0.1);
  cfg["radius"] = cfg.value("radius", 0.5);
  cfg["min_neighbors"] = cfg.value("min_neighbors", 2);
  cfg["ground_height"] = cfg.value("ground_height", 0.15);
  cfg["max_height"] = cfg.value("max_height", 2.0);
  cfg["eps"] = cfg.value("eps", 0.5);
  cfg["min_pts"] = cfg.value("min_pts", 5);
  cfg["alpha"] = cfg.value("alpha", 0.0);
  cfg["degenerate_padding"] = cfg.value("degenerate_padding", 0.05);
  check_keys(cfg, {"depth", "calib", "xyz", "voxel", "radius", "min_neighbors", "ground_height",
                   "max_height", "eps", "min_pts", "alpha", "degenerate_padding", "out_dir"},
             "obstacle-map");
  const fs::path out_dir = prepare_out_dir(cfg, "obstacle-map");

  PointCloud cloud;
  if (cfg.contains("xyz")) {
    cloud.points = read_xyz(cfg.at("xyz").get<std::string>());
  } else if (cfg.contains("depth")) {
    require_key(cfg, "calib", "obstacle-map");
    const json cj = load_json_file(cfg.at("calib").get<std::string>());
    check_keys(cj, {"camera", "world_from_camera"}, "obstacle calibration");
    const CameraIntrinsics K = intrinsics_from_json(cj.at("camera"));
    const RigidTransform pose = cj.contains("world_from_camera")
                                    ? transform_from_json(cj.at("world_from_camera"))
                                    : default_world_from_camera();
    const DepthMap depth = read_pfm(cfg.at("depth").get<std::string>());
    if (mask_count(depth.valid) == 0)
      throw std::domain_error("obstacle-map: depth has no valid pixels");
    cloud = depth_to_pointcloud(depth, K, pose);
  } else {
    throw config_error("obstacle-map: provide either --xyz or --depth with --calib");
  }

  cloud = voxel_downsample(cloud, cfg.at("voxel").get<double>());
  cloud = radial_outlier_filter(cloud, cfg.at("radius").get<double>(),
                                cfg.at("min_neighbors").get<int>());
  const std::vector<Eigen::Vector2d> flat = remove_ground_and_flatten(
      cloud, cfg.at("ground_height").get<double>(), cfg.at("max_height").get<double>());
  const std::vector<int> labels =
      dbscan(flat, cfg.at("eps").get<double>(), cfg.at("min_pts").get<int>());
  const ObstacleMap map = build_obstacle_map(flat, labels, cfg.at("alpha").get<double>(),
                                             cfg.at("degenerate_padding").get<double>());

  json polys = json::array();
  for (const auto& poly : map.polygons) {
    json verts = json::array();
    for (const auto& v : poly.vertices) verts.push_back({round9(v.x()), round9(v.y())});
    polys.push_back(json{{"cluster", poly.cluster}, {"vertices", verts}});
  }
  write_json_file((out_dir / "obstacles.json").string(), polys);
  echo_config(out_dir, cfg);
  std::cout << "obstacle-map: " << map.polygons.size() << " polygons from " << flat.size()
            << " flattened points\n";
  return 0;
}

// ---------------------------------------------------------------------------

int run_synth(const std::string& config_path, json overrides) {
  if (config_path.empty()) throw config_error("synth: --config is required");
  json cfg = config_section(config_path, "synth");
  for (auto it = overrides.begin(); it != overrides.end(); ++it) cfg[it.key()] = it.value();
  check_keys(cfg, {"scene", "rgb_camera", "thermal_camera", "T_thermal_rgb", "out_dir"}, "synth");
  require_key(cfg, "scene", "synth");
  require_key(cfg, "rgb_camera", "synth");
  require_key(cfg, "thermal_camera", "synth");
  require_key(cfg, "T_thermal_rgb", "synth");
  const fs::path out_dir = prepare_out_dir(cfg, "synth");

  const Scene scene = scene_from_json(cfg.at("scene"));
  RigCalibration rig;
  rig.rgb = intrinsics_from_json(cfg.at("rgb_camera"));
  rig.thermal = intrinsics_from_json(cfg.at("thermal_camera"));
  rig.T_thermal_rgb = transform_from_json(cfg.at("T_thermal_rgb"));

  const DepthMap rgb_depth = render_depth(scene, rig.rgb, RigidTransform::identity());
  const DepthMap thermal_depth = render_depth(scene, rig.thermal, rig.T_thermal_rgb);
  write_pfm((out_dir / "rgb_depth.pfm").string(), rgb_depth);
  write_pfm((out_dir / "thermal_depth.pfm").string(), thermal_depth);
  write_json_file((out_dir / "calib.json").string(), rig_calibration_to_json(rig));
  echo_config(out_dir, cfg);
  return 0;
}

// ---------------------------------------------------------------------------

int run_normalize_thermal(json cfg) {
  check_keys(cfg, {"input", "out_dir"}, "normalize-thermal");
  require_key(cfg, "input", "normalize-thermal");
  const fs::path out_dir = prepare_out_dir(cfg, "normalize-thermal");

  const ThermalImageRaw raw = read_pgm16(cfg.at("input").get<std::string>());
  const NormalizedThermal norm = normalize_thermal(raw);
  write_pfm_grid((out_dir / "normalized.pfm").string(), norm.values);
  write_json_file((out_dir / "summary.json").string(),
                  json{{"degenerate", norm.degenerate}, {"p2", norm.p2}, {"p98", norm.p98}});
  echo_config(out_dir, cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "xmodal: confidence-aware RGB->thermal depth distillation toolkit\n"
      "Set XMODAL_THREADS to cap parallelism (0 = auto)."};
  app.require_subcommand(1);

  // Shared flag storage; each subcommand registers the options it supports.
  std::string config_path, calib, src_depth, sample_depth, direction, out_dir;
  std::string pred, gt, split, method, lidar, left, right, stereo_depth, input, xyz, depth;
  double tolerance = 0, tau_photo = 0, tau_rel = 0, bin_width = 0, max_depth = 0;
  double voxel = 0, radius = 0, ground_height = 0, max_height = 0, eps = 0, alpha = 0;
  std::uint64_t seed = 0;
  int instances = 0, min_neighbors = 0, min_pts = 0;
  long opt_steps = 0;
  bool inject_sign_error = false, dump_maps = false;

  auto* c_warp = app.add_subcommand("warp", "Warp a depth map across the calibrated rig");
  auto* w_cfg = c_warp->add_option("--config", config_path, "JSON config file");
  auto* w_calib = c_warp->add_option("--calib", calib, "Rig calibration JSON");
  auto* w_src = c_warp->add_option("--src-depth", src_depth, "Source depth PFM");
  auto* w_sample = c_warp->add_option("--sample-depth", sample_depth,
                                      "Thermal depth PFM (rgb-aligned direction)");
  auto* w_dir = c_warp->add_option("--direction", direction,
                                   "rgb2thermal | thermal2rgb | rgb-aligned");
  auto* w_out = c_warp->add_option("--out-dir", out_dir, "Output directory");

  auto* c_eval = app.add_subcommand("eval", "Evaluate a predicted depth map against ground truth");
  auto* e_cfg = c_eval->add_option("--config", config_path, "JSON config file");
  auto* e_pred = c_eval->add_option("--pred", pred, "Predicted depth PFM");
  auto* e_gt = c_eval->add_option("--gt", gt, "Ground-truth depth PFM");
  auto* e_split = c_eval->add_option("--split", split, "Split label for the CSV");
  auto* e_method = c_eval->add_option("--method", method, "Method label for the CSV");
  auto* e_bin = c_eval->add_option("--bin-width", bin_width, "Weighted-metric bin width, meters");
  auto* e_maxd = c_eval->add_option("--max-depth", max_depth, "Weighted-metric depth cap, meters");
  auto* e_out = c_eval->add_option("--out-dir", out_dir, "Output directory");

  auto* c_grad = app.add_subcommand("gradcheck", "Verify analytic gradients against finite differences");
  auto* g_cfg = c_grad->add_option("--config", config_path, "JSON config file");
  auto* g_seed = c_grad->add_option("--seed", seed, "Random seed");
  auto* g_tol = c_grad->add_option("--tolerance", tolerance, "Max relative error allowed");
  auto* g_inst = c_grad->add_option("--instances", instances, "Random instances per probe");
  auto* g_inject = c_grad->add_flag("--inject-sign-error", inject_sign_error,
                                    "Test hook: flip one analytic gradient");
  g_inject->group("");  // hidden
  auto* g_out = c_grad->add_option("--out-dir", out_dir, "Output directory");

  auto* c_distill = app.add_subcommand("distill-demo",
                                       "Toy confidence-aware distillation experiment");
  auto* d_cfg = c_distill->add_option("--config", config_path, "Demo config JSON (required)");
  auto* d_seed = c_distill->add_option("--seed", seed, "Override config seed");
  auto* d_steps = c_distill->add_option("--steps", opt_steps, "Override optimizer steps");
  c_distill->add_flag("--dump-maps", dump_maps, "Write PFM/PPM dumps of intermediate maps");
  auto* d_out = c_distill->add_option("--out-dir", out_dir, "Output directory");

  auto* c_filter = app.add_subcommand("filter-lidar", "Filter LiDAR ground-truth depth");
  auto* f_cfg = c_filter->add_option("--config", config_path, "JSON config file");
  auto* f_calib = c_filter->add_option("--calib", calib, "Stereo rig calibration JSON");
  auto* f_lidar = c_filter->add_option("--lidar", lidar, "LiDAR depth PFM (left grid)");
  auto* f_left = c_filter->add_option("--left", left, "Left intensity PGM");
  auto* f_right = c_filter->add_option("--right", right, "Right intensity PGM");
  auto* f_stereo = c_filter->add_option("--stereo-depth", stereo_depth, "Stereo-matching depth PFM");
  auto* f_tau_p = c_filter->add_option("--tau-photo", tau_photo, "Photometric threshold [0,1]");
  auto* f_tau_r = c_filter->add_option("--tau-rel", tau_rel, "Relative stereo deviation threshold");
  auto* f_out = c_filter->add_option("--out-dir", out_dir, "Output directory");

  auto* c_obst = app.add_subcommand("obstacle-map", "Depth or point cloud to polygonal obstacles");
  auto* o_cfg = c_obst->add_option("--config", config_path, "JSON config file");
  auto* o_depth = c_obst->add_option("--depth", depth, "Depth PFM input");
  auto* o_calib = c_obst->add_option("--calib", calib, "Camera calibration JSON (with --depth)");
  auto* o_xyz = c_obst->add_option("--xyz", xyz, "XYZ text point cloud input");
  auto* o_voxel = c_obst->add_option("--voxel", voxel, "Downsampling voxel size, meters");
  auto* o_radius = c_obst->add_option("--radius", radius, "Outlier-filter radius, meters");
  auto* o_minn = c_obst->add_option("--min-neighbors", min_neighbors, "Outlier-filter neighbor count");
  auto* o_ground = c_obst->add_option("--ground-height", ground_height, "Ground removal height, meters");
  auto* o_maxh = c_obst->add_option("--max-height", max_height, "Height-above-ground cap, meters");
  auto* o_eps = c_obst->add_option("--eps", eps, "DBSCAN epsilon, meters");
  auto* o_minp = c_obst->add_option("--min-pts", min_pts, "DBSCAN min points");
  auto* o_alpha = c_obst->add_option("--alpha", alpha, "Alpha-shape parameter, 1/meters (0 = hull)");
  auto* o_out = c_obst->add_option("--out-dir", out_dir, "Output directory");

  auto* c_synth = app.add_subcommand("synth", "Render ground-truth depth for a synthetic rig");
  auto* s_cfg = c_synth->add_option("--config", config_path, "Scene + rig config JSON (required)");
  auto* s_out = c_synth->add_option("--out-dir", out_dir, "Output directory");

  auto* c_norm = app.add_subcommand("normalize-thermal", "Percentile-normalize a 16-bit thermal PGM");
  auto* n_cfg = c_norm->add_option("--config", config_path, "JSON config file");
  auto* n_input = c_norm->add_option("--input", input, "Raw 16-bit PGM");
  auto* n_out = c_norm->add_option("--out-dir", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto set_if = [](json& cfg, const char* key, const CLI::Option* opt, const auto& value) {
    if (opt->count() > 0) cfg[key] = value;
  };

  try {
    if (c_warp->parsed()) {
      json cfg = config_section(config_path, "warp");
      set_if(cfg, "calib", w_calib, calib);
      set_if(cfg, "src_depth", w_src, src_depth);
      set_if(cfg, "sample_depth", w_sample, sample_depth);
      set_if(cfg, "direction", w_dir, direction);
      set_if(cfg, "out_dir", w_out, out_dir);
      (void)w_cfg;
      return run_warp(std::move(cfg));
    }
    if (c_eval->parsed()) {
      json cfg = config_section(config_path, "eval");
      set_if(cfg, "pred", e_pred, pred);
      set_if(cfg, "gt", e_gt, gt);
      set_if(cfg, "split", e_split, split);
      set_if(cfg, "method", e_method, method);
      set_if(cfg, "bin_width", e_bin, bin_width);
      set_if(cfg, "max_depth", e_maxd, max_depth);
      set_if(cfg, "out_dir", e_out, out_dir);
      (void)e_cfg;
      return run_eval(std::move(cfg));
    }
    if (c_grad->parsed()) {
      json cfg = config_section(config_path, "gradcheck");
      set_if(cfg, "seed", g_seed, seed);
      set_if(cfg, "tolerance", g_tol, tolerance);
      set_if(cfg, "instances", g_inst, instances);
      if (g_inject->count() > 0) cfg["inject_sign_error"] = inject_sign_error;
      set_if(cfg, "out_dir", g_out, out_dir);
      (void)g_cfg;
      return run_gradcheck(std::move(cfg));
    }
    if (c_distill->parsed()) {
      json overrides = json::object();
      set_if(overrides, "seed", d_seed, seed);
      set_if(overrides, "steps", d_steps, opt_steps);
      set_if(overrides, "out_dir", d_out, out_dir);
      (void)d_cfg;
      return run_distill_demo(config_path, std::move(overrides), dump_maps);
    }
    if (c_filter->parsed()) {
      json cfg = config_section(config_path, "filter-lidar");
      set_if(cfg, "calib", f_calib, calib);
      set_if(cfg, "lidar", f_lidar, lidar);
      set_if(cfg, "left", f_left, left);
      set_if(cfg, "right", f_right, right);
      set_if(cfg, "stereo_depth", f_stereo, stereo_depth);
      set_if(cfg, "tau_photo", f_tau_p, tau_photo);
      set_if(cfg, "tau_rel", f_tau_r, tau_rel);
      set_if(cfg, "out_dir", f_out, out_dir);
      (void)f_cfg;
      return run_filter_lidar(std::move(cfg));
    }
    if (c_obst->parsed()) {
      json cfg = config_section(config_path, "obstacle-map");
      set_if(cfg, "depth", o_depth, depth);
      set_if(cfg, "calib", o_calib, calib);
      set_if(cfg, "xyz", o_xyz, xyz);
      set_if(cfg, "voxel", o_voxel, voxel);
      set_if(cfg, "radius", o_radius, radius);
      set_if(cfg, "min_neighbors", o_minn, min_neighbors);
      set_if(cfg, "ground_height", o_ground, ground_height);
      set_if(cfg, "max_height", o_maxh, max_height);
      set_if(cfg, "eps", o_eps, eps);
      set_if(cfg, "min_pts", o_minp, min_pts);
      set_if(cfg, "alpha", o_alpha, alpha);
      set_if(cfg, "out_dir", o_out, out_dir);
      (void)o_cfg;
      return run_obstacle_map(std::move(cfg));
    }
    if (c_synth->parsed()) {
      json overrides = json::object();
      set_if(overrides, "out_dir", s_out, out_dir);
      (void)s_cfg;
      return run_synth(config_path, std::move(overrides));
    }
    if (c_norm->parsed()) {
      json cfg = config_section(config_path, "normalize-thermal");
      set_if(cfg, "input", n_input, input);
      set_if(cfg, "out_dir", n_out, out_dir);
      (void)n_cfg;
      return run_normalize_thermal(std::move(cfg));
    }
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
