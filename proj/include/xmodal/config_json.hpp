#pragma once

#include <string>

#include "xmodal/gradcheck_suite.hpp"
#include "xmodal/io.hpp"
#include "xmodal/synthscene.hpp"

namespace xmodal {

inline PlanePatch plane_from_json(const json& j) {
  check_keys(j, {"axis", "value", "bounds"}, "scene plane");
  PlanePatch p;
  const std::string axis = j.at("axis").get<std::string>();
  if (axis == "x")
    p.axis = 0;
  else if (axis == "y")
    p.axis = 1;
  else if (axis == "z")
    p.axis = 2;
  else
    throw config_error("plane axis must be x, y or z");
  p.value = j.at("value").get<double>();
  const auto& b = j.at("bounds");
  if (!b.is_array() || b.size() != 4) throw config_error("plane bounds must be [lo0,hi0,lo1,hi1]");
  p.lo0 = b[0].get<double>();
  p.hi0 = b[1].get<double>();
  p.lo1 = b[2].get<double>();
  p.hi1 = b[3].get<double>();
  if (!(p.lo0 < p.hi0) || !(p.lo1 < p.hi1)) throw config_error("plane bounds must be increasing");
  return p;
}

inline json plane_to_json(const PlanePatch& p) {
  const char* axis = p.axis == 0 ? "x" : (p.axis == 1 ? "y" : "z");
  return json{{"axis", axis}, {"value", p.value}, {"bounds", {p.lo0, p.hi0, p.lo1, p.hi1}}};
}

inline Scene scene_from_json(const json& j) {
  check_keys(j, {"background_depth", "planes", "spheres", "seed"}, "scene");
  Scene s;
  s.background_depth = j.at("background_depth").get<double>();
  if (!(s.background_depth > 0.0)) throw config_error("background_depth must be positive");
  if (j.contains("planes"))
    for (const auto& pj : j.at("planes")) s.planes.push_back(plane_from_json(pj));
  if (j.contains("spheres"))
    for (const auto& sj : j.at("spheres")) {
      check_keys(sj, {"center", "radius"}, "scene sphere");
      Sphere sp;
      const auto& c = sj.at("center");
      if (!c.is_array() || c.size() != 3) throw config_error("sphere center must be [x,y,z]");
      sp.center = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
      sp.radius = sj.at("radius").get<double>();
      if (!(sp.radius > 0.0)) throw config_error("sphere radius must be positive");
      s.spheres.push_back(sp);
    }
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

inline json scene_to_json(const Scene& s) {
  json planes = json::array();
  for (const auto& p : s.planes) planes.push_back(plane_to_json(p));
  json spheres = json::array();
  for (const auto& sp : s.spheres)
    spheres.push_back(json{{"center", {sp.center.x(), sp.center.y(), sp.center.z()}},
                           {"radius", sp.radius}});
  return json{{"background_depth", s.background_depth},
              {"planes", planes},
              {"spheres", spheres},
              {"seed", s.seed}};
}

inline DistillConfig distill_config_from_json(const json& j) {
  check_keys(j,
             {"seed", "rgb_camera", "thermal_camera", "T_thermal_rgb", "scene", "corruption",
              "student_init_scale", "confidence", "optimizer", "loss"},
             "distill config");
  DistillConfig cfg;
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.rgb_camera = intrinsics_from_json(j.at("rgb_camera"));
  cfg.thermal_camera = intrinsics_from_json(j.at("thermal_camera"));
  cfg.T_thermal_rgb = transform_from_json(j.at("T_thermal_rgb"));
  cfg.scene = scene_from_json(j.at("scene"));

  if (j.contains("corruption")) {
    const json& cj = j.at("corruption");
    check_keys(cj, {"regions", "bias_m", "noise_inside_m", "noise_outside_m"}, "corruption");
    if (cj.contains("regions"))
      for (const auto& rj : cj.at("regions")) {
        if (!rj.is_array() || rj.size() != 4)
          throw config_error("corruption region must be [x,y,width,height]");
        cfg.corruption.regions.push_back(
            {rj[0].get<int>(), rj[1].get<int>(), rj[2].get<int>(), rj[3].get<int>()});
      }
    if (cj.contains("bias_m")) cfg.corruption.bias = cj.at("bias_m").get<double>();
    if (cj.contains("noise_inside_m"))
      cfg.corruption.noise_inside = cj.at("noise_inside_m").get<double>();
    if (cj.contains("noise_outside_m"))
      cfg.corruption.noise_outside = cj.at("noise_outside_m").get<double>();
  }
  if (j.contains("student_init_scale"))
    cfg.student_init_scale = j.at("student_init_scale").get<double>();
  if (j.contains("confidence")) {
    const json& cj = j.at("confidence");
    check_keys(cj, {"mode", "beta", "fit_steps", "fit_step_size"}, "confidence");
    if (cj.contains("mode")) {
      const std::string mode = cj.at("mode").get<std::string>();
      if (mode == "oracle")
        cfg.confidence_mode = ConfidenceMode::kOracle;
      else if (mode == "fitted")
        cfg.confidence_mode = ConfidenceMode::kFitted;
      else if (mode == "uniform")
        cfg.confidence_mode = ConfidenceMode::kUniform;
      else
        throw config_error("confidence mode must be oracle, fitted or uniform");
    }
    if (cj.contains("beta")) cfg.beta = cj.at("beta").get<double>();
    if (cj.contains("fit_steps")) cfg.fit_steps = cj.at("fit_steps").get<long>();
    if (cj.contains("fit_step_size")) cfg.fit_step_size = cj.at("fit_step_size").get<double>();
  }
  if (j.contains("optimizer")) {
    const json& oj = j.at("optimizer");
    check_keys(oj, {"steps", "step_size"}, "optimizer");
    if (oj.contains("steps")) cfg.opt_steps = oj.at("steps").get<long>();
    if (oj.contains("step_size")) cfg.opt_step_size = oj.at("step_size").get<double>();
  }
  if (j.contains("loss")) {
    const json& lj = j.at("loss");
    check_keys(lj, {"keep_fraction", "sim_keep"}, "loss");
    if (lj.contains("keep_fraction")) cfg.keep_fraction = lj.at("keep_fraction").get<double>();
    if (lj.contains("sim_keep")) cfg.sim_keep = lj.at("sim_keep").get<double>();
  }
  cfg.validate();
  return cfg;
}

inline json distill_config_to_json(const DistillConfig& cfg) {
  json regions = json::array();
  for (const auto& r : cfg.corruption.regions)
    regions.push_back(json::array({r.x, r.y, r.width, r.height}));
  const char* mode = cfg.confidence_mode == ConfidenceMode::kOracle
                         ? "oracle"
                         : (cfg.confidence_mode == ConfidenceMode::kFitted ? "fitted" : "uniform");
  return json{
      {"seed", cfg.seed},
      {"rgb_camera", intrinsics_to_json(cfg.rgb_camera)},
      {"thermal_camera", intrinsics_to_json(cfg.thermal_camera)},
      {"T_thermal_rgb", transform_to_json(cfg.T_thermal_rgb)},
      {"scene", scene_to_json(cfg.scene)},
      {"corruption",
       {{"regions", regions},
        {"bias_m", cfg.corruption.bias},
        {"noise_inside_m", cfg.corruption.noise_inside},
        {"noise_outside_m", cfg.corruption.noise_outside}}},
      {"student_init_scale", cfg.student_init_scale},
      {"confidence",
       {{"mode", mode},
        {"beta", cfg.beta},
        {"fit_steps", cfg.fit_steps},
        {"fit_step_size", cfg.fit_step_size}}},
      {"optimizer", {{"steps", cfg.opt_steps}, {"step_size", cfg.opt_step_size}}},
      {"loss", {{"keep_fraction", cfg.keep_fraction}, {"sim_keep", cfg.sim_keep}}}};
}

inline json distill_report_json(const DistillReport& rep) {
  json curve_c = json::array();
  for (double v : rep.loss_curve_confident) curve_c.push_back(round9(v));
  json curve_u = json::array();
  for (double v : rep.loss_curve_uniform) curve_u.push_back(round9(v));
  return json{{"absrel_init", round9(rep.absrel_init)},
              {"absrel_confident", round9(rep.absrel_confident)},
              {"absrel_uniform", round9(rep.absrel_uniform)},
              {"improvement_pct", round9(rep.improvement_pct)},
              {"covered_pixels", rep.covered_pixels},
              {"loss_curve_confident", curve_c},
              {"loss_curve_uniform", curve_u}};
}

inline json gradsuite_report_json(const GradSuiteReport& suite, double tolerance) {
  json probes = json::array();
  for (const auto& p : suite.probes)
    probes.push_back(json{{"name", p.name},
                          {"seed", p.seed},
                          {"max_rel_error", p.check.max_rel_error},
                          {"num_checked", p.check.num_checked},
                          {"num_skipped_kinks", p.check.num_skipped_kinks},
                          {"worst_row", p.check.worst_row},
                          {"worst_col", p.check.worst_col},
                          {"input", p.check.worst_input}});
  return json{{"max_rel_error", suite.max_rel_error},
              {"tolerance", tolerance},
              {"passed", suite.max_rel_error <= tolerance},
              {"num_checked", suite.num_checked},
              {"num_skipped_kinks", suite.num_skipped_kinks},
              {"worst_probe", suite.worst_probe},
              {"probes", probes}};
}

}  // namespace xmodal
