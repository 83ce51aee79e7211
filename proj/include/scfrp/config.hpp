/**
 * @file config.hpp
 * @brief JSON run configuration: strict schema validation (unknown keys
 *        rejected), resolution into a SimSetup, and sweep plans with
 *        per-case overrides deep-merged onto a base configuration.
 */

#ifndef SCFRP_CONFIG_HPP
#define SCFRP_CONFIG_HPP

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "scfrp/simulate.hpp"

namespace scfrp {

using Json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Resolved run configuration: the solver setup plus descriptors that end
/// up in the run manifest.
struct RunConfig {
  std::string case_name = "run";
  std::string role = "training";
  SimSetup setup;
  double a11 = 0.5, a12 = 0.0;  // orientation tensor components
  double vf = 0.3;
  unsigned seed = 42;
  Json resolved;  // the fully resolved configuration document
};

namespace detail {

inline void reject_unknown(const Json& obj, const std::set<std::string>& allowed,
                           const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::string bad;
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) bad += (bad.empty() ? "" : ", ") + key;
  }
  if (!bad.empty()) throw ConfigError(where + ": unknown keys: " + bad);
}

inline double num(const Json& obj, const std::string& key, double fallback,
                  const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return obj[key].get<double>();
}

inline bool flag(const Json& obj, const std::string& key, bool fallback,
                 const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
  return obj[key].get<bool>();
}

inline Json deep_merge(Json base, const Json& overlay) {
  if (!overlay.is_object() || !base.is_object()) return overlay;
  for (const auto& [key, value] : overlay.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object()) {
      base[key] = deep_merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
  return base;
}

}  // namespace detail

/// Parse and validate one run configuration document.
inline RunConfig parse_run_config(const Json& doc) {
  using detail::flag;
  using detail::num;
  using detail::reject_unknown;

  reject_unknown(doc, {"case", "role", "geometry", "mesh", "orientation", "vf", "theta_K",
                       "material", "fracture", "electrical", "loading", "solver", "outputs",
                       "seed", "threads", "apply_thermal_dilatation"},
                 "config");
  RunConfig rc;
  if (doc.contains("case")) rc.case_name = doc["case"].get<std::string>();
  if (doc.contains("role")) {
    rc.role = doc["role"].get<std::string>();
    if (rc.role != "training" && rc.role != "test")
      throw ConfigError("config.role: must be 'training' or 'test'");
  }
  if (doc.contains("seed")) rc.seed = doc["seed"].get<unsigned>();

  const Json geo = doc.value("geometry", Json::object());
  reject_unknown(geo, {"W", "H", "notch", "thickness"}, "geometry");
  const double w = num(geo, "W", 1.0, "geometry");
  const double h = num(geo, "H", 1.0, "geometry");
  const double notch = num(geo, "notch", 0.5, "geometry");
  const double thickness = num(geo, "thickness", 1.0, "geometry");
  if (thickness != 1.0)
    throw ConfigError("geometry.thickness: only unit thickness is supported");

  const Json mesh = doc.value("mesh", Json::object());
  reject_unknown(mesh, {"h", "band", "h_coarse", "grade"}, "mesh");
  const double target_h = num(mesh, "h", 0.02, "mesh");
  const double band = num(mesh, "band", 0.12, "mesh");
  const double h_coarse = num(mesh, "h_coarse", 4.0 * target_h, "mesh");
  const double grade = num(mesh, "grade", 1.6, "mesh");

  const Json fr = doc.value("fracture", Json::object());
  reject_unknown(fr, {"Gc", "l0", "alpha_hat", "k_res"}, "fracture");
  rc.setup.pf.Gc = num(fr, "Gc", 0.2, "fracture");
  rc.setup.pf.l0 = num(fr, "l0", 0.02, "fracture");
  rc.setup.pf.alpha_hat = num(fr, "alpha_hat", 2.0, "fracture");
  rc.setup.pf.k_res = num(fr, "k_res", 1e-6, "fracture");

  const Json el = doc.value("electrical", Json::object());
  reject_unknown(el, {"sigma_m", "sigma_par0", "sigma_perp0", "gf_par", "gf_perp", "p_exp",
                      "k_e", "v_app", "lc_frac"},
                 "electrical");
  rc.setup.electrical.sigma_m = num(el, "sigma_m", 1e-14, "electrical");
  rc.setup.electrical.sigma_par0 = num(el, "sigma_par0", 66.7, "electrical");
  rc.setup.electrical.sigma_perp0 = num(el, "sigma_perp0", 15.9, "electrical");
  rc.setup.electrical.gf_par = num(el, "gf_par", 2.0, "electrical");
  rc.setup.electrical.gf_perp = num(el, "gf_perp", 2.0, "electrical");
  rc.setup.electrical.p_exp = num(el, "p_exp", 2.0, "electrical");
  rc.setup.electrical.k_e = num(el, "k_e", 1e-6, "electrical");
  rc.setup.electrical.v_app = num(el, "v_app", 1.0, "electrical");
  const double lc_frac = num(el, "lc_frac", 0.05, "electrical");

  const Json mat = doc.value("material", Json::object());
  reject_unknown(mat, {"mu_eq0", "mu_neq0", "kv0", "eps_dot0", "delta_H", "m_exp", "tau0",
                       "a_vp", "b_vp", "sigma0_vp", "eps0_vp", "alpha_theta", "a1", "a2", "a3",
                       "theta0", "matrix_weight"},
                 "material");
  MaterialParams& mp = rc.setup.material;
  if (mat.contains("matrix_weight")) {
    const std::string mw = mat["matrix_weight"].get<std::string>();
    if (mw == "fiber_fraction") {
      mp.matrix_weight = MaterialParams::MatrixWeight::kFiberFraction;
    } else if (mw == "unit") {
      mp.matrix_weight = MaterialParams::MatrixWeight::kUnit;
    } else {
      throw ConfigError("material.matrix_weight: must be 'fiber_fraction' or 'unit'");
    }
  }
  mp.mu_eq0 = num(mat, "mu_eq0", mp.mu_eq0, "material");
  mp.mu_neq0 = num(mat, "mu_neq0", mp.mu_neq0, "material");
  mp.kv0 = num(mat, "kv0", mp.kv0, "material");
  mp.eps_dot0 = num(mat, "eps_dot0", mp.eps_dot0, "material");
  mp.delta_H = num(mat, "delta_H", mp.delta_H, "material");
  mp.m_exp = num(mat, "m_exp", mp.m_exp, "material");
  mp.tau0 = num(mat, "tau0", mp.tau0, "material");
  mp.a_vp = num(mat, "a_vp", mp.a_vp, "material");
  mp.b_vp = num(mat, "b_vp", mp.b_vp, "material");
  mp.sigma0_vp = num(mat, "sigma0_vp", mp.sigma0_vp, "material");
  mp.eps0_vp = num(mat, "eps0_vp", mp.eps0_vp, "material");
  mp.alpha_theta = num(mat, "alpha_theta", mp.alpha_theta, "material");
  mp.a1 = num(mat, "a1", mp.a1, "material");
  mp.a2 = num(mat, "a2", mp.a2, "material");
  mp.a3 = num(mat, "a3", mp.a3, "material");
  mp.theta0 = num(mat, "theta0", mp.theta0, "material");

  rc.setup.theta = num(doc, "theta_K", 298.0, "config");
  rc.vf = num(doc, "vf", 0.3, "config");
  if (rc.vf < 0.0 || rc.vf > 1.0) throw ConfigError("config.vf: must lie in [0,1]");
  if (flag(doc, "apply_thermal_dilatation", false, "config")) {
    mp.J_theta = 1.0 + mp.alpha_theta * (rc.setup.theta - mp.theta0);
  }

  const Json orient = doc.value("orientation", Json::object());
  reject_unknown(orient, {"mode", "angles_deg", "weights", "A11", "A12"}, "orientation");
  const std::string mode = orient.value("mode", std::string("random"));
  Mat2 a;
  if (mode == "angles") {
    if (!orient.contains("angles_deg") || !orient.contains("weights"))
      throw ConfigError("orientation: angles mode needs angles_deg and weights");
    std::vector<double> ang, wts;
    for (const auto& v : orient["angles_deg"]) ang.push_back(v.get<double>() * M_PI / 180.0);
    for (const auto& v : orient["weights"]) wts.push_back(v.get<double>());
    a = orientation_from_angles(ang, wts);
  } else if (mode == "tensor") {
    const double a11 = num(orient, "A11", 0.5, "orientation");
    const double a12 = num(orient, "A12", 0.0, "orientation");
    a << a11, a12, a12, 1.0 - a11;
  } else if (mode == "random") {
    a = random_orientation();
  } else {
    throw ConfigError("orientation.mode: must be 'angles', 'tensor' or 'random'");
  }
  rc.setup.orientation = decompose_families(a, rc.vf);
  rc.a11 = a(0, 0);
  rc.a12 = a(0, 1);

  const Json load = doc.value("loading", Json::object());
  reject_unknown(load, {"rate_mm_per_min", "max_disp", "initial_du"}, "loading");
  rc.setup.loading.rate_mm_per_min = num(load, "rate_mm_per_min", 1.0, "loading");
  rc.setup.loading.max_disp = num(load, "max_disp", 0.03, "loading");
  rc.setup.loading.initial_du = num(load, "initial_du", 1e-3, "loading");

  const Json sol = doc.value("solver", Json::object());
  reject_unknown(sol, {"newton_tol", "max_newton", "stagger_tol", "max_stagger", "n_red",
                       "k_red", "fp_tol", "fp_max_iter", "tangent_eps", "consistent_tangent"},
                 "solver");
  SolverConfig& sc = rc.setup.solver;
  sc.newton_tol = num(sol, "newton_tol", sc.newton_tol, "solver");
  sc.max_newton = static_cast<int>(num(sol, "max_newton", sc.max_newton, "solver"));
  sc.stagger_tol = num(sol, "stagger_tol", sc.stagger_tol, "solver");
  sc.max_stagger = static_cast<int>(num(sol, "max_stagger", sc.max_stagger, "solver"));
  sc.n_red = static_cast<int>(num(sol, "n_red", sc.n_red, "solver"));
  sc.k_red = num(sol, "k_red", sc.k_red, "solver");
  sc.fp_tol = num(sol, "fp_tol", sc.fp_tol, "solver");
  sc.fp_max_iter = static_cast<int>(num(sol, "fp_max_iter", sc.fp_max_iter, "solver"));
  sc.tangent_eps = num(sol, "tangent_eps", sc.tangent_eps, "solver");
  sc.consistent_tangent_mode = flag(sol, "consistent_tangent", true, "solver");
  if (doc.contains("threads")) sc.threads = doc["threads"].get<int>();

  const Json outs = doc.value("outputs", Json::object());
  reject_unknown(outs, {"snapshots_at"}, "outputs");
  if (outs.contains("snapshots_at")) {
    for (const auto& v : outs["snapshots_at"]) rc.setup.snapshot_disps.push_back(v.get<double>());
  }

  rc.setup.mesh = build_sen_mesh(w, h, notch, target_h, band, h_coarse, grade, lc_frac * w);

  // record the fully resolved document for the manifest
  Json resolved = doc;
  resolved["case"] = rc.case_name;
  resolved["role"] = rc.role;
  resolved["seed"] = rc.seed;
  resolved["vf"] = rc.vf;
  resolved["theta_K"] = rc.setup.theta;
  resolved["orientation"] = {{"mode", "tensor"}, {"A11", rc.a11}, {"A12", rc.a12}};
  rc.resolved = resolved;
  return rc;
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  Json doc;
  try {
    in >> doc;
  } catch (const std::exception& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
  return doc;
}

inline RunConfig load_run_config(const std::string& path) {
  return parse_run_config(load_json_file(path));
}

/// A sweep plan: base configuration plus named per-case overrides.
struct SweepPlan {
  std::vector<RunConfig> cases;
};

inline SweepPlan parse_sweep_plan(const Json& doc) {
  detail::reject_unknown(doc, {"base", "cases"}, "plan");
  if (!doc.contains("cases") || !doc["cases"].is_array() || doc["cases"].empty())
    throw ConfigError("plan.cases: need a non-empty case list");
  const Json base = doc.value("base", Json::object());
  SweepPlan plan;
  std::set<std::string> names;
  for (const auto& entry : doc["cases"]) {
    detail::reject_unknown(entry, {"name", "role", "overrides"}, "plan.case");
    if (!entry.contains("name")) throw ConfigError("plan.case: missing name");
    Json merged = detail::deep_merge(base, entry.value("overrides", Json::object()));
    merged["case"] = entry["name"];
    if (entry.contains("role")) merged["role"] = entry["role"];
    RunConfig rc = parse_run_config(merged);
    if (!names.insert(rc.case_name).second)
      throw ConfigError("plan: duplicate case name " + rc.case_name);
    plan.cases.push_back(std::move(rc));
  }
  return plan;
}

inline SweepPlan load_sweep_plan(const std::string& path) {
  return parse_sweep_plan(load_json_file(path));
}

}  // namespace scfrp

#endif  // SCFRP_CONFIG_HPP
