// Configuration parsing with strict key checking, geometry construction,
// density-field JSON round-trips, and the export writers (legacy VTK mesh,
// history CSV, contour SVG, fitted-curve JSON).
#ifndef IGATOPT_IO_HPP
#define IGATOPT_IO_HPP

#include "igatopt/fairing.hpp"
#include "igatopt/opt_driver.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace igatopt {

using json = nlohmann::json;

namespace detail {

[[noreturn]] inline void config_error(const std::string& key, const std::string& what) {
  throw std::invalid_argument("config: key '" + key + "' " + what);
}

inline void require_keys(const json& obj, const std::string& context,
                         std::initializer_list<const char*> valid) {
  if (!obj.is_object()) config_error(context, "must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : valid)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) {
      std::string msg = "config: unknown key '" + it.key() + "' in " + context +
                        "; valid keys are:";
      for (const char* k : valid) msg += std::string(" ") + k;
      throw std::invalid_argument(msg);
    }
  }
}

inline double get_num(const json& o, const std::string& key, double fallback, double lo,
                      double hi, const char* range_text) {
  if (!o.contains(key)) return fallback;
  if (!o[key].is_number()) config_error(key, "must be a number");
  const double v = o[key].get<double>();
  if (v < lo || v > hi) config_error(key, std::string("must be ") + range_text);
  return v;
}

inline int get_int(const json& o, const std::string& key, int fallback, int lo, int hi,
                   const char* range_text) {
  if (!o.contains(key)) return fallback;
  if (!o[key].is_number_integer()) config_error(key, "must be an integer");
  const int v = o[key].get<int>();
  if (v < lo || v > hi) config_error(key, std::string("must be ") + range_text);
  return v;
}

inline std::pair<int, int> get_span_pair(const json& o, const std::string& key,
                                         std::pair<int, int> fallback) {
  if (!o.contains(key)) return fallback;
  const json& a = o[key];
  if (!a.is_array() || a.size() != 2 || !a[0].is_number_integer() ||
      !a[1].is_number_integer())
    config_error(key, "must be an array of two integers");
  const int s = a[0].get<int>(), t = a[1].get<int>();
  if (s < 1 || t < 1) config_error(key, "must have entries >= 1");
  return {s, t};
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

struct GeometryConfig {
  std::string preset = "plate";  // plate | hypar | cylinder | twisted
  std::string file;              // overrides the preset when set
  double size_x = 100.0, size_y = 100.0;  // plate
  double plan_x = 100.0, plan_y = 100.0;  // hypar plan form
  double height = 20.0;                   // hypar saddle height
  double radius = 50.0, angle_deg = 90.0, length = 100.0;  // cylinder / twisted
  double width = 50.0;                                     // twisted
  int degree = 2;
};

struct OutputConfig {
  std::string dir = "out";
  int checkpoint_every = 0;
  bool export_gradients = false;
};

struct RunConfig {
  GeometryConfig geometry;
  double thickness = 5.0;
  MaterialParams material;
  int design_spans_s = 15, design_spans_t = 15;
  int analysis_spans_s = 50, analysis_spans_t = 50;
  ProblemKind kind = ProblemKind::GlobalVolume;
  double volume_fraction = 0.3;
  LocalVolumeSpec local;
  MmaConfig mma;
  ProjectionSchedule projection;
  Termination termination;
  int gauss_extra = 0, gauss_zeta = 2;
  std::vector<BoundaryCondition> bcs;
  std::vector<LoadCase> loads;
  FairingConfig fairing;
  OutputConfig output;
  int seed = 0;
  int threads = 1;
  json echo;  // fully resolved configuration
};

// ---------------------------------------------------------------------------
// surfaces and density fields as JSON

inline json surface_to_json(const NurbsSurface& s) {
  json j;
  j["degree_s"] = s.kv_s.degree();
  j["degree_t"] = s.kv_t.degree();
  j["knots_s"] = s.kv_s.knots();
  j["knots_t"] = s.kv_t.knots();
  j["num_cp_s"] = s.num_cp_s();
  j["num_cp_t"] = s.num_cp_t();
  json cps = json::array(), ws = json::array();
  for (size_t a = 0; a < s.control_points.size(); ++a) {
    cps.push_back({s.control_points[a].x(), s.control_points[a].y(),
                   s.control_points[a].z()});
    ws.push_back(s.weights[a]);
  }
  j["control_points"] = std::move(cps);
  j["weights"] = std::move(ws);
  return j;
}

inline NurbsSurface surface_from_json(const json& j) {
  detail::require_keys(j, "surface", {"degree_s", "degree_t", "knots_s", "knots_t",
                                      "num_cp_s", "num_cp_t", "control_points", "weights"});
  for (const char* key : {"degree_s", "degree_t", "knots_s", "knots_t", "control_points",
                          "weights"})
    if (!j.contains(key)) detail::config_error(key, "is required in a surface object");
  NurbsSurface s;
  s.kv_s = KnotVector(j["degree_s"].get<int>(), j["knots_s"].get<std::vector<double>>());
  s.kv_t = KnotVector(j["degree_t"].get<int>(), j["knots_t"].get<std::vector<double>>());
  for (const auto& p : j["control_points"]) {
    if (!p.is_array() || p.size() != 3)
      detail::config_error("control_points", "entries must be [x, y, z]");
    s.control_points.emplace_back(p[0].get<double>(), p[1].get<double>(),
                                  p[2].get<double>());
  }
  s.weights = j["weights"].get<std::vector<double>>();
  s.validate();
  if (!s.kv_s.is_clamped() || !s.kv_t.is_clamped())
    detail::config_error("knots_s/knots_t", "must be clamped knot vectors");
  return s;
}

inline void save_density_field(const std::string& path, const DensityField& field,
                               const json& config_echo = json::object()) {
  json j;
  j["type"] = "igatopt_density_field";
  j["tau"] = field.tau;
  j["kappa"] = field.kappa;
  j["basis"] = surface_to_json(field.basis);
  j["coefficients"] =
      std::vector<double>(field.coefficients.data(),
                          field.coefficients.data() + field.coefficients.size());
  if (!config_echo.empty()) j["config"] = config_echo;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

inline DensityField load_density_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j = json::parse(in);
  if (!j.contains("type") || j["type"] != "igatopt_density_field")
    throw std::invalid_argument(path + ": not a density field file");
  DensityField f;
  f.tau = j.at("tau").get<double>();
  f.kappa = j.at("kappa").get<double>();
  f.basis = surface_from_json(j.at("basis"));
  const auto coeffs = j.at("coefficients").get<std::vector<double>>();
  f.coefficients = Eigen::Map<const Eigen::VectorXd>(coeffs.data(), coeffs.size());
  f.validate();
  return f;
}

// ---------------------------------------------------------------------------
// configuration

inline NurbsSurface make_geometry(const GeometryConfig& g) {
  if (!g.file.empty()) {
    std::ifstream in(g.file);
    if (!in) throw std::runtime_error("cannot read geometry file " + g.file);
    return surface_from_json(json::parse(in));
  }
  if (g.preset == "plate") return make_plate(g.size_x, g.size_y, g.degree);
  if (g.preset == "hypar") return make_hypar(g.plan_x, g.plan_y, g.height, g.degree);
  if (g.preset == "twisted") return make_twisted(g.length, g.width, g.degree);
  if (g.preset == "cylinder") {
    if (g.degree != 2)
      detail::config_error("geometry.degree", "must be 2 for the cylinder preset");
    return make_cylinder(g.radius, g.angle_deg, g.length);
  }
  detail::config_error("geometry.preset",
                       "must be one of: plate, hypar, cylinder, twisted");
}

inline RunConfig parse_config(const json& j) {
  detail::require_keys(
      j, "top level",
      {"geometry", "thickness", "material", "design_spans", "analysis_spans", "problem",
       "mma", "projection", "termination", "gauss", "bcs", "loads", "fairing", "output",
       "seed", "threads"});
  RunConfig c;

  if (j.contains("geometry")) {
    const json& g = j["geometry"];
    detail::require_keys(g, "geometry",
                         {"preset", "file", "size", "plan", "height", "radius",
                          "angle_deg", "length", "width", "degree"});
    if (g.contains("preset")) c.geometry.preset = g["preset"].get<std::string>();
    if (g.contains("file")) c.geometry.file = g["file"].get<std::string>();
    if (g.contains("size")) {
      const json& arr = g["size"];
      if (!arr.is_array() || arr.size() != 2)
        detail::config_error("geometry.size", "must be [len_x, len_y]");
      c.geometry.size_x = arr[0].get<double>();
      c.geometry.size_y = arr[1].get<double>();
    }
    if (g.contains("plan")) {
      const json& arr = g["plan"];
      if (!arr.is_array() || arr.size() != 2)
        detail::config_error("geometry.plan", "must be [plan_x, plan_y]");
      c.geometry.plan_x = arr[0].get<double>();
      c.geometry.plan_y = arr[1].get<double>();
    }
    c.geometry.height = detail::get_num(g, "height", c.geometry.height, -1e9, 1e9, "finite");
    c.geometry.radius = detail::get_num(g, "radius", c.geometry.radius, 1e-9, 1e9, "positive");
    c.geometry.angle_deg =
        detail::get_num(g, "angle_deg", c.geometry.angle_deg, 1e-6, 179.999, "in (0, 180)");
    c.geometry.length = detail::get_num(g, "length", c.geometry.length, 1e-9, 1e9, "positive");
    c.geometry.width = detail::get_num(g, "width", c.geometry.width, 1e-9, 1e9, "positive");
    c.geometry.degree = detail::get_int(g, "degree", 2, 2, 5, "an integer in [2, 5]");
  }

  c.thickness = detail::get_num(j, "thickness", 5.0, 1e-9, 1e9, "positive");

  if (j.contains("material")) {
    const json& m = j["material"];
    detail::require_keys(m, "material", {"E0", "nu", "E_min_ratio", "penal"});
    c.material.E0 = detail::get_num(m, "E0", 2100.0, 1e-12, 1e30, "positive");
    c.material.nu = detail::get_num(m, "nu", 0.3, 0.0, 0.5 - 1e-9, "in [0, 0.5)");
    const double ratio =
        detail::get_num(m, "E_min_ratio", 1e-6, 1e-16, 0.1, "in (0, 0.1]");
    c.material.E_min = ratio * c.material.E0;
    c.material.penal = detail::get_num(m, "penal", 5.0, 1.0, 16.0, "in [1, 16]");
  } else {
    c.material.E0 = 2100.0;
    c.material.E_min = 1e-6 * 2100.0;
    c.material.nu = 0.3;
    c.material.penal = 5.0;
  }

  std::tie(c.design_spans_s, c.design_spans_t) =
      detail::get_span_pair(j, "design_spans", {15, 15});
  std::tie(c.analysis_spans_s, c.analysis_spans_t) =
      detail::get_span_pair(j, "analysis_spans", {50, 50});
  if (c.analysis_spans_s < c.design_spans_s || c.analysis_spans_t < c.design_spans_t)
    detail::config_error("analysis_spans", "must be >= design_spans componentwise");

  if (j.contains("problem")) {
    const json& p = j["problem"];
    detail::require_keys(p, "problem", {"kind", "volume_fraction", "alpha", "radius", "gamma"});
    const std::string kind = p.contains("kind") ? p["kind"].get<std::string>() : "global_volume";
    if (kind == "global_volume")
      c.kind = ProblemKind::GlobalVolume;
    else if (kind == "local_volume")
      c.kind = ProblemKind::LocalVolume;
    else
      detail::config_error("problem.kind", "must be 'global_volume' or 'local_volume'");
    c.volume_fraction =
        detail::get_num(p, "volume_fraction", 0.3, 1e-6, 1.0 - 1e-6, "in (0, 1)");
    c.local.alpha = detail::get_num(p, "alpha", 0.5, 1e-6, 1.0 - 1e-6, "in (0, 1)");
    c.local.radius = detail::get_int(p, "radius", 8, 1, 1000, "a positive integer");
    c.local.gamma = detail::get_num(p, "gamma", 16.0, 1.0 + 1e-9, 1024.0, "> 1");
  }

  if (j.contains("mma")) {
    const json& m = j["mma"];
    detail::require_keys(m, "mma", {"move", "asyinit", "asyincr", "asydecr"});
    c.mma.move = detail::get_num(m, "move", 0.1, 1e-6, 1.0, "in (0, 1]");
    c.mma.asyinit = detail::get_num(m, "asyinit", 0.1, 1e-6, 10.0, "in (0, 10]");
    c.mma.asyincr = detail::get_num(m, "asyincr", 1.1, 1.0 + 1e-9, 10.0, "> 1");
    c.mma.asydecr = detail::get_num(m, "asydecr", 0.7, 1e-6, 1.0 - 1e-9, "in (0, 1)");
  }

  if (j.contains("projection")) {
    const json& p = j["projection"];
    detail::require_keys(p, "projection",
                         {"kappa", "tau_initial", "tau_max", "tau_double_every"});
    c.projection.kappa = detail::get_num(p, "kappa", 0.5, 0.25, 0.75, "in [0.25, 0.75]");
    c.projection.tau_initial =
        detail::get_num(p, "tau_initial", 2.0, 1e-6, 1e6, "positive");
    c.projection.tau_max = detail::get_num(p, "tau_max", 64.0, c.projection.tau_initial,
                                           1e9, ">= tau_initial");
    c.projection.tau_double_every =
        detail::get_int(p, "tau_double_every", 25, 1, 100000, "a positive integer");
  }

  if (j.contains("termination")) {
    const json& t = j["termination"];
    detail::require_keys(t, "termination", {"max_iterations", "change_tol", "consecutive"});
    c.termination.max_iterations =
        detail::get_int(t, "max_iterations", 200, 1, 100000, "a positive integer");
    c.termination.change_tol =
        detail::get_num(t, "change_tol", 0.005, 0.0, 1.0, "in [0, 1]");
    c.termination.consecutive =
        detail::get_int(t, "consecutive", 5, 1, 1000, "a positive integer");
  }

  if (j.contains("gauss")) {
    const json& g = j["gauss"];
    detail::require_keys(g, "gauss", {"extra_points", "zeta_points"});
    c.gauss_extra = detail::get_int(g, "extra_points", 0, 0, 4, "in [0, 4]");
    c.gauss_zeta = detail::get_int(g, "zeta_points", 2, 1, 6, "in [1, 6]");
  }

  if (j.contains("bcs")) {
    if (!j["bcs"].is_array()) detail::config_error("bcs", "must be an array");
    for (const json& b : j["bcs"]) {
      detail::require_keys(b, "bcs entry", {"edge", "corner", "point"});
      if (b.contains("edge")) {
        const std::string e = b["edge"].get<std::string>();
        if (e != "s0" && e != "s1" && e != "t0" && e != "t1")
          detail::config_error("bcs.edge", "must be one of: s0, s1, t0, t1");
        c.bcs.push_back(BoundaryCondition::Edge(e));
      } else if (b.contains("corner")) {
        const json& a = b["corner"];
        if (!a.is_array() || a.size() != 2)
          detail::config_error("bcs.corner", "must be [i, j] with entries 0 or 1");
        c.bcs.push_back(BoundaryCondition::Corner(a[0].get<int>(), a[1].get<int>()));
      } else if (b.contains("point")) {
        const json& a = b["point"];
        if (!a.is_array() || a.size() != 2)
          detail::config_error("bcs.point", "must be [s, t] in the unit square");
        c.bcs.push_back(BoundaryCondition::Point(a[0].get<double>(), a[1].get<double>()));
      } else {
        detail::config_error("bcs entry", "must contain 'edge', 'corner' or 'point'");
      }
    }
  } else {
    c.bcs = {BoundaryCondition::Corner(0, 0), BoundaryCondition::Corner(1, 0),
             BoundaryCondition::Corner(0, 1), BoundaryCondition::Corner(1, 1)};
  }

  if (j.contains("loads")) {
    if (!j["loads"].is_array()) detail::config_error("loads", "must be an array");
    for (const json& l : j["loads"]) {
      detail::require_keys(l, "loads entry", {"type", "at", "param", "value", "force"});
      if (!l.contains("type")) detail::config_error("loads.type", "is required");
      if (!l.contains("force") || !l["force"].is_array() || l["force"].size() != 3)
        detail::config_error("loads.force", "must be [fx, fy, fz]");
      const Vec3 f(l["force"][0].get<double>(), l["force"][1].get<double>(),
                   l["force"][2].get<double>());
      const std::string type = l["type"].get<std::string>();
      if (type == "point") {
        if (!l.contains("at") || !l["at"].is_array() || l["at"].size() != 2)
          detail::config_error("loads.at", "must be [s, t] for a point load");
        c.loads.push_back(
            LoadCase::PointLoad(l["at"][0].get<double>(), l["at"][1].get<double>(), f));
      } else if (type == "line") {
        const std::string param =
            l.contains("param") ? l["param"].get<std::string>() : "t";
        if (param != "s" && param != "t")
          detail::config_error("loads.param", "must be 's' or 't'");
        const double value = detail::get_num(l, "value", 0.5, 0.0, 1.0, "in [0, 1]");
        c.loads.push_back(LoadCase::LineLoad(param[0], value, f));
      } else if (type == "pressure") {
        c.loads.push_back(LoadCase::PressureLoad(f));
      } else {
        detail::config_error("loads.type", "must be one of: point, line, pressure");
      }
    }
  } else {
    c.loads = {LoadCase::PointLoad(0.5, 0.5, Vec3(0, 0, -100.0))};
  }

  if (j.contains("fairing")) {
    const json& f = j["fairing"];
    detail::require_keys(f, "fairing",
                         {"grid", "lambda", "control_points", "min_loop_points"});
    c.fairing.grid = detail::get_int(f, "grid", 200, 2, 5000, "in [2, 5000]");
    c.fairing.lambda = detail::get_num(f, "lambda", 0.01, 0.0, 1e6, ">= 0");
    c.fairing.control_points =
        detail::get_int(f, "control_points", 0, 0, 10000, ">= 0 (0 = automatic)");
    c.fairing.min_loop_points =
        detail::get_int(f, "min_loop_points", 8, 2, 10000, ">= 2");
  }

  if (j.contains("output")) {
    const json& o = j["output"];
    detail::require_keys(o, "output", {"dir", "checkpoint_every", "export_gradients"});
    if (o.contains("dir")) c.output.dir = o["dir"].get<std::string>();
    c.output.checkpoint_every =
        detail::get_int(o, "checkpoint_every", 0, 0, 100000, ">= 0");
    if (o.contains("export_gradients")) {
      if (!o["export_gradients"].is_boolean())
        detail::config_error("output.export_gradients", "must be a boolean");
      c.output.export_gradients = o["export_gradients"].get<bool>();
    }
  }

  c.seed = detail::get_int(j, "seed", 0, 0, 1 << 30, ">= 0");
  c.threads = detail::get_int(j, "threads", 1, 1, 256, "in [1, 256]");

  // fully resolved echo for reproducible re-runs
  json echo;
  echo["geometry"] = {{"preset", c.geometry.preset},
                      {"file", c.geometry.file},
                      {"size", {c.geometry.size_x, c.geometry.size_y}},
                      {"plan", {c.geometry.plan_x, c.geometry.plan_y}},
                      {"height", c.geometry.height},
                      {"radius", c.geometry.radius},
                      {"angle_deg", c.geometry.angle_deg},
                      {"length", c.geometry.length},
                      {"width", c.geometry.width},
                      {"degree", c.geometry.degree}};
  echo["thickness"] = c.thickness;
  echo["material"] = {{"E0", c.material.E0},
                      {"nu", c.material.nu},
                      {"E_min_ratio", c.material.E_min / c.material.E0},
                      {"penal", c.material.penal}};
  echo["design_spans"] = {c.design_spans_s, c.design_spans_t};
  echo["analysis_spans"] = {c.analysis_spans_s, c.analysis_spans_t};
  echo["problem"] = {
      {"kind", c.kind == ProblemKind::GlobalVolume ? "global_volume" : "local_volume"},
      {"volume_fraction", c.volume_fraction},
      {"alpha", c.local.alpha},
      {"radius", c.local.radius},
      {"gamma", c.local.gamma}};
  echo["mma"] = {{"move", c.mma.move},
                 {"asyinit", c.mma.asyinit},
                 {"asyincr", c.mma.asyincr},
                 {"asydecr", c.mma.asydecr}};
  echo["projection"] = {{"kappa", c.projection.kappa},
                        {"tau_initial", c.projection.tau_initial},
                        {"tau_max", c.projection.tau_max},
                        {"tau_double_every", c.projection.tau_double_every}};
  echo["termination"] = {{"max_iterations", c.termination.max_iterations},
                         {"change_tol", c.termination.change_tol},
                         {"consecutive", c.termination.consecutive}};
  echo["gauss"] = {{"extra_points", c.gauss_extra}, {"zeta_points", c.gauss_zeta}};
  echo["fairing"] = {{"grid", c.fairing.grid},
                     {"lambda", c.fairing.lambda},
                     {"control_points", c.fairing.control_points},
                     {"min_loop_points", c.fairing.min_loop_points}};
  echo["bcs"] = j.contains("bcs") ? j["bcs"] : json::parse(R"([{"corner":[0,0]},{"corner":[1,0]},{"corner":[0,1]},{"corner":[1,1]}])");
  echo["loads"] = j.contains("loads")
                      ? j["loads"]
                      : json::parse(R"([{"type":"point","at":[0.5,0.5],"force":[0,0,-100.0]}])");
  echo["output"] = {{"dir", c.output.dir},
                    {"checkpoint_every", c.output.checkpoint_every},
                    {"export_gradients", c.output.export_gradients}};
  echo["seed"] = c.seed;
  c.echo = std::move(echo);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  return parse_config(json::parse(in));
}

inline OptProblem build_problem(const RunConfig& c) {
  OptProblem p;
  ShellModel cad{make_geometry(c.geometry), c.thickness};
  p.model = build_multilevel(cad, c.design_spans_s, c.design_spans_t, c.analysis_spans_s,
                             c.analysis_spans_t);
  p.material = c.material;
  p.bcs = c.bcs;
  p.loads = c.loads;
  p.kind = c.kind;
  p.volume_fraction = c.volume_fraction;
  p.local = c.local;
  p.mma = c.mma;
  p.projection = c.projection;
  p.termination = c.termination;
  p.gauss_extra = c.gauss_extra;
  p.gauss_zeta = c.gauss_zeta;
  p.threads = c.threads;
  return p;
}

// ---------------------------------------------------------------------------
// exports

inline void write_history_csv(const std::string& path, const OptHistory& history,
                              const json& config_echo = json::object()) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (!config_echo.empty()) out << "# config: " << config_echo.dump() << "\n";
  out << "iter,tau,compliance,volume,volume_fraction,constraint,vbar,max_rho_bar,"
         "max_change,grayscale\n";
  for (const IterationRecord& r : history.records) {
    out << r.iter << ',' << detail::fmt_double(r.tau) << ','
        << detail::fmt_double(r.compliance) << ',' << detail::fmt_double(r.volume) << ','
        << detail::fmt_double(r.volume_fraction) << ','
        << detail::fmt_double(r.constraint) << ',';
    if (std::isfinite(r.vbar)) out << detail::fmt_double(r.vbar);
    out << ',';
    if (std::isfinite(r.max_rho_bar)) out << detail::fmt_double(r.max_rho_bar);
    out << ',' << detail::fmt_double(r.max_change) << ','
        << detail::fmt_double(r.grayscale) << "\n";
  }
}

// Legacy-VTK ASCII unstructured grid of the mid-surface element mesh with a
// per-element density array; fitted boundary polylines (if any) are appended
// as VTK_POLY_LINE cells carrying density -1.
inline void write_vtk(const std::string& path, const NurbsSurface& analysis_surface,
                      const Eigen::VectorXd& rho_elem,
                      const std::vector<std::vector<Vec3>>& polylines = {},
                      const std::string& title = "igatopt shell export") {
  const auto bs = analysis_surface.kv_s.breakpoints();
  const auto bt = analysis_surface.kv_t.breakpoints();
  const int ns = static_cast<int>(bs.size()) - 1;
  const int nt = static_cast<int>(bt.size()) - 1;
  if (rho_elem.size() != static_cast<Eigen::Index>(ns) * nt)
    throw std::invalid_argument("write_vtk: density count does not match the element grid");

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# vtk DataFile Version 3.0\n";
  out << title.substr(0, 255) << "\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";

  int n_curve_points = 0;
  for (const auto& pl : polylines) n_curve_points += static_cast<int>(pl.size());
  const int n_mesh_points = (ns + 1) * (nt + 1);
  out << "POINTS " << (n_mesh_points + n_curve_points) << " double\n";
  for (int j = 0; j <= nt; ++j)
    for (int i = 0; i <= ns; ++i) {
      const Vec3 p = analysis_surface.point(bs[i], bt[j]);
      out << detail::fmt_double(p.x()) << ' ' << detail::fmt_double(p.y()) << ' '
          << detail::fmt_double(p.z()) << "\n";
    }
  for (const auto& pl : polylines)
    for (const Vec3& p : pl)
      out << detail::fmt_double(p.x()) << ' ' << detail::fmt_double(p.y()) << ' '
          << detail::fmt_double(p.z()) << "\n";

  const int n_cells = ns * nt + static_cast<int>(polylines.size());
  int cell_ints = ns * nt * 5;
  for (const auto& pl : polylines) cell_ints += 1 + static_cast<int>(pl.size());
  out << "CELLS " << n_cells << ' ' << cell_ints << "\n";
  for (int j = 0; j < nt; ++j)
    for (int i = 0; i < ns; ++i)
      out << "4 " << (j * (ns + 1) + i) << ' ' << (j * (ns + 1) + i + 1) << ' '
          << ((j + 1) * (ns + 1) + i + 1) << ' ' << ((j + 1) * (ns + 1) + i) << "\n";
  int base = n_mesh_points;
  for (const auto& pl : polylines) {
    out << pl.size();
    for (size_t k = 0; k < pl.size(); ++k) out << ' ' << (base + static_cast<int>(k));
    out << "\n";
    base += static_cast<int>(pl.size());
  }

  out << "CELL_TYPES " << n_cells << "\n";
  for (int e = 0; e < ns * nt; ++e) out << "9\n";
  for (size_t k = 0; k < polylines.size(); ++k) out << "4\n";

  out << "CELL_DATA " << n_cells << "\nSCALARS density double 1\nLOOKUP_TABLE default\n";
  for (Eigen::Index e = 0; e < rho_elem.size(); ++e)
    out << detail::fmt_double(rho_elem[e]) << "\n";
  for (size_t k = 0; k < polylines.size(); ++k) out << "-1\n";
}

// Parametric-domain SVG: raw extracted contours in gray, fitted curves on top.
inline void write_svg(const std::string& path, const std::vector<ContourCurve>& curves,
                      int canvas = 1000) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << canvas << ' '
      << canvas << "\">\n";
  out << "<rect width=\"" << canvas << "\" height=\"" << canvas
      << "\" fill=\"white\" stroke=\"#999\"/>\n";
  auto X = [&](double s) { return s * canvas; };
  auto Y = [&](double t) { return (1.0 - t) * canvas; };
  for (const ContourCurve& c : curves) {
    out << "<polyline fill=\"none\" stroke=\"#bbbbbb\" stroke-width=\"2\" points=\"";
    for (const Vec2& p : c.points) out << X(p.x()) << ',' << Y(p.y()) << ' ';
    if (c.closed && !c.points.empty())
      out << X(c.points.front().x()) << ',' << Y(c.points.front().y());
    out << "\"/>\n";
  }
  for (const ContourCurve& c : curves) {
    out << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
    for (int k = 0; k <= 200; ++k) {
      const Vec2 p = c.curve.point(k / 200.0);
      out << X(p.x()) << ',' << Y(p.y()) << ' ';
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

inline void write_curves_json(const std::string& path,
                              const std::vector<ContourCurve>& curves,
                              const json& config_echo = json::object()) {
  json j;
  j["type"] = "igatopt_contour_curves";
  json arr = json::array();
  for (const ContourCurve& c : curves) {
    json e;
    e["closed"] = c.closed;
    e["degree"] = 3;
    e["knots"] = c.curve.knots.knots();
    json cps = json::array();
    for (const Vec2& p : c.curve.control_points) cps.push_back({p.x(), p.y()});
    e["control_points"] = std::move(cps);
    e["rms_error"] = c.rms_error;
    e["num_points"] = c.points.size();
    arr.push_back(std::move(e));
  }
  j["curves"] = std::move(arr);
  if (!config_echo.empty()) j["config"] = config_echo;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

// Gradient grid as CSV rows over the design net (debugging export).
inline void write_gradient_csv(const std::string& path, const Eigen::VectorXd& grad,
                               int num_cp_s, int num_cp_t) {
  if (grad.size() != static_cast<Eigen::Index>(num_cp_s) * num_cp_t)
    throw std::invalid_argument("write_gradient_csv: grid size mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (int jj = 0; jj < num_cp_t; ++jj) {
    for (int ii = 0; ii < num_cp_s; ++ii) {
      if (ii) out << ',';
      out << detail::fmt_double(grad[jj * num_cp_s + ii]);
    }
    out << "\n";
  }
}

}  // namespace igatopt

#endif  // IGATOPT_IO_HPP
