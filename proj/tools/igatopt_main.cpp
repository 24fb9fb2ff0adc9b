// Command-line front end: optimize | fair | check-gradients | export-geometry.
#include "igatopt/io.hpp"
#include "igatopt/sensitivities.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <random>

namespace fs = std::filesystem;
using namespace igatopt;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir);
}

void write_config_echo(const RunConfig& cfg, const std::string& dir) {
  std::ofstream out(dir + "/config.json");
  out << cfg.echo.dump(2) << "\n";
}

// Element densities of a field on its problem's analysis grid.
Eigen::VectorXd field_element_densities(const OptProblem& problem, const DensityField& field) {
  AnalysisModel model(problem.model.analysis, problem.model.cad.thickness,
                      problem.material, problem.gauss_extra, problem.gauss_zeta,
                      problem.threads);
  const DesignMap map = DesignMap::build(field.basis, model.element_centers());
  return element_densities(field, map);
}

int cmd_optimize(const std::string& config_path, const std::string& out_dir,
                 int threads, int checkpoint_every, bool run_fairing) {
  RunConfig cfg = load_config(config_path);
  if (!out_dir.empty()) cfg.output.dir = out_dir;
  if (threads > 0) cfg.threads = threads;
  if (checkpoint_every >= 0) cfg.output.checkpoint_every = checkpoint_every;
  ensure_dir(cfg.output.dir);
  write_config_echo(cfg, cfg.output.dir);

  const OptProblem problem = build_problem(cfg);
  log_info("optimize: %d x %d elements, %d design coefficients",
           cfg.analysis_spans_s, cfg.analysis_spans_t,
           (cfg.design_spans_s + problem.model.design.kv_s.degree()) *
               (cfg.design_spans_t + problem.model.design.kv_t.degree()));

  CheckpointFn checkpoint;
  if (cfg.output.checkpoint_every > 0) {
    checkpoint = [&](int iter, const DensityField& f) {
      if (iter % cfg.output.checkpoint_every == 0)
        save_density_field(cfg.output.dir + "/checkpoint_" + std::to_string(iter) + ".json",
                           f, cfg.echo);
    };
  }

  const RunResult result = run_optimization(problem, checkpoint);
  const IterationRecord& last = result.history.records.back();
  std::printf("finished after %zu iterations (%s); compliance %.6g, volume fraction %.4f\n",
              result.history.records.size(),
              result.converged ? "converged" : "iteration limit", last.compliance,
              last.volume / result.solid_volume);

  write_history_csv(cfg.output.dir + "/history.csv", result.history, cfg.echo);
  save_density_field(cfg.output.dir + "/field.json", result.field, cfg.echo);

  const Eigen::VectorXd rho = field_element_densities(problem, result.field);
  std::vector<std::vector<Vec3>> polylines;
  if (run_fairing) {
    const auto curves = fair_boundaries(result.field, cfg.fairing);
    for (const ContourCurve& c : curves)
      polylines.push_back(curve_to_surface(c.curve, result.field.basis));
    write_svg(cfg.output.dir + "/contours.svg", curves);
    write_curves_json(cfg.output.dir + "/curves.json", curves, cfg.echo);
    std::printf("fairing: %zu boundary curves\n", curves.size());
  }
  write_vtk(cfg.output.dir + "/mesh.vtk", problem.model.analysis, rho, polylines);

  if (cfg.output.export_gradients) {
    const int ns = problem.model.design.num_cp_s(), nt = problem.model.design.num_cp_t();
    write_gradient_csv(cfg.output.dir + "/gradient_compliance.csv",
                       result.final_compliance_gradient, ns, nt);
    write_gradient_csv(cfg.output.dir + "/gradient_constraint.csv",
                       result.final_constraint_gradient, ns, nt);
  }
  return 0;
}

int cmd_fair(const std::string& field_path, const std::string& config_path,
             const std::string& out_dir) {
  FairingConfig fcfg;
  json echo = json::object();
  std::string dir = out_dir.empty() ? "out" : out_dir;
  if (!config_path.empty()) {
    RunConfig cfg = load_config(config_path);
    fcfg = cfg.fairing;
    echo = cfg.echo;
    if (out_dir.empty()) dir = cfg.output.dir;
  }
  ensure_dir(dir);

  const DensityField field = load_density_field(field_path);
  const auto curves = fair_boundaries(field, fcfg);
  write_svg(dir + "/contours.svg", curves);
  write_curves_json(dir + "/curves.json", curves, echo);
  std::printf("fairing: %zu boundary curves (grid %d, lambda %g)\n", curves.size(),
              fcfg.grid, fcfg.lambda);
  for (const ContourCurve& c : curves)
    std::printf("  %s curve: %zu points, rms %.3g\n", c.closed ? "closed" : "open",
                c.points.size(), c.rms_error);
  return 0;
}

int cmd_check_gradients(const std::string& config_path, int samples) {
  const RunConfig cfg = load_config(config_path);
  const OptProblem problem = build_problem(cfg);

  AnalysisModel model(problem.model.analysis, problem.model.cad.thickness,
                      problem.material, problem.gauss_extra, problem.gauss_zeta,
                      problem.threads);
  model.fix_boundary(problem.bcs);
  model.set_loads(problem.loads);
  const DesignMap map = DesignMap::build(problem.model.design, model.element_centers());
  const Eigen::VectorXd volumes = model.solid_volumes();

  DensityField field;
  field.basis = problem.model.design;
  field.tau = problem.projection.tau_initial;
  field.kappa = problem.projection.kappa;
  std::mt19937 rng(cfg.seed + 7919);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  field.coefficients = Eigen::VectorXd::Constant(map.num_coefficients, 0.45);
  for (Eigen::Index i = 0; i < field.coefficients.size(); ++i)
    field.coefficients[i] += dist(rng);

  std::vector<int> indices;
  std::uniform_int_distribution<int> pick(0, map.num_coefficients - 1);
  while (static_cast<int>(indices.size()) < std::min(samples, map.num_coefficients)) {
    const int k = pick(rng);
    if (std::find(indices.begin(), indices.end(), k) == indices.end())
      indices.push_back(k);
  }

  const Eigen::VectorXd rho = element_densities(field, map);
  const Eigen::VectorXd U = model.solve(rho);
  const Eigen::VectorXd dC = compliance_gradient(model, U, field, map);
  const FdCheckResult rc = fd_gradient_check(
      [&](const Eigen::VectorXd& x) {
        DensityField f = field;
        f.coefficients = x;
        return model.compliance(model.solve(element_densities(f, map)));
      },
      field.coefficients, dC, indices, 1e-5);
  std::printf("compliance gradient: max relative FD error %.3e over %zu coefficients\n",
              rc.max_rel_error, indices.size());

  const Eigen::VectorXd dV = volume_gradient(volumes, field, map);
  const FdCheckResult rv = fd_gradient_check(
      [&](const Eigen::VectorXd& x) {
        DensityField f = field;
        f.coefficients = x;
        return total_volume(element_densities(f, map), volumes);
      },
      field.coefficients, dV, indices, 1e-5);
  std::printf("volume gradient:     max relative FD error %.3e\n", rv.max_rel_error);

  const Neighborhoods nb = Neighborhoods::build(
      model.element_centroids(), model.element_areas(), volumes, problem.local.radius);
  const Eigen::VectorXd dVbar =
      local_volume_gradient(volumes, nb, field, map, problem.local.gamma);
  const FdCheckResult rb = fd_gradient_check(
      [&](const Eigen::VectorXd& x) {
        DensityField f = field;
        f.coefficients = x;
        return aggregate_pmean(local_average(element_densities(f, map), nb, volumes),
                               problem.local.gamma);
      },
      field.coefficients, dVbar, indices, 1e-5);
  std::printf("local-volume gradient: max relative FD error %.3e\n", rb.max_rel_error);

  const double worst = std::max({rc.max_rel_error, rv.max_rel_error, rb.max_rel_error});
  return worst <= 1e-3 ? 0 : 1;
}

int cmd_export_geometry(const std::string& config_path, const std::string& out_dir) {
  const RunConfig cfg_in = load_config(config_path);
  RunConfig cfg = cfg_in;
  if (!out_dir.empty()) cfg.output.dir = out_dir;
  ensure_dir(cfg.output.dir);
  write_config_echo(cfg, cfg.output.dir);

  const OptProblem problem = build_problem(cfg);
  const int ne = problem.model.analysis.kv_s.span_count() *
                 problem.model.analysis.kv_t.span_count();
  write_vtk(cfg.output.dir + "/mesh.vtk", problem.model.analysis,
            Eigen::VectorXd::Ones(ne));
  std::ofstream out(cfg.output.dir + "/surface.json");
  out << surface_to_json(problem.model.analysis).dump(2) << "\n";
  std::printf("exported analysis mesh (%d elements) and surface description\n", ne);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Isogeometric topology optimization of Reissner-Mindlin shells"};
  app.require_subcommand(1);

  std::string config_path, out_dir, field_path;
  int threads = 0, checkpoint_every = -1, samples = 10;
  bool with_fairing = false;

  auto* opt = app.add_subcommand("optimize", "run a compliance optimization");
  opt->add_option("--config", config_path, "JSON configuration")->required();
  opt->add_option("--out", out_dir, "output directory (overrides config)");
  opt->add_option("--threads", threads, "worker threads for element precompute");
  opt->add_option("--checkpoint-every", checkpoint_every,
                  "write a field checkpoint every K iterations");
  opt->add_flag("--fair", with_fairing, "run boundary fairing after optimizing");

  auto* fair = app.add_subcommand("fair", "extract and fair boundaries of a saved field");
  fair->add_option("--field", field_path, "density field JSON")->required();
  fair->add_option("--config", config_path, "JSON configuration for fairing parameters");
  fair->add_option("--out", out_dir, "output directory");

  auto* check = app.add_subcommand("check-gradients", "finite-difference gradient check");
  check->add_option("--config", config_path, "JSON configuration")->required();
  check->add_option("--samples", samples, "number of coefficients to probe");

  auto* expg = app.add_subcommand("export-geometry", "dump a preset's analysis mesh");
  expg->add_option("--config", config_path, "JSON configuration")->required();
  expg->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(opt))
      return cmd_optimize(config_path, out_dir, threads, checkpoint_every, with_fairing);
    if (app.got_subcommand(fair)) return cmd_fair(field_path, config_path, out_dir);
    if (app.got_subcommand(check)) return cmd_check_gradients(config_path, samples);
    if (app.got_subcommand(expg)) return cmd_export_geometry(config_path, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
