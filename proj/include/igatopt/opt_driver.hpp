// Orchestrates the two optimization problems (global volume bound, aggregated
// local volume bound): model construction, the projection continuation
// schedule, the MMA iteration loop, termination, and history recording.
#ifndef IGATOPT_OPT_DRIVER_HPP
#define IGATOPT_OPT_DRIVER_HPP

#include "igatopt/density_field.hpp"
#include "igatopt/mma.hpp"
#include "igatopt/rm_analysis.hpp"
#include "igatopt/sensitivities.hpp"

#include <chrono>
#include <functional>
#include <limits>
#include <vector>

namespace igatopt {

enum class ProblemKind { GlobalVolume, LocalVolume };

struct ProjectionSchedule {
  double kappa = 0.5;
  double tau_initial = 2.0;
  double tau_max = 64.0;
  int tau_double_every = 25;

  void validate() const {
    if (!(tau_initial > 0.0) || !(tau_max >= tau_initial))
      throw std::invalid_argument("ProjectionSchedule: need 0 < tau_initial <= tau_max");
    if (tau_double_every < 1)
      throw std::invalid_argument("ProjectionSchedule: tau_double_every must be >= 1");
    if (!(kappa >= 0.25 && kappa <= 0.75))
      throw std::invalid_argument("ProjectionSchedule: kappa must be in [0.25, 0.75]");
  }
};

struct Termination {
  int max_iterations = 200;
  double change_tol = 0.005;
  int consecutive = 5;
};

struct OptProblem {
  MultiLevelModel model;
  MaterialParams material;
  std::vector<BoundaryCondition> bcs;
  std::vector<LoadCase> loads;
  ProblemKind kind = ProblemKind::GlobalVolume;
  double volume_fraction = 0.3;  // GlobalVolume: V* = fraction * V_s
  LocalVolumeSpec local;         // LocalVolume parameters
  MmaConfig mma;
  ProjectionSchedule projection;
  Termination termination;
  int gauss_extra = 0;
  int gauss_zeta = 2;
  int threads = 1;
};

// tau starts at tau_initial and doubles every tau_double_every iterations,
// capped at tau_max.
inline double continuation_tau(int iter, const ProjectionSchedule& ps) {
  if (iter < 1) throw std::invalid_argument("continuation_tau: iter must be >= 1");
  const int doublings = (iter - 1) / ps.tau_double_every;
  return std::min(ps.tau_max, ps.tau_initial * std::pow(2.0, doublings));
}

// Fraction of elements with intermediate density, strict 0.1 < rho < 0.9.
inline double grayscale_fraction(const Eigen::VectorXd& rho_elem) {
  if (rho_elem.size() == 0) return 0.0;
  int count = 0;
  for (Eigen::Index e = 0; e < rho_elem.size(); ++e)
    if (rho_elem[e] > 0.1 && rho_elem[e] < 0.9) ++count;
  return static_cast<double>(count) / static_cast<double>(rho_elem.size());
}

struct IterationRecord {
  int iter = 0;
  double tau = 0;
  double compliance = 0;
  double volume = 0;
  double volume_fraction = 0;
  double vbar = std::numeric_limits<double>::quiet_NaN();         // LocalVolume runs
  double max_rho_bar = std::numeric_limits<double>::quiet_NaN();  // LocalVolume runs
  double constraint = 0;
  double max_change = 0;
  double grayscale = 0;
  double wall_ms = 0;  // not exported (reruns must be byte-identical)
};

struct OptHistory {
  std::vector<IterationRecord> records;
};

struct RunResult {
  DensityField field;
  OptHistory history;
  bool converged = false;
  double solid_volume = 0.0;
  Eigen::VectorXd final_compliance_gradient;
  Eigen::VectorXd final_constraint_gradient;
};

using CheckpointFn = std::function<void(int iter, const DensityField&)>;

inline RunResult run_optimization(const OptProblem& problem,
                                  const CheckpointFn& checkpoint = {}) {
  problem.material.validate();
  problem.projection.validate();
  problem.mma.validate();
  if (problem.kind == ProblemKind::GlobalVolume &&
      !(problem.volume_fraction > 0.0 && problem.volume_fraction < 1.0))
    throw std::invalid_argument("run: volume_fraction must be in (0,1)");
  if (problem.kind == ProblemKind::LocalVolume) problem.local.validate();

  AnalysisModel model(problem.model.analysis, problem.model.cad.thickness,
                      problem.material, problem.gauss_extra, problem.gauss_zeta,
                      problem.threads);
  model.fix_boundary(problem.bcs);
  model.set_loads(problem.loads);

  const Eigen::VectorXd volumes = model.solid_volumes();
  const double V_s = volumes.sum();
  const double V_star = problem.volume_fraction * V_s;
  const DesignMap map = DesignMap::build(problem.model.design, model.element_centers());

  Neighborhoods nb;
  if (problem.kind == ProblemKind::LocalVolume)
    nb = Neighborhoods::build(model.element_centroids(), model.element_areas(), volumes,
                              problem.local.radius);

  RunResult result;
  result.solid_volume = V_s;
  DensityField& field = result.field;
  field.basis = problem.model.design;
  field.kappa = problem.projection.kappa;
  field.tau = problem.projection.tau_initial;
  const double init = (problem.kind == ProblemKind::GlobalVolume)
                          ? problem.volume_fraction
                          : problem.local.alpha;
  field.coefficients = Eigen::VectorXd::Constant(map.num_coefficients, init);

  MmaState mma_state;
  int quiet_streak = 0;
  const auto t_start = std::chrono::steady_clock::now();

  for (int iter = 1; iter <= problem.termination.max_iterations; ++iter) {
    field.tau = continuation_tau(iter, problem.projection);

    const Eigen::VectorXd rho_elem = element_densities(field, map);
    const Eigen::VectorXd U = model.solve(rho_elem);
    const double C = model.compliance(U);
    const double V = total_volume(rho_elem, volumes);

    const Eigen::VectorXd dC = compliance_gradient(model, U, field, map);

    double g = 0.0;
    Eigen::VectorXd dg;
    IterationRecord rec;
    if (problem.kind == ProblemKind::GlobalVolume) {
      const Eigen::VectorXd dV = volume_gradient(volumes, field, map);
      std::tie(g, dg) = constraint_wrap(V, V_star, dV);
    } else {
      const Eigen::VectorXd rho_bar = local_average(rho_elem, nb, volumes);
      const double vbar = aggregate_pmean(rho_bar, problem.local.gamma);
      const Eigen::VectorXd dVbar =
          local_volume_gradient(volumes, nb, field, map, problem.local.gamma);
      std::tie(g, dg) = constraint_wrap(vbar, problem.local.alpha, dVbar);
      rec.vbar = vbar;
      rec.max_rho_bar = rho_bar.maxCoeff();
    }

    const Eigen::VectorXd x_new =
        mma_update(field.coefficients, C, dC, g, dg, mma_state, problem.mma);
    const double max_change = (x_new - field.coefficients).cwiseAbs().maxCoeff();

    rec.iter = iter;
    rec.tau = field.tau;
    rec.compliance = C;
    rec.volume = V;
    rec.volume_fraction = V / V_s;
    rec.constraint = g;
    rec.max_change = max_change;
    rec.grayscale = grayscale_fraction(rho_elem);
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t_start)
                      .count();
    result.history.records.push_back(rec);

    field.coefficients = x_new;
    result.final_compliance_gradient = dC;
    result.final_constraint_gradient = dg;

    if (checkpoint) checkpoint(iter, field);

    // The stability check gates on the final continuation stage: stopping at
    // an intermediate tau would freeze a blurred design that later sharpening
    // still moves.
    const bool at_final_tau = field.tau >= problem.projection.tau_max;
    quiet_streak = (at_final_tau && max_change < problem.termination.change_tol)
                       ? quiet_streak + 1
                       : 0;
    if (quiet_streak >= problem.termination.consecutive) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace igatopt

#endif  // IGATOPT_OPT_DRIVER_HPP
