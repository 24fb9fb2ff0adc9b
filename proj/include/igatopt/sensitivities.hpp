// Analytic gradients of compliance, global volume, and the aggregated local
// volume with respect to the density design coefficients, via the adjoint
// method, plus the central-difference validation harness.
#ifndef IGATOPT_SENSITIVITIES_HPP
#define IGATOPT_SENSITIVITIES_HPP

#include "igatopt/density_field.hpp"
#include "igatopt/rm_analysis.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace igatopt {

// dC/drho_ij = -sum_e U_e^T dK_e/drho~ U_e * H'(rho_e) * R_ij(center_e),
// with dK_e/drho~ = penal * rho~^(penal-1) * (1 - E_min/E0) * K_e^0.
inline Eigen::VectorXd compliance_gradient(const AnalysisModel& model,
                                           const Eigen::VectorXd& U,
                                           const DensityField& field,
                                           const DesignMap& map) {
  const MaterialParams& mat = model.material();
  const Eigen::VectorXd rho_c = center_densities(field, map);
  const Eigen::VectorXd energies = model.element_energies_solid(U);
  const double dscale = 1.0 - mat.E_min / mat.E0;

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(map.num_coefficients);
  for (size_t e = 0; e < map.points.size(); ++e) {
    const Eigen::Index ei = static_cast<Eigen::Index>(e);
    const double rho_proj = heaviside(rho_c[ei], field.tau, field.kappa);
    const double dK = mat.penal * std::pow(rho_proj, mat.penal - 1.0) * dscale;
    const double factor =
        -energies[ei] * dK * heaviside_deriv(rho_c[ei], field.tau, field.kappa);
    for (const DesignMap::Entry& en : map.points[e])
      grad[en.coefficient] += factor * en.value;
  }
  return grad;
}

// dV/drho_ij = sum_e V_e^0 * H'(rho_e) * R_ij(center_e)
inline Eigen::VectorXd volume_gradient(const Eigen::VectorXd& solid_volumes,
                                       const DensityField& field, const DesignMap& map) {
  const Eigen::VectorXd rho_c = center_densities(field, map);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(map.num_coefficients);
  for (size_t e = 0; e < map.points.size(); ++e) {
    const Eigen::Index ei = static_cast<Eigen::Index>(e);
    const double factor =
        solid_volumes[ei] * heaviside_deriv(rho_c[ei], field.tau, field.kappa);
    for (const DesignMap::Entry& en : map.points[e])
      grad[en.coefficient] += factor * en.value;
  }
  return grad;
}

// Chain rule through the p-mean, the neighborhood averages, the Heaviside
// projection and the design basis. The neighborhood relation is symmetric,
// so the double sum collapses into one pass over elements.
inline Eigen::VectorXd local_volume_gradient(const Eigen::VectorXd& solid_volumes,
                                             const Neighborhoods& nb,
                                             const DensityField& field,
                                             const DesignMap& map, double gamma) {
  const int n = static_cast<int>(nb.lists.size());
  const Eigen::VectorXd rho_c = center_densities(field, map);
  Eigen::VectorXd rho_proj(n);
  for (int e = 0; e < n; ++e)
    rho_proj[e] = heaviside(rho_c[e], field.tau, field.kappa);
  const Eigen::VectorXd rho_bar = local_average(rho_proj, nb, solid_volumes);

  double power_sum = 0.0;
  for (int e = 0; e < n; ++e) power_sum += std::pow(rho_bar[e], gamma);
  const double P = power_sum / n;

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(map.num_coefficients);
  if (P <= 0.0) return grad;  // all densities zero: gradient defined as zero
  const double outer = std::pow(P, 1.0 / gamma - 1.0) / n;

  Eigen::VectorXd omega(n);
  for (int e = 0; e < n; ++e)
    omega[e] = outer * std::pow(rho_bar[e], gamma - 1.0) / nb.weight_sums[e];
  // chi_f = sum over neighborhoods containing f
  Eigen::VectorXd chi = Eigen::VectorXd::Zero(n);
  for (int f = 0; f < n; ++f)
    for (int e : nb.lists[f]) chi[f] += omega[e];

  for (int f = 0; f < n; ++f) {
    const double factor =
        solid_volumes[f] * heaviside_deriv(rho_c[f], field.tau, field.kappa) * chi[f];
    for (const DesignMap::Entry& en : map.points[f])
      grad[en.coefficient] += factor * en.value;
  }
  return grad;
}

struct FdCheckResult {
  std::vector<int> indices;
  std::vector<double> fd;
  std::vector<double> analytic;
  std::vector<double> rel_error;
  double max_rel_error = 0.0;
};

// Central-difference check of an analytic gradient at selected coefficients.
// The objective closure must re-evaluate the full pipeline.
inline FdCheckResult fd_gradient_check(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& x, const Eigen::VectorXd& analytic_grad,
    const std::vector<int>& indices, double step) {
  FdCheckResult r;
  r.indices = indices;
  const double floor = 1e-6 * analytic_grad.cwiseAbs().maxCoeff() + 1e-300;
  for (int idx : indices) {
    Eigen::VectorXd xp = x, xm = x;
    xp[idx] += step;
    xm[idx] -= step;
    const double fd = (objective(xp) - objective(xm)) / (2.0 * step);
    const double a = analytic_grad[idx];
    const double err = std::abs(fd - a) / std::max({std::abs(fd), std::abs(a), floor});
    r.fd.push_back(fd);
    r.analytic.push_back(a);
    r.rel_error.push_back(err);
    r.max_rel_error = std::max(r.max_rel_error, err);
  }
  return r;
}

}  // namespace igatopt

#endif  // IGATOPT_SENSITIVITIES_HPP
