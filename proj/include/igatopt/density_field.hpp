// NURBS-represented material density: evaluation on the design basis,
// Heaviside projection, element-center densities, volumes, and the local
// volume averaging / p-mean aggregation used for porous designs.
#ifndef IGATOPT_DENSITY_FIELD_HPP
#define IGATOPT_DENSITY_FIELD_HPP

#include "igatopt/splines.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace igatopt {

// Smooth tanh projection about kappa with sharpness tau.
inline double heaviside(double rho, double tau, double kappa) {
  if (!(tau > 0.0)) throw std::invalid_argument("heaviside: tau must be positive");
  return (std::tanh(0.5 * tau) + std::tanh(tau * (rho - kappa))) /
         (2.0 * std::tanh(0.5 * tau));
}

inline double heaviside_deriv(double rho, double tau, double kappa) {
  if (!(tau > 0.0)) throw std::invalid_argument("heaviside: tau must be positive");
  const double c = std::cosh(tau * (rho - kappa));
  return tau / (c * c * 2.0 * std::tanh(0.5 * tau));
}

// Scalar density function on a NURBS design basis, plus its projection
// parameters. Coefficients are stored by the basis control-point index.
struct DensityField {
  NurbsSurface basis;
  Eigen::VectorXd coefficients;
  double tau = 2.0;
  double kappa = 0.5;

  void validate() const {
    basis.validate();
    if (coefficients.size() != basis.num_cp_s() * basis.num_cp_t())
      throw std::invalid_argument("DensityField: coefficient grid size mismatch");
    if (!(tau > 0.0)) throw std::invalid_argument("DensityField: tau must be positive");
  }

  // rho(s,t) = sum R_ij rho_ij (unprojected)
  double eval(double s, double t) const {
    const SurfaceBasis b = basis.basis(s, t, 0);
    double v = 0.0;
    for (int jj = 0; jj <= b.q; ++jj)
      for (int ii = 0; ii <= b.p; ++ii)
        v += b.R[jj * (b.p + 1) + ii] *
             coefficients[basis.cp_index(b.span_s - b.p + ii, b.span_t - b.q + jj)];
    return v;
  }

  double eval_projected(double s, double t) const {
    return heaviside(eval(s, t), tau, kappa);
  }
};

// Nonzero design-basis values at a fixed set of evaluation points (element
// centers). Precomputed once since the geometry never changes during a run.
struct DesignMap {
  struct Entry {
    int coefficient;  // flat design control-point index
    double value;     // R_ij at the evaluation point
  };
  std::vector<std::vector<Entry>> points;
  int num_coefficients = 0;

  static DesignMap build(const NurbsSurface& design,
                         const std::vector<std::pair<double, double>>& centers) {
    DesignMap m;
    m.num_coefficients = design.num_cp_s() * design.num_cp_t();
    m.points.reserve(centers.size());
    for (const auto& [s, t] : centers) {
      const SurfaceBasis b = design.basis(s, t, 0);
      std::vector<Entry> entries;
      entries.reserve(b.count());
      for (int jj = 0; jj <= b.q; ++jj)
        for (int ii = 0; ii <= b.p; ++ii)
          entries.push_back({design.cp_index(b.span_s - b.p + ii, b.span_t - b.q + jj),
                             b.R[jj * (b.p + 1) + ii]});
      m.points.push_back(std::move(entries));
    }
    return m;
  }

  double eval(const Eigen::VectorXd& coefficients, int point) const {
    double v = 0.0;
    for (const Entry& e : points[point]) v += e.value * coefficients[e.coefficient];
    return v;
  }
};

// Unprojected densities rho(center_e) for every element center in the map.
inline Eigen::VectorXd center_densities(const DensityField& field, const DesignMap& map) {
  Eigen::VectorXd rho(map.points.size());
  for (size_t e = 0; e < map.points.size(); ++e)
    rho[e] = map.eval(field.coefficients, static_cast<int>(e));
  return rho;
}

// Projected element densities rho~_e = H(rho(center_e)).
inline Eigen::VectorXd element_densities(const DensityField& field, const DesignMap& map) {
  Eigen::VectorXd r = center_densities(field, map);
  for (Eigen::Index e = 0; e < r.size(); ++e) r[e] = heaviside(r[e], field.tau, field.kappa);
  return r;
}

// V = sum V_e^0 rho~_e
inline double total_volume(const Eigen::VectorXd& rho_elem,
                           const Eigen::VectorXd& solid_volumes) {
  if (rho_elem.size() != solid_volumes.size())
    throw std::invalid_argument("total_volume: size mismatch");
  return solid_volumes.dot(rho_elem);
}

struct LocalVolumeSpec {
  int radius = 8;        // neighborhood radius in multiples of delta
  double alpha = 0.5;    // local volume upper bound
  double gamma = 16.0;   // p-mean aggregation exponent

  void validate() const {
    if (radius < 1) throw std::invalid_argument("LocalVolumeSpec: radius must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("LocalVolumeSpec: alpha must be in (0,1)");
    if (!(gamma > 1.0)) throw std::invalid_argument("LocalVolumeSpec: gamma must be > 1");
  }
};

// Element neighborhoods N_e = { f : |x_e - x_f| <= radius * delta } over
// physical mid-surface centroids, with delta the mean element length
// (mean of sqrt of mid-surface element area).
struct Neighborhoods {
  std::vector<std::vector<int>> lists;
  Eigen::VectorXd weight_sums;  // sum of V_f over each neighborhood
  double delta = 0.0;

  static Neighborhoods build(const std::vector<Vec3>& centroids,
                             const Eigen::VectorXd& areas,
                             const Eigen::VectorXd& volumes, int radius) {
    const int n = static_cast<int>(centroids.size());
    Neighborhoods nb;
    nb.delta = 0.0;
    for (int e = 0; e < n; ++e) nb.delta += std::sqrt(areas[e]);
    nb.delta /= n;
    const double r = radius * nb.delta;
    const double r2 = r * r;
    nb.lists.resize(n);
    nb.weight_sums.resize(n);
    for (int e = 0; e < n; ++e) {
      double wsum = 0.0;
      for (int f = 0; f < n; ++f) {
        if ((centroids[e] - centroids[f]).squaredNorm() <= r2) {
          nb.lists[e].push_back(f);
          wsum += volumes[f];
        }
      }
      nb.weight_sums[e] = wsum;
    }
    return nb;
  }
};

// rho_bar_e = volume-weighted average of rho~ over the neighborhood of e.
inline Eigen::VectorXd local_average(const Eigen::VectorXd& rho_elem,
                                     const Neighborhoods& nb,
                                     const Eigen::VectorXd& volumes) {
  const int n = static_cast<int>(nb.lists.size());
  Eigen::VectorXd out(n);
  for (int e = 0; e < n; ++e) {
    double acc = 0.0;
    for (int f : nb.lists[e]) acc += rho_elem[f] * volumes[f];
    out[e] = acc / nb.weight_sums[e];
  }
  return out;
}

// V_bar = ((1/N) sum rho_bar_e^gamma)^(1/gamma)
inline double aggregate_pmean(const Eigen::VectorXd& rho_bar, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("aggregate_pmean: gamma must be positive");
  const int n = static_cast<int>(rho_bar.size());
  double acc = 0.0;
  for (int e = 0; e < n; ++e) acc += std::pow(rho_bar[e], gamma);
  return std::pow(acc / n, 1.0 / gamma);
}

// Knot-refine the density function: the scalar coefficients ride through the
// same homogeneous insertion as the geometry, so values are preserved exactly.
inline DensityField refine_density_field(const DensityField& field,
                                         const std::vector<double>& new_knots_s,
                                         const std::vector<double>& new_knots_t) {
  NurbsSurface carrier = field.basis;
  for (size_t a = 0; a < carrier.control_points.size(); ++a)
    carrier.control_points[a] = Vec3(field.coefficients[static_cast<Eigen::Index>(a)], 0, 0);
  carrier = carrier.refined(new_knots_s, new_knots_t);

  DensityField out;
  out.basis = field.basis.refined(new_knots_s, new_knots_t);
  out.tau = field.tau;
  out.kappa = field.kappa;
  out.coefficients.resize(carrier.control_points.size());
  for (size_t a = 0; a < carrier.control_points.size(); ++a)
    out.coefficients[static_cast<Eigen::Index>(a)] = carrier.control_points[a].x();
  return out;
}

}  // namespace igatopt

#endif  // IGATOPT_DENSITY_FIELD_HPP
