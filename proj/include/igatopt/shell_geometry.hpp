// Shell solid map built from a NURBS mid-surface: local orthonormal frames,
// thickness-direction Jacobians, the CAD/design/analysis model hierarchy, and
// the built-in geometry presets.
#ifndef IGATOPT_SHELL_GEOMETRY_HPP
#define IGATOPT_SHELL_GEOMETRY_HPP

#include "igatopt/splines.hpp"

#include <cmath>
#include <stdexcept>

namespace igatopt {

struct ShellModel {
  NurbsSurface mid_surface;
  double thickness = 0.0;

  void validate() const {
    mid_surface.validate();
    if (!(thickness > 0.0))
      throw std::invalid_argument("ShellModel: thickness must be positive");
  }
};

// Right-handed orthonormal frame at a surface point; v3 is the unit normal.
struct LocalFrame {
  Vec3 v1, v2, v3;
};

inline LocalFrame frame_from_tangents(const Vec3& Ss, const Vec3& St) {
  const Vec3 n = Ss.cross(St);
  const double nn = n.norm();
  if (nn < 1e-12 * Ss.norm() * St.norm())
    throw std::runtime_error("local_frame: degenerate surface tangents");
  LocalFrame f;
  f.v3 = n / nn;
  // first global axis not nearly parallel to the normal
  Vec3 axis = Vec3::UnitX();
  if (std::abs(f.v3.x()) >= 1.0 - 1e-6) {
    axis = (std::abs(f.v3.y()) < 1.0 - 1e-6) ? Vec3::UnitY() : Vec3::UnitZ();
  }
  f.v1 = f.v3.cross(axis).normalized();
  f.v2 = f.v3.cross(f.v1);
  return f;
}

inline LocalFrame local_frame(const NurbsSurface& surf, double s, double t) {
  Vec3 S, Ss, St;
  surf.derivs(s, t, S, Ss, St);
  return frame_from_tangents(Ss, St);
}

// Frame plus parametric derivatives of the director and of mu = (-v2, v1),
// obtained by central finite differences on the parametric domain. One-sided
// differences are used at the domain edges.
struct FrameDerivs {
  LocalFrame frame;
  Vec3 v3_s, v3_t;
  Eigen::Matrix<double, 3, 2> mu, mu_s, mu_t;
};

inline Eigen::Matrix<double, 3, 2> mu_of(const LocalFrame& f) {
  Eigen::Matrix<double, 3, 2> m;
  m.col(0) = -f.v2;
  m.col(1) = f.v1;
  return m;
}

inline FrameDerivs frame_with_derivs(const NurbsSurface& surf, double s, double t) {
  FrameDerivs fd;
  fd.frame = local_frame(surf, s, t);
  fd.mu = mu_of(fd.frame);

  auto fd_dir = [&](bool in_s) {
    const KnotVector& kv = in_s ? surf.kv_s : surf.kv_t;
    const double lo = kv.domain_min(), hi = kv.domain_max();
    const double h = 1e-6 * (hi - lo);
    const double u = in_s ? s : t;
    const double up = std::min(u + h, hi);
    const double um = std::max(u - h, lo);
    const LocalFrame fp = in_s ? local_frame(surf, up, t) : local_frame(surf, s, up);
    const LocalFrame fm = in_s ? local_frame(surf, um, t) : local_frame(surf, s, um);
    const double inv = 1.0 / (up - um);
    return std::make_pair(Vec3((fp.v3 - fm.v3) * inv),
                          Eigen::Matrix<double, 3, 2>((mu_of(fp) - mu_of(fm)) * inv));
  };
  std::tie(fd.v3_s, fd.mu_s) = fd_dir(true);
  std::tie(fd.v3_t, fd.mu_t) = fd_dir(false);
  return fd;
}

// X(s,t,zeta) = S + zeta * (h/2) * v3, zeta in [-1,1].
inline Vec3 shell_point(const ShellModel& model, double s, double t, double zeta) {
  if (zeta < -1.0 || zeta > 1.0)
    throw std::domain_error("shell_point: zeta outside [-1,1]");
  const Vec3 S = model.mid_surface.point(s, t);
  const LocalFrame f = local_frame(model.mid_surface, s, t);
  return S + zeta * 0.5 * model.thickness * f.v3;
}

// Columns are dX/ds, dX/dt, dX/dzeta.
inline Eigen::Matrix3d shell_jacobian(const ShellModel& model, double s, double t,
                                      double zeta) {
  Vec3 S, Ss, St;
  model.mid_surface.derivs(s, t, S, Ss, St);
  const FrameDerivs fd = frame_with_derivs(model.mid_surface, s, t);
  const double half_h = 0.5 * model.thickness;
  Eigen::Matrix3d J;
  J.col(0) = Ss + zeta * half_h * fd.v3_s;
  J.col(1) = St + zeta * half_h * fd.v3_t;
  J.col(2) = half_h * fd.frame.v3;
  const double scale = std::max({Ss.norm(), St.norm(), half_h});
  if (std::abs(J.determinant()) < 1e-14 * scale * scale * scale)
    throw std::runtime_error("shell_jacobian: singular Jacobian");
  return J;
}

// CAD mid-surface plus its design-level and analysis-level refinements.
struct MultiLevelModel {
  ShellModel cad;
  NurbsSurface design;
  NurbsSurface analysis;
};

inline MultiLevelModel build_multilevel(const ShellModel& cad, int design_spans_s,
                                        int design_spans_t, int analysis_spans_s,
                                        int analysis_spans_t) {
  cad.validate();
  const NurbsSurface& mid = cad.mid_surface;
  if (design_spans_s < mid.kv_s.span_count() || design_spans_t < mid.kv_t.span_count())
    throw std::invalid_argument("build_multilevel: design spans below CAD resolution");
  if (analysis_spans_s < design_spans_s || analysis_spans_t < design_spans_t)
    throw std::invalid_argument("build_multilevel: analysis spans below design spans");

  MultiLevelModel m;
  m.cad = cad;
  m.design = mid.refined(uniform_refinement_knots(mid.kv_s, design_spans_s),
                         uniform_refinement_knots(mid.kv_t, design_spans_t));
  m.analysis = mid.refined(uniform_refinement_knots(mid.kv_s, analysis_spans_s),
                           uniform_refinement_knots(mid.kv_t, analysis_spans_t));
  return m;
}

// ---------------------------------------------------------------------------
// Presets. Polynomial patches are built exactly at the requested degree by
// Bernstein collocation; the cylinder needs the rational quadratic arc and is
// degree 2 only.

namespace detail {

// Bernstein basis values of degree p at u.
inline void bernstein(int p, double u, std::vector<double>& B) {
  B.assign(p + 1, 0.0);
  B[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    double saved = 0.0;
    for (int k = 0; k < j; ++k) {
      const double temp = B[k];
      B[k] = saved + (1.0 - u) * temp;
      saved = u * temp;
    }
    B[j] = saved;
  }
}

// Exact Bezier control net of a polynomial patch f: [0,1]^2 -> R^3 of
// bidegree <= p in each direction, by collocation at uniform nodes.
template <typename F>
NurbsSurface bezier_patch_from_polynomial(int degree, F&& f) {
  if (degree < 1) throw std::invalid_argument("preset degree must be >= 1");
  const int n = degree + 1;
  Eigen::MatrixXd C(n, n);
  std::vector<double> B;
  for (int r = 0; r < n; ++r) {
    const double u = static_cast<double>(r) / degree;
    bernstein(degree, u, B);
    for (int c = 0; c < n; ++c) C(r, c) = B[c];
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(C);

  // samples on the uniform grid, one coordinate at a time
  Eigen::MatrixXd sx(n, n), sy(n, n), sz(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const Vec3 v = f(static_cast<double>(i) / degree, static_cast<double>(j) / degree);
      sx(i, j) = v.x();
      sy(i, j) = v.y();
      sz(i, j) = v.z();
    }
  // solve per direction: samples = C * coef  (s first, then t)
  auto solve2d = [&](Eigen::MatrixXd m) {
    m = lu.solve(m);                    // s-direction
    m = lu.solve(m.transpose()).transpose();  // t-direction
    return m;
  };
  sx = solve2d(sx);
  sy = solve2d(sy);
  sz = solve2d(sz);

  NurbsSurface surf;
  surf.kv_s = uniform_clamped_knots(degree, 1);
  surf.kv_t = uniform_clamped_knots(degree, 1);
  surf.control_points.resize(n * n);
  surf.weights.assign(n * n, 1.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      surf.control_points[surf.cp_index(i, j)] = Vec3(sx(i, j), sy(i, j), sz(i, j));
  surf.validate();
  return surf;
}

}  // namespace detail

// Flat rectangular plate in the z=0 plane, centered at the origin.
inline NurbsSurface make_plate(double len_x, double len_y, int degree = 2) {
  return detail::bezier_patch_from_polynomial(degree, [&](double s, double t) {
    return Vec3(len_x * (s - 0.5), len_y * (t - 0.5), 0.0);
  });
}

// Hyperbolic paraboloid z = height * (sbar^2 - tbar^2) over a rectangular
// plan form, sbar/tbar in [-1,1].
inline NurbsSurface make_hypar(double plan_x, double plan_y, double height,
                               int degree = 2) {
  return detail::bezier_patch_from_polynomial(degree, [&](double s, double t) {
    const double sb = 2.0 * s - 1.0, tb = 2.0 * t - 1.0;
    return Vec3(0.5 * plan_x * sb, 0.5 * plan_y * tb, height * (sb * sb - tb * tb));
  });
}

// Ruled surface between two segments rotated by 90 degrees about the x-axis.
inline NurbsSurface make_twisted(double length, double width, int degree = 2) {
  return detail::bezier_patch_from_polynomial(degree, [&](double s, double t) {
    const double c = width * (t - 0.5);
    return Vec3(length * s, c * (1.0 - s), c * s);
  });
}

// Circular-arc cylinder segment, axis along y, exact rational representation.
// s runs along the axis, t along the arc.
inline NurbsSurface make_cylinder(double radius, double angle_deg, double length) {
  if (!(angle_deg > 0.0 && angle_deg < 180.0))
    throw std::invalid_argument("make_cylinder: arc angle must be in (0, 180) degrees");
  const double half = 0.5 * angle_deg * M_PI / 180.0;
  const double w_mid = std::cos(half);
  // quadratic rational arc from angle 0 to angle_deg in the xz-plane
  const double x0 = radius, z0 = 0.0;
  const double x2 = radius * std::cos(2.0 * half), z2 = radius * std::sin(2.0 * half);
  // middle control point at the tangent intersection
  const double xm = radius * std::cos(half) / w_mid, zm = radius * std::sin(half) / w_mid;

  NurbsSurface surf;
  surf.kv_s = uniform_clamped_knots(2, 1);
  surf.kv_t = uniform_clamped_knots(2, 1);
  surf.control_points.resize(9);
  surf.weights.resize(9);
  const double axis_y[3] = {-0.5 * length, 0.0, 0.5 * length};
  const double arc_x[3] = {x0, xm, x2};
  const double arc_z[3] = {z0, zm, z2};
  const double arc_w[3] = {1.0, w_mid, 1.0};
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) {
      surf.control_points[surf.cp_index(i, j)] = Vec3(arc_x[j], axis_y[i], arc_z[j]);
      surf.weights[surf.cp_index(i, j)] = arc_w[j];
    }
  surf.validate();
  return surf;
}

}  // namespace igatopt

#endif  // IGATOPT_SHELL_GEOMETRY_HPP
