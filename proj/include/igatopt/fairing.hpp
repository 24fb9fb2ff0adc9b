// Post-processing of an optimized density field into explicit boundary
// curves: grid sampling, marching-squares extraction of the iso-0.5 set,
// centripetal parameterization, and least-squares cubic B-spline fitting with
// a discretized bending-energy fairing term.
#ifndef IGATOPT_FAIRING_HPP
#define IGATOPT_FAIRING_HPP

#include "igatopt/density_field.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace igatopt {

struct DensityGrid {
  int res_s = 0, res_t = 0;     // cells per direction
  std::vector<double> values;   // (res_s+1) x (res_t+1) nodes, s index fastest

  double at(int i, int j) const { return values[j * (res_s + 1) + i]; }
  double& at(int i, int j) { return values[j * (res_s + 1) + i]; }
};

// Projected density at the nodes of a uniform parametric lattice.
inline DensityGrid sample_grid(const DensityField& field, int res_s, int res_t) {
  if (res_s < 2 || res_t < 2)
    throw std::invalid_argument("sample_grid: resolution must be >= 2 per direction");
  DensityGrid g;
  g.res_s = res_s;
  g.res_t = res_t;
  g.values.resize((res_s + 1) * (res_t + 1));
  for (int j = 0; j <= res_t; ++j)
    for (int i = 0; i <= res_s; ++i)
      g.at(i, j) = field.eval_projected(static_cast<double>(i) / res_s,
                                        static_cast<double>(j) / res_t);
  return g;
}

struct Contour {
  std::vector<Vec2> points;  // ordered; closed contours do not repeat the start
  bool closed = false;
};

namespace detail {

// global edge keys of the node lattice
inline std::int64_t h_edge(int i, int j, int res_s) {
  return static_cast<std::int64_t>(j) * res_s + i;
}
inline std::int64_t v_edge(int i, int j, int res_s, int res_t) {
  return static_cast<std::int64_t>(res_s) * (res_t + 1) +
         static_cast<std::int64_t>(j) * (res_s + 1) + i;
}

}  // namespace detail

// Iso-contour extraction by the 16-case cell lookup with linear edge
// interpolation. Node values equal to iso are nudged up; the two saddle
// cases are disambiguated by the cell-center average. Returns ordered point
// chains: closed loops or open paths ending on the domain boundary.
inline std::vector<Contour> marching_squares(const DensityGrid& grid, double iso = 0.5) {
  const int ns = grid.res_s, nt = grid.res_t;
  std::vector<double> v = grid.values;
  for (double& x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("marching_squares: non-finite value");
    if (x == iso) x += 1e-9;
  }
  auto at = [&](int i, int j) { return v[j * (ns + 1) + i]; };

  // crossing point on an edge, from the lexicographically first endpoint
  std::unordered_map<std::int64_t, Vec2> crossing;
  auto cross_h = [&](int i, int j) {
    const std::int64_t id = detail::h_edge(i, j, ns);
    auto it = crossing.find(id);
    if (it == crossing.end()) {
      const double a = at(i, j), b = at(i + 1, j);
      const double t = (iso - a) / (b - a);
      it = crossing.emplace(id, Vec2((i + t) / ns, static_cast<double>(j) / nt)).first;
    }
    return id;
  };
  auto cross_v = [&](int i, int j) {
    const std::int64_t id = detail::v_edge(i, j, ns, nt);
    auto it = crossing.find(id);
    if (it == crossing.end()) {
      const double a = at(i, j), b = at(i, j + 1);
      const double t = (iso - a) / (b - a);
      it = crossing.emplace(id, Vec2(static_cast<double>(i) / ns, (j + t) / nt)).first;
    }
    return id;
  };

  // per-cell segments as pairs of global edge ids
  std::vector<std::pair<std::int64_t, std::int64_t>> segments;
  for (int j = 0; j < nt; ++j)
    for (int i = 0; i < ns; ++i) {
      const bool b0 = at(i, j) > iso, b1 = at(i + 1, j) > iso;
      const bool b2 = at(i + 1, j + 1) > iso, b3 = at(i, j + 1) > iso;
      const int c = int(b0) | int(b1) << 1 | int(b2) << 2 | int(b3) << 3;
      if (c == 0 || c == 15) continue;
      const std::int64_t e0 = (b0 != b1) ? cross_h(i, j) : -1;
      const std::int64_t e1 = (b1 != b2) ? cross_v(i + 1, j) : -1;
      const std::int64_t e2 = (b3 != b2) ? cross_h(i, j + 1) : -1;
      const std::int64_t e3 = (b0 != b3) ? cross_v(i, j) : -1;
      switch (c) {
        case 1: segments.emplace_back(e3, e0); break;
        case 2: segments.emplace_back(e0, e1); break;
        case 3: segments.emplace_back(e3, e1); break;
        case 4: segments.emplace_back(e1, e2); break;
        case 6: segments.emplace_back(e0, e2); break;
        case 7: segments.emplace_back(e3, e2); break;
        case 8: segments.emplace_back(e2, e3); break;
        case 9: segments.emplace_back(e0, e2); break;
        case 11: segments.emplace_back(e1, e2); break;
        case 12: segments.emplace_back(e3, e1); break;
        case 13: segments.emplace_back(e0, e1); break;
        case 14: segments.emplace_back(e0, e3); break;
        case 5: {  // saddle: corners c0 and c2 inside
          const double center =
              0.25 * (at(i, j) + at(i + 1, j) + at(i + 1, j + 1) + at(i, j + 1));
          if (center > iso) {
            segments.emplace_back(e0, e1);
            segments.emplace_back(e2, e3);
          } else {
            segments.emplace_back(e3, e0);
            segments.emplace_back(e1, e2);
          }
          break;
        }
        case 10: {  // saddle: corners c1 and c3 inside
          const double center =
              0.25 * (at(i, j) + at(i + 1, j) + at(i + 1, j + 1) + at(i, j + 1));
          if (center > iso) {
            segments.emplace_back(e3, e0);
            segments.emplace_back(e1, e2);
          } else {
            segments.emplace_back(e0, e1);
            segments.emplace_back(e2, e3);
          }
          break;
        }
        default: break;
      }
    }

  // chain segments that share cut edges
  std::unordered_map<std::int64_t, std::vector<int>> incident;
  for (int s = 0; s < static_cast<int>(segments.size()); ++s) {
    incident[segments[s].first].push_back(s);
    incident[segments[s].second].push_back(s);
  }

  std::vector<char> used(segments.size(), 0);
  std::vector<Contour> out;
  auto walk = [&](int start_seg, std::int64_t start_edge) {
    std::vector<std::int64_t> chain{start_edge};
    int seg = start_seg;
    std::int64_t edge = start_edge;
    while (true) {
      used[seg] = 1;
      edge = (segments[seg].first == edge) ? segments[seg].second : segments[seg].first;
      chain.push_back(edge);
      int next = -1;
      for (int cand : incident[edge])
        if (!used[cand]) {
          next = cand;
          break;
        }
      if (next < 0) break;
      seg = next;
    }
    return chain;
  };

  // open paths first: their end edges have exactly one incident segment
  for (int s = 0; s < static_cast<int>(segments.size()); ++s) {
    if (used[s]) continue;
    std::int64_t start = -1;
    if (incident[segments[s].first].size() == 1)
      start = segments[s].first;
    else if (incident[segments[s].second].size() == 1)
      start = segments[s].second;
    if (start < 0) continue;
    const auto chain = walk(s, start);
    Contour c;
    c.closed = false;
    for (std::int64_t e : chain) c.points.push_back(crossing.at(e));
    out.push_back(std::move(c));
  }
  // remaining segments belong to closed loops
  for (int s = 0; s < static_cast<int>(segments.size()); ++s) {
    if (used[s]) continue;
    auto chain = walk(s, segments[s].first);
    Contour c;
    c.closed = true;
    chain.pop_back();  // the walk returns to the start edge
    for (std::int64_t e : chain) c.points.push_back(crossing.at(e));
    out.push_back(std::move(c));
  }
  return out;
}

// Parameters with increments proportional to the square root of the chord
// lengths; closed inputs include the wrap-around chord.
inline std::vector<double> centripetal_params(const std::vector<Vec2>& pts, bool closed) {
  const int c = static_cast<int>(pts.size()) - 1;
  if (c < 1) throw std::invalid_argument("centripetal_params: need at least 2 points");
  std::vector<double> inc;
  inc.reserve(c + 1);
  for (int l = 0; l < c; ++l) {
    const double d = (pts[l + 1] - pts[l]).norm();
    if (d <= 0.0)
      throw std::invalid_argument("centripetal_params: repeated consecutive points");
    inc.push_back(std::sqrt(d));
  }
  if (closed) {
    const double d = (pts[0] - pts[c]).norm();
    if (d <= 0.0)
      throw std::invalid_argument("centripetal_params: repeated wrap-around point");
    inc.push_back(std::sqrt(d));
  }
  double total = 0.0;
  for (double x : inc) total += x;
  std::vector<double> eta(c + 1);
  eta[0] = 0.0;
  for (int l = 1; l <= c; ++l) eta[l] = eta[l - 1] + inc[l - 1] / total;
  if (!closed) eta[c] = 1.0;  // exact endpoint
  return eta;
}

// Fitted cubic curve in the parametric plane. Closed curves use an unclamped
// uniform knot vector with the last three control points wrapping the first
// three.
struct FittedCurve {
  KnotVector knots;
  std::vector<Vec2> control_points;
  bool closed = false;

  Vec2 point(double xi) const {
    const int p = knots.degree();
    const int span = knots.find_span(xi);
    double N[8];
    knots.basis_funs(span, xi, N);
    Vec2 x = Vec2::Zero();
    for (int a = 0; a <= p; ++a) x += N[a] * control_points[span - p + a];
    return x;
  }

  Vec2 second_derivative(double xi) const {
    const int p = knots.degree();
    const int span = knots.find_span(xi);
    double d[3 * 8];
    knots.basis_derivs(span, xi, 2, d);
    Vec2 x = Vec2::Zero();
    for (int a = 0; a <= p; ++a) x += d[2 * (p + 1) + a] * control_points[span - p + a];
    return x;
  }
};

namespace detail {

inline KnotVector open_cubic_knots(int b) {
  // b+1 control points, clamped uniform on [0,1]
  std::vector<double> k;
  for (int i = 0; i < 4; ++i) k.push_back(0.0);
  for (int i = 1; i <= b - 3; ++i) k.push_back(static_cast<double>(i) / (b - 2));
  for (int i = 0; i < 4; ++i) k.push_back(1.0);
  return KnotVector(3, std::move(k));
}

inline KnotVector periodic_cubic_knots(int b) {
  // b+5 uniform knots with domain [0,1] = [xi_3, xi_{b+1}]
  std::vector<double> k(b + 5);
  for (int i = 0; i < b + 5; ++i) k[i] = static_cast<double>(i - 3) / (b - 2);
  return KnotVector(3, std::move(k));
}

}  // namespace detail

// Least-squares fit of the parameterized points with the fairing term
// lambda * int |Z''|^2, the integral discretized by two-point Gauss
// quadrature per knot span. Solves the normal equations directly.
inline FittedCurve fit_fair_bspline(const std::vector<Vec2>& pts,
                                    const std::vector<double>& params, int b,
                                    double lambda, bool closed) {
  const int c = static_cast<int>(pts.size()) - 1;
  if (params.size() != pts.size())
    throw std::invalid_argument("fit_fair_bspline: point/parameter count mismatch");
  if (lambda < 0.0) throw std::invalid_argument("fit_fair_bspline: lambda must be >= 0");
  if (closed && b < 6)
    throw std::invalid_argument("fit_fair_bspline: closed fit needs b >= 6");
  if (!closed && b < 3)
    throw std::invalid_argument("fit_fair_bspline: open fit needs b >= 3");
  if (!closed && b > c)
    throw std::invalid_argument("fit_fair_bspline: more control points than data");

  FittedCurve curve;
  curve.closed = closed;
  curve.knots = closed ? detail::periodic_cubic_knots(b) : detail::open_cubic_knots(b);
  const KnotVector& kv = curve.knots;
  const int ncp = b + 1;

  // data term
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(c + 1, ncp);
  for (int l = 0; l <= c; ++l) {
    const int span = kv.find_span(params[l]);
    double N[4];
    kv.basis_funs(span, params[l], N);
    for (int a = 0; a <= 3; ++a) A(l, span - 3 + a) = N[a];
  }

  // Fairing term: per span, the squared tangent change, with the inner
  // integral of Z'' evaluated by two-point Gauss (exact for cubics):
  //   sum_k | (width_k/2) (Z''(xi_k1) + Z''(xi_k2)) |^2
  Eigen::MatrixXd M2 = Eigen::MatrixXd::Zero(ncp, ncp);
  const auto bp = kv.breakpoints();
  const double gauss_offset = 0.5 / std::sqrt(3.0);
  for (size_t sp = 0; sp + 1 < bp.size(); ++sp) {
    const double width = bp[sp + 1] - bp[sp];
    const double mid = 0.5 * (bp[sp] + bp[sp + 1]);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(ncp);
    for (int g = 0; g < 2; ++g) {
      const double xi = mid + (g == 0 ? -1.0 : 1.0) * gauss_offset * width;
      const int span = kv.find_span(xi);
      double d[3 * 4];
      kv.basis_derivs(span, xi, 2, d);
      for (int a = 0; a <= 3; ++a) row[span - 3 + a] += 0.5 * width * d[2 * 4 + a];
    }
    M2.noalias() += row * row.transpose();
  }

  Eigen::MatrixXd M = A.transpose() * A + lambda * M2;
  Eigen::MatrixXd rhs(ncp, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd q(c + 1);
    for (int l = 0; l <= c; ++l) q[l] = pts[l][k];
    rhs.col(k) = A.transpose() * q;
  }

  auto solve_spd = [](const Eigen::MatrixXd& lhs, const Eigen::MatrixXd& rr) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
    const Eigen::VectorXd d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    const double dmin = d.cwiseAbs().minCoeff();
    const Eigen::MatrixXd s = ldlt.solve(rr);
    if (ldlt.info() != Eigen::Success || dmin <= 0.0 || dmax / dmin > 1e13 ||
        (lhs * s - rr).norm() > 1e-8 * std::max(1.0, rr.norm()))
      throw std::runtime_error(
          "fit_fair_bspline: rank-deficient normal equations; reduce the number of "
          "control points");
    return s;
  };

  Eigen::MatrixXd sol;
  if (!closed) {
    sol = solve_spd(M, rhs);
  } else {
    const int nfree = b - 2;
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(ncp, nfree);
    for (int k = 0; k < ncp; ++k) W(k, k % nfree) = 1.0;
    sol = W * solve_spd(W.transpose() * M * W, W.transpose() * rhs);
  }

  curve.control_points.resize(ncp);
  for (int k = 0; k < ncp; ++k) curve.control_points[k] = Vec2(sol(k, 0), sol(k, 1));
  return curve;
}

// The discretized bending energy the fit minimizes: squared tangent change
// per span, inner integral by two-point Gauss.
inline double bending_energy(const FittedCurve& curve) {
  const auto bp = curve.knots.breakpoints();
  const double gauss_offset = 0.5 / std::sqrt(3.0);
  double e = 0.0;
  for (size_t sp = 0; sp + 1 < bp.size(); ++sp) {
    const double width = bp[sp + 1] - bp[sp];
    const double mid = 0.5 * (bp[sp] + bp[sp + 1]);
    const Vec2 turn =
        0.5 * width *
        (curve.second_derivative(mid - gauss_offset * width) +
         curve.second_derivative(mid + gauss_offset * width));
    e += turn.squaredNorm();
  }
  return e;
}

struct ContourCurve {
  std::vector<Vec2> points;
  std::vector<double> params;
  bool closed = false;
  FittedCurve curve;
  double rms_error = 0.0;
};

struct FairingConfig {
  int grid = 200;
  double lambda = 0.01;
  int control_points = 0;  // 0: automatic, max(8, c/4) clamped to the data count
  int min_loop_points = 8;
  double iso = 0.5;
};

// Crossing-number point-in-polygon test for a closed contour.
inline bool point_in_loop(const std::vector<Vec2>& loop, const Vec2& p) {
  bool inside = false;
  const size_t n = loop.size();
  for (size_t a = 0, b = n - 1; a < n; b = a++) {
    const Vec2& pa = loop[a];
    const Vec2& pb = loop[b];
    if ((pa.y() > p.y()) != (pb.y() > p.y())) {
      const double x = pa.x() + (p.y() - pa.y()) / (pb.y() - pa.y()) * (pb.x() - pa.x());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

// The complete boundary-fairing pass: sample, extract, parameterize, fit.
inline std::vector<ContourCurve> fair_boundaries(const DensityField& field,
                                                 const FairingConfig& cfg) {
  const DensityGrid grid = sample_grid(field, cfg.grid, cfg.grid);
  const std::vector<Contour> raw = marching_squares(grid, cfg.iso);

  std::vector<ContourCurve> out;
  for (const Contour& contour : raw) {
    // drop numerically coincident neighbors
    std::vector<Vec2> pts;
    for (const Vec2& p : contour.points)
      if (pts.empty() || (p - pts.back()).norm() > 1e-10) pts.push_back(p);
    if (contour.closed && pts.size() > 1 && (pts.front() - pts.back()).norm() <= 1e-10)
      pts.pop_back();
    if (static_cast<int>(pts.size()) < cfg.min_loop_points) continue;

    ContourCurve cc;
    cc.closed = contour.closed;
    cc.points = std::move(pts);
    cc.params = centripetal_params(cc.points, cc.closed);

    const int c = static_cast<int>(cc.points.size()) - 1;
    int b = cfg.control_points > 0
                ? cfg.control_points
                : std::max(8, static_cast<int>(std::lround(c / 4.0)));
    b = std::min(b, cc.closed ? c + 3 : c);
    if (cc.closed) b = std::max(b, 6);
    cc.curve = fit_fair_bspline(cc.points, cc.params, b, cfg.lambda, cc.closed);

    double sum = 0.0;
    for (size_t l = 0; l < cc.points.size(); ++l)
      sum += (cc.curve.point(cc.params[l]) - cc.points[l]).squaredNorm();
    cc.rms_error = std::sqrt(sum / cc.points.size());
    out.push_back(std::move(cc));
  }
  return out;
}

// Fitted curve mapped to the physical mid-surface as a sampled polyline.
inline std::vector<Vec3> curve_to_surface(const FittedCurve& curve,
                                          const NurbsSurface& surf, int samples = 200) {
  std::vector<Vec3> out;
  out.reserve(samples + 1);
  for (int k = 0; k <= samples; ++k) {
    Vec2 q = curve.point(static_cast<double>(k) / samples);
    q[0] = std::clamp(q[0], 0.0, 1.0);
    q[1] = std::clamp(q[1], 0.0, 1.0);
    out.push_back(surf.point(q[0], q[1]));
  }
  return out;
}

}  // namespace igatopt

#endif  // IGATOPT_FAIRING_HPP
