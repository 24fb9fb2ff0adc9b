// B-spline / NURBS evaluation kernel: basis functions and derivatives on the
// nonzero span, rational curve and tensor-product surface evaluation, and
// knot insertion based refinement.
#ifndef IGATOPT_SPLINES_HPP
#define IGATOPT_SPLINES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace igatopt {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

// Clamped knot vector together with its degree. Owns the span location and
// the Cox-de Boor evaluation of the degree+1 nonzero basis functions.
class KnotVector {
public:
  KnotVector() = default;

  KnotVector(int degree, std::vector<double> knots)
      : degree_(degree), knots_(std::move(knots)) {
    if (degree_ < 0) throw std::invalid_argument("KnotVector: negative degree");
    if (static_cast<int>(knots_.size()) < 2 * (degree_ + 1))
      throw std::invalid_argument("KnotVector: too few knots for degree " +
                                  std::to_string(degree_));
    if (!std::is_sorted(knots_.begin(), knots_.end()))
      throw std::invalid_argument("KnotVector: knots must be non-decreasing");
  }

  int degree() const { return degree_; }
  const std::vector<double>& knots() const { return knots_; }
  // Number of basis functions / control points supported by this vector.
  int num_basis() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
  double domain_min() const { return knots_[degree_]; }
  double domain_max() const { return knots_[num_basis()]; }

  bool is_clamped() const {
    const int p = degree_;
    const int n = num_basis();
    for (int i = 1; i <= p; ++i) {
      if (knots_[i] != knots_[0]) return false;
      if (knots_[n + i] != knots_[n]) return false;
    }
    return true;
  }

  // Knot span index i with knots[i] <= u < knots[i+1]; the right endpoint of
  // the domain maps to the last non-degenerate span.
  int find_span(double u) const {
    const int p = degree_;
    const int n = num_basis() - 1;
    if (u < domain_min() || u > domain_max())
      throw std::domain_error("find_span: parameter " + std::to_string(u) +
                              " outside [" + std::to_string(domain_min()) +
                              ", " + std::to_string(domain_max()) + "]");
    if (u >= knots_[n + 1]) return n;
    auto it = std::upper_bound(knots_.begin() + p, knots_.begin() + n + 1, u);
    return static_cast<int>(it - knots_.begin()) - 1;
  }

  // The degree+1 nonzero basis values N_{span-p},...,N_{span} at u.
  // N must hold degree+1 doubles.
  void basis_funs(int span, double u, double* N) const {
    const int p = degree_;
    if (span < p || span >= num_basis())
      throw std::invalid_argument("basis_funs: invalid span " + std::to_string(span));
    std::vector<double> left(p + 1), right(p + 1);
    N[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
      left[j] = u - knots_[span + 1 - j];
      right[j] = knots_[span + j] - u;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double temp = N[r] / (right[r + 1] + left[j - r]);
        N[r] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      N[j] = saved;
    }
  }

  // Derivatives of the nonzero basis functions through `order`; row k of the
  // (order+1) x (degree+1) row-major output holds the k-th derivatives.
  // Rows beyond the degree are zero.
  void basis_derivs(int span, double u, int order, double* ders) const {
    const int p = degree_;
    if (span < p || span >= num_basis())
      throw std::invalid_argument("basis_derivs: invalid span " + std::to_string(span));
    const int du = std::min(order, p);
    std::fill(ders, ders + (order + 1) * (p + 1), 0.0);

    std::vector<double> ndu((p + 1) * (p + 1));
    std::vector<double> left(p + 1), right(p + 1);
    auto NDU = [&](int i, int j) -> double& { return ndu[i * (p + 1) + j]; };
    NDU(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
      left[j] = u - knots_[span + 1 - j];
      right[j] = knots_[span + j] - u;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        NDU(j, r) = right[r + 1] + left[j - r];
        const double temp = NDU(r, j - 1) / NDU(j, r);
        NDU(r, j) = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      NDU(j, j) = saved;
    }
    for (int j = 0; j <= p; ++j) ders[j] = NDU(j, p);

    std::vector<double> a(2 * (p + 1));
    for (int r = 0; r <= p; ++r) {
      int s1 = 0, s2 = 1;
      a[0] = 1.0;
      for (int k = 1; k <= du; ++k) {
        double d = 0.0;
        const int rk = r - k, pk = p - k;
        if (r >= k) {
          a[s2 * (p + 1)] = a[s1 * (p + 1)] / NDU(pk + 1, rk);
          d = a[s2 * (p + 1)] * NDU(rk, pk);
        }
        const int j1 = (rk >= -1) ? 1 : -rk;
        const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
        for (int j = j1; j <= j2; ++j) {
          a[s2 * (p + 1) + j] =
              (a[s1 * (p + 1) + j] - a[s1 * (p + 1) + j - 1]) / NDU(pk + 1, rk + j);
          d += a[s2 * (p + 1) + j] * NDU(rk + j, pk);
        }
        if (r <= pk) {
          a[s2 * (p + 1) + k] = -a[s1 * (p + 1) + k - 1] / NDU(pk + 1, r);
          d += a[s2 * (p + 1) + k] * NDU(r, pk);
        }
        ders[k * (p + 1) + r] = d;
        std::swap(s1, s2);
      }
    }
    // multiply by the factorial-style factors p!/(p-k)!
    double fac = static_cast<double>(p);
    for (int k = 1; k <= du; ++k) {
      for (int j = 0; j <= p; ++j) ders[k * (p + 1) + j] *= fac;
      fac *= static_cast<double>(p - k);
    }
  }

  // Greville abscissae (basis-function parameter averages).
  std::vector<double> greville() const {
    std::vector<double> g(num_basis());
    for (int i = 0; i < num_basis(); ++i) {
      double sum = 0.0;
      for (int j = 1; j <= degree_; ++j) sum += knots_[i + j];
      g[i] = sum / degree_;
    }
    return g;
  }

  // Sorted distinct breakpoints spanning the domain (endpoints included).
  std::vector<double> breakpoints() const {
    std::vector<double> b;
    for (int i = degree_; i <= num_basis(); ++i) {
      if (b.empty() || knots_[i] > b.back()) b.push_back(knots_[i]);
    }
    return b;
  }

  int span_count() const { return static_cast<int>(breakpoints().size()) - 1; }

  int multiplicity(double u) const {
    int m = 0;
    for (double k : knots_)
      if (k == u) ++m;
    return m;
  }

private:
  int degree_ = 0;
  std::vector<double> knots_;
};

// Uniform clamped knot vector on [0,1] with `spans` equal knot intervals.
inline KnotVector uniform_clamped_knots(int degree, int spans) {
  if (spans < 1) throw std::invalid_argument("uniform_clamped_knots: spans < 1");
  std::vector<double> k;
  k.reserve(spans + 2 * degree + 1);
  for (int i = 0; i <= degree; ++i) k.push_back(0.0);
  for (int i = 1; i < spans; ++i) k.push_back(static_cast<double>(i) / spans);
  for (int i = 0; i <= degree; ++i) k.push_back(1.0);
  return KnotVector(degree, std::move(k));
}

struct NurbsCurve {
  KnotVector kv;
  std::vector<Vec3> control_points;
  std::vector<double> weights;

  void validate() const {
    const int n = kv.num_basis();
    if (static_cast<int>(control_points.size()) != n ||
        static_cast<int>(weights.size()) != n)
      throw std::invalid_argument("NurbsCurve: control point / weight count mismatch");
    for (double w : weights)
      if (!(w > 0.0)) throw std::invalid_argument("NurbsCurve: weights must be positive");
  }

  Vec3 point(double u) const {
    const int p = kv.degree();
    const int span = kv.find_span(u);
    std::vector<double> N(p + 1);
    kv.basis_funs(span, u, N.data());
    Vec3 num = Vec3::Zero();
    double den = 0.0;
    for (int a = 0; a <= p; ++a) {
      const int i = span - p + a;
      const double wN = weights[i] * N[a];
      num += wN * control_points[i];
      den += wN;
    }
    return num / den;
  }
};

// Nonzero bivariate rational basis values and parametric derivatives at a
// surface parameter. Local index a = jj*(p+1)+ii refers to control point
// (span_s - p + ii, span_t - q + jj).
struct SurfaceBasis {
  int span_s = 0, span_t = 0;
  int p = 0, q = 0;
  std::vector<double> R, Rs, Rt;        // order >= 0 / 1
  std::vector<double> Rss, Rst, Rtt;    // order == 2
  int count() const { return (p + 1) * (q + 1); }
};

struct NurbsSurface {
  KnotVector kv_s, kv_t;
  std::vector<Vec3> control_points;  // index = j * num_cp_s() + i
  std::vector<double> weights;

  int num_cp_s() const { return kv_s.num_basis(); }
  int num_cp_t() const { return kv_t.num_basis(); }
  int cp_index(int i, int j) const { return j * num_cp_s() + i; }

  void validate() const {
    const int n = num_cp_s() * num_cp_t();
    if (static_cast<int>(control_points.size()) != n ||
        static_cast<int>(weights.size()) != n)
      throw std::invalid_argument("NurbsSurface: control net size mismatch");
    for (double w : weights)
      if (!(w > 0.0)) throw std::invalid_argument("NurbsSurface: weights must be positive");
  }

  // Values (and derivatives up to `order` <= 2) of the nonzero rational
  // basis functions at (s,t), via the quotient rule.
  SurfaceBasis basis(double s, double t, int order) const {
    if (order < 0 || order > 2)
      throw std::invalid_argument("NurbsSurface::basis: order must be 0, 1 or 2");
    SurfaceBasis b;
    b.p = kv_s.degree();
    b.q = kv_t.degree();
    b.span_s = kv_s.find_span(s);
    b.span_t = kv_t.find_span(t);
    const int p = b.p, q = b.q, nl = (p + 1) * (q + 1);

    std::vector<double> ds((order + 1) * (p + 1)), dt((order + 1) * (q + 1));
    kv_s.basis_derivs(b.span_s, s, order, ds.data());
    kv_t.basis_derivs(b.span_t, t, order, dt.data());

    // weighted tensor-product numerators A and the weight sum W, with
    // matching parametric derivatives
    std::vector<double> A(nl), As, At, Ass, Ast, Att;
    double W = 0, Ws = 0, Wt = 0, Wss = 0, Wst = 0, Wtt = 0;
    if (order >= 1) { As.resize(nl); At.resize(nl); }
    if (order >= 2) { Ass.resize(nl); Ast.resize(nl); Att.resize(nl); }
    for (int jj = 0; jj <= q; ++jj) {
      const int j = b.span_t - q + jj;
      for (int ii = 0; ii <= p; ++ii) {
        const int i = b.span_s - p + ii;
        const double w = weights[cp_index(i, j)];
        const int a = jj * (p + 1) + ii;
        const double N = ds[ii], M = dt[jj];
        A[a] = w * N * M;
        W += A[a];
        if (order >= 1) {
          const double N1 = ds[(p + 1) + ii], M1 = dt[(q + 1) + jj];
          As[a] = w * N1 * M;
          At[a] = w * N * M1;
          Ws += As[a];
          Wt += At[a];
          if (order >= 2) {
            const double N2 = ds[2 * (p + 1) + ii], M2 = dt[2 * (q + 1) + jj];
            Ass[a] = w * N2 * M;
            Ast[a] = w * N1 * M1;
            Att[a] = w * N * M2;
            Wss += Ass[a];
            Wst += Ast[a];
            Wtt += Att[a];
          }
        }
      }
    }

    b.R.resize(nl);
    for (int a = 0; a < nl; ++a) b.R[a] = A[a] / W;
    if (order >= 1) {
      b.Rs.resize(nl);
      b.Rt.resize(nl);
      for (int a = 0; a < nl; ++a) {
        b.Rs[a] = (As[a] - b.R[a] * Ws) / W;
        b.Rt[a] = (At[a] - b.R[a] * Wt) / W;
      }
      if (order >= 2) {
        b.Rss.resize(nl);
        b.Rst.resize(nl);
        b.Rtt.resize(nl);
        for (int a = 0; a < nl; ++a) {
          b.Rss[a] = (Ass[a] - 2.0 * b.Rs[a] * Ws - b.R[a] * Wss) / W;
          b.Rst[a] = (Ast[a] - b.Rs[a] * Wt - b.Rt[a] * Ws - b.R[a] * Wst) / W;
          b.Rtt[a] = (Att[a] - 2.0 * b.Rt[a] * Wt - b.R[a] * Wtt) / W;
        }
      }
    }
    return b;
  }

  Vec3 point(double s, double t) const {
    const SurfaceBasis b = basis(s, t, 0);
    Vec3 x = Vec3::Zero();
    for (int jj = 0; jj <= b.q; ++jj)
      for (int ii = 0; ii <= b.p; ++ii)
        x += b.R[jj * (b.p + 1) + ii] *
             control_points[cp_index(b.span_s - b.p + ii, b.span_t - b.q + jj)];
    return x;
  }

  // Point and first parametric derivatives.
  void derivs(double s, double t, Vec3& S, Vec3& Ss, Vec3& St) const {
    const SurfaceBasis b = basis(s, t, 1);
    S = Ss = St = Vec3::Zero();
    for (int jj = 0; jj <= b.q; ++jj)
      for (int ii = 0; ii <= b.p; ++ii) {
        const int a = jj * (b.p + 1) + ii;
        const Vec3& P = control_points[cp_index(b.span_s - b.p + ii, b.span_t - b.q + jj)];
        S += b.R[a] * P;
        Ss += b.Rs[a] * P;
        St += b.Rt[a] * P;
      }
  }

  double bbox_diagonal() const {
    Vec3 lo = control_points.front(), hi = lo;
    for (const Vec3& p : control_points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
  }

  NurbsSurface refined(const std::vector<double>& new_knots_s,
                       const std::vector<double>& new_knots_t) const;
};

namespace detail {

// Single-knot Boehm insertion on a homogeneous control grid laid out with
// `stride` between consecutive points of the refined direction and `count`
// rows to process. The grid is given as 4-vectors (w*x, w*y, w*z, w).
inline void insert_knot_1d(KnotVector& kv, std::vector<Eigen::Vector4d>& grid,
                           int& n_dir, int n_other, bool dir_is_s, double u) {
  const int p = kv.degree();
  if (u <= kv.domain_min() || u >= kv.domain_max())
    throw std::invalid_argument("refine_knots: inserted knot " + std::to_string(u) +
                                " not strictly inside the domain");
  if (kv.multiplicity(u) + 1 > p)
    throw std::invalid_argument("refine_knots: multiplicity overflow at " +
                                std::to_string(u));
  const int k = kv.find_span(u);

  const int old_n = n_dir;
  const int new_n = n_dir + 1;
  std::vector<Eigen::Vector4d> out(static_cast<size_t>(new_n) * n_other);
  auto old_at = [&](int i, int j) -> const Eigen::Vector4d& {
    return dir_is_s ? grid[j * old_n + i] : grid[i * n_other + j];
  };
  auto new_at = [&](int i, int j) -> Eigen::Vector4d& {
    return dir_is_s ? out[j * new_n + i] : out[i * n_other + j];
  };

  const auto& U = kv.knots();
  for (int j = 0; j < n_other; ++j) {
    for (int i = 0; i <= k - p; ++i) new_at(i, j) = old_at(i, j);
    for (int i = k - p + 1; i <= k; ++i) {
      const double alpha = (u - U[i]) / (U[i + p] - U[i]);
      new_at(i, j) = alpha * old_at(i, j) + (1.0 - alpha) * old_at(i - 1, j);
    }
    for (int i = k + 1; i < new_n; ++i) new_at(i, j) = old_at(i - 1, j);
  }

  std::vector<double> knots = U;
  knots.insert(knots.begin() + (k + 1), u);
  kv = KnotVector(p, std::move(knots));
  grid = std::move(out);
  n_dir = new_n;
}

}  // namespace detail

inline NurbsSurface NurbsSurface::refined(const std::vector<double>& new_knots_s,
                                          const std::vector<double>& new_knots_t) const {
  // work in homogeneous coordinates so rational geometry is preserved exactly
  std::vector<Eigen::Vector4d> grid(control_points.size());
  for (size_t a = 0; a < grid.size(); ++a) {
    grid[a].head<3>() = weights[a] * control_points[a];
    grid[a][3] = weights[a];
  }
  KnotVector ks = kv_s, kt = kv_t;
  int ns = num_cp_s(), nt = num_cp_t();
  for (double u : new_knots_s) detail::insert_knot_1d(ks, grid, ns, nt, true, u);
  for (double v : new_knots_t) detail::insert_knot_1d(kt, grid, nt, ns, false, v);

  NurbsSurface r;
  r.kv_s = std::move(ks);
  r.kv_t = std::move(kt);
  r.control_points.resize(grid.size());
  r.weights.resize(grid.size());
  for (size_t a = 0; a < grid.size(); ++a) {
    r.weights[a] = grid[a][3];
    r.control_points[a] = grid[a].head<3>() / grid[a][3];
  }
  r.validate();
  return r;
}

// Knots that bring `kv` to (at least) `target_spans` uniform spans: the
// uniform breakpoints i/target not already present in the vector.
inline std::vector<double> uniform_refinement_knots(const KnotVector& kv, int target_spans) {
  if (target_spans < kv.span_count())
    throw std::invalid_argument("uniform_refinement_knots: target below current span count");
  const double a = kv.domain_min(), b = kv.domain_max();
  std::vector<double> out;
  for (int i = 1; i < target_spans; ++i) {
    const double u = a + (b - a) * static_cast<double>(i) / target_spans;
    if (kv.multiplicity(u) == 0) out.push_back(u);
  }
  return out;
}

}  // namespace igatopt

#endif  // IGATOPT_SPLINES_HPP
