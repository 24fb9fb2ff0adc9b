// Reissner-Mindlin degenerated shell element on the analysis-level NURBS
// basis: local constitutive law with the zero normal-stress condition,
// strain-displacement matrices, Gauss-quadrature element stiffness, sparse
// assembly with Dirichlet elimination, direct solve, and compliance.
#ifndef IGATOPT_RM_ANALYSIS_HPP
#define IGATOPT_RM_ANALYSIS_HPP

#include "igatopt/log.hpp"
#include "igatopt/shell_geometry.hpp"

#include <Eigen/CholmodSupport>
#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace igatopt {

constexpr int kDofPerCp = 5;  // u, v, w, alpha, beta

struct MaterialParams {
  double E0 = 2100.0;
  double E_min = 2100.0 * 1e-6;
  double nu = 0.3;
  double penal = 5.0;  // SIMP exponent

  void validate() const {
    if (!(E0 > 0.0) || !(E_min > 0.0) || !(E_min < E0))
      throw std::invalid_argument("MaterialParams: need 0 < E_min < E0");
    if (!(nu >= 0.0 && nu < 0.5))
      throw std::invalid_argument("MaterialParams: nu must be in [0, 0.5)");
    if (!(penal >= 1.0)) throw std::invalid_argument("MaterialParams: penal must be >= 1");
  }
};

// E(rho) = E_min + rho^penal (E0 - E_min); rho is clamped to [0,1].
inline double simp_modulus(const MaterialParams& mat, double rho) {
  if (rho < 0.0 || rho > 1.0) {
    if (rho < -1e-12 || rho > 1.0 + 1e-12)
      log_warn("simp_modulus: density %g outside [0,1], clamping", rho);
    rho = std::clamp(rho, 0.0, 1.0);
  }
  return mat.E_min + std::pow(rho, mat.penal) * (mat.E0 - mat.E_min);
}

// Local constitutive matrix for strain order (e11, e22, e33, g12, g23, g13)
// with sigma_33 = 0 enforced (zero e33 row/column) and shear correction 5/6
// on the transverse terms.
inline Eigen::Matrix<double, 6, 6> material_matrix(const MaterialParams& mat, double rho) {
  const double E = simp_modulus(mat, rho);
  const double nu = mat.nu;
  const double c = E / (1.0 - nu * nu);
  const double G = 0.5 * E / (1.0 + nu);
  const double ks = 5.0 / 6.0;
  Eigen::Matrix<double, 6, 6> D = Eigen::Matrix<double, 6, 6>::Zero();
  D(0, 0) = D(1, 1) = c;
  D(0, 1) = D(1, 0) = nu * c;
  D(3, 3) = G;
  D(4, 4) = ks * G;
  D(5, 5) = ks * G;
  return D;
}

// Engineering-strain rotation from global to the local frame (rows v1,v2,v3).
inline Eigen::Matrix<double, 6, 6> strain_transformation(const LocalFrame& f) {
  const double l1 = f.v1.x(), m1 = f.v1.y(), n1 = f.v1.z();
  const double l2 = f.v2.x(), m2 = f.v2.y(), n2 = f.v2.z();
  const double l3 = f.v3.x(), m3 = f.v3.y(), n3 = f.v3.z();
  Eigen::Matrix<double, 6, 6> T;
  T << l1 * l1, m1 * m1, n1 * n1, l1 * m1, m1 * n1, n1 * l1,
       l2 * l2, m2 * m2, n2 * n2, l2 * m2, m2 * n2, n2 * l2,
       l3 * l3, m3 * m3, n3 * n3, l3 * m3, m3 * n3, n3 * l3,
       2 * l1 * l2, 2 * m1 * m2, 2 * n1 * n2, l1 * m2 + l2 * m1, m1 * n2 + m2 * n1, n1 * l2 + n2 * l1,
       2 * l2 * l3, 2 * m2 * m3, 2 * n2 * n3, l2 * m3 + l3 * m2, m2 * n3 + m3 * n2, n2 * l3 + n3 * l2,
       2 * l1 * l3, 2 * m1 * m3, 2 * n1 * n3, l1 * m3 + l3 * m1, m1 * n3 + m3 * n1, n1 * l3 + n3 * l1;
  return T;
}

// Selector from the 9 displacement gradients (u_x,u_y,u_z,v_x,...,w_z) to
// the engineering strains (e_xx, e_yy, e_zz, g_xy, g_yz, g_xz).
inline Eigen::Matrix<double, 6, 9> strain_selector() {
  Eigen::Matrix<double, 6, 9> H = Eigen::Matrix<double, 6, 9>::Zero();
  H(0, 0) = 1;
  H(1, 4) = 1;
  H(2, 8) = 1;
  H(3, 1) = H(3, 3) = 1;
  H(4, 5) = H(4, 7) = 1;
  H(5, 2) = H(5, 6) = 1;
  return H;
}

// B = T H Gamma Phi at one quadrature point, in the local frame, over the
// element's 5-DOF coefficient vector (order: cp-major, (u,v,w,alpha,beta)).
inline Eigen::MatrixXd strain_displacement(const SurfaceBasis& basis,
                                           const FrameDerivs& fd,
                                           const Eigen::Matrix3d& J, double thickness,
                                           double zeta) {
  const int nl = basis.count();
  const Eigen::Matrix3d JinvT = J.inverse().transpose();
  // fold T, H and the parametric-to-physical map into one 6x9 operator
  const Eigen::Matrix<double, 6, 9> TH = strain_transformation(fd.frame) * strain_selector();
  Eigen::Matrix<double, 6, 9> THG;
  for (int k = 0; k < 3; ++k)
    THG.middleCols<3>(3 * k) = TH.middleCols<3>(3 * k) * JinvT;

  const double half_h = 0.5 * thickness;
  const double c = zeta * half_h;
  Eigen::MatrixXd B(6, kDofPerCp * nl);
  Eigen::Matrix<double, 9, 5> phi;
  for (int a = 0; a < nl; ++a) {
    const double N = basis.R[a], Ns = basis.Rs[a], Nt = basis.Rt[a];
    phi.setZero();
    for (int k = 0; k < 3; ++k) {
      // translations: component k moves only with coefficient k
      phi(3 * k + 0, k) = Ns;
      phi(3 * k + 1, k) = Nt;
      // rotations through mu = (-v2, v1)
      for (int r = 0; r < 2; ++r) {
        phi(3 * k + 0, 3 + r) = c * (fd.mu_s(k, r) * N + fd.mu(k, r) * Ns);
        phi(3 * k + 1, 3 + r) = c * (fd.mu_t(k, r) * N + fd.mu(k, r) * Nt);
        phi(3 * k + 2, 3 + r) = half_h * fd.mu(k, r) * N;
      }
    }
    B.middleCols<kDofPerCp>(kDofPerCp * a) = THG * phi;
  }
  return B;
}

// 1D Gauss-Legendre nodes and weights on [-1,1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = (n == 1) ? 1.0 : n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[i] = -t;
    x[n - 1 - i] = t;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
  if (n == 1) {
    x[0] = 0.0;
    w[0] = 2.0;
  }
}

struct GaussRule {
  std::vector<double> xs, ws;  // in-plane s
  std::vector<double> xt, wt;  // in-plane t
  std::vector<double> xz, wz;  // thickness

  static GaussRule make(int n_s, int n_t, int n_zeta) {
    GaussRule g;
    gauss_legendre(n_s, g.xs, g.ws);
    gauss_legendre(n_t, g.xt, g.wt);
    gauss_legendre(n_zeta, g.xz, g.wz);
    return g;
  }
};

struct Element {
  int span_s = 0, span_t = 0;
  double s0 = 0, s1 = 0, t0 = 0, t1 = 0;
  double center_s = 0, center_t = 0;
  std::vector<int> cps;   // global control-point indices, local order jj*(p+1)+ii
  Eigen::MatrixXd Ke0;    // solid (E = E0) element stiffness
  double volume0 = 0;     // solid element volume
  double area = 0;        // mid-surface element area
  Vec3 centroid = Vec3::Zero();  // mid-surface point at the parametric center
};

struct BoundaryCondition {
  enum class Kind { Edge, Corner, Point };
  Kind kind = Kind::Edge;
  std::string edge;           // "s0", "s1", "t0", "t1"
  int corner_i = 0, corner_j = 0;
  double s = 0, t = 0;        // Point: fixes the control point nearest in
                              // Greville coordinates

  static BoundaryCondition Edge(std::string e) {
    BoundaryCondition b;
    b.kind = Kind::Edge;
    b.edge = std::move(e);
    return b;
  }
  static BoundaryCondition Corner(int ci, int cj) {
    BoundaryCondition b;
    b.kind = Kind::Corner;
    b.corner_i = ci;
    b.corner_j = cj;
    return b;
  }
  static BoundaryCondition Point(double s, double t) {
    BoundaryCondition b;
    b.kind = Kind::Point;
    b.s = s;
    b.t = t;
    return b;
  }
};

struct LoadCase {
  enum class Kind { Point, Line, Pressure };
  Kind kind = Kind::Point;
  double at_s = 0.5, at_t = 0.5;  // point location
  char line_param = 't';          // line: the held parameter ('s' or 't')
  double line_value = 0.5;
  Vec3 force = Vec3::Zero();      // point: total force; line: per unit length;
                                  // pressure: per unit area

  static LoadCase PointLoad(double s, double t, const Vec3& f) {
    LoadCase l;
    l.kind = Kind::Point;
    l.at_s = s;
    l.at_t = t;
    l.force = f;
    return l;
  }
  static LoadCase LineLoad(char held, double value, const Vec3& f) {
    LoadCase l;
    l.kind = Kind::Line;
    l.line_param = held;
    l.line_value = value;
    l.force = f;
    return l;
  }
  static LoadCase PressureLoad(const Vec3& f) {
    LoadCase l;
    l.kind = Kind::Pressure;
    l.force = f;
    return l;
  }
};

namespace detail {

inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n < 2) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const int nt = std::min(threads, n);
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&] {
      int i;
      while ((i = next.fetch_add(1)) < n) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

// Discretized shell: elements with cached solid stiffness, DOF bookkeeping,
// loads, and the density-scaled solve K(rho) U = F.
class AnalysisModel {
public:
  AnalysisModel(NurbsSurface analysis_surface, double thickness, MaterialParams mat,
                int gauss_extra = 0, int gauss_zeta = 2, int threads = 1)
      : surf_(std::move(analysis_surface)), thickness_(thickness), mat_(mat) {
    surf_.validate();
    mat_.validate();
    if (!(thickness_ > 0.0))
      throw std::invalid_argument("AnalysisModel: thickness must be positive");
    if (gauss_zeta < 1 || gauss_extra < 0)
      throw std::invalid_argument("AnalysisModel: invalid Gauss configuration");
    rule_ = GaussRule::make(surf_.kv_s.degree() + 1 + gauss_extra,
                            surf_.kv_t.degree() + 1 + gauss_extra, gauss_zeta);
    build_elements(threads);
    fixed_.assign(num_dofs(), 0);
    rebuild_dof_maps();
    F_ = Eigen::VectorXd::Zero(num_dofs());
  }

  const NurbsSurface& surface() const { return surf_; }
  double thickness() const { return thickness_; }
  const MaterialParams& material() const { return mat_; }
  const GaussRule& gauss() const { return rule_; }
  const std::vector<Element>& elements() const { return elements_; }
  int num_cp() const { return surf_.num_cp_s() * surf_.num_cp_t(); }
  int num_dofs() const { return kDofPerCp * num_cp(); }
  int num_free_dofs() const { return n_free_; }
  const Eigen::VectorXd& load_vector() const { return F_; }

  std::vector<std::pair<double, double>> element_centers() const {
    std::vector<std::pair<double, double>> c;
    c.reserve(elements_.size());
    for (const Element& e : elements_) c.emplace_back(e.center_s, e.center_t);
    return c;
  }

  Eigen::VectorXd solid_volumes() const {
    Eigen::VectorXd v(elements_.size());
    for (size_t e = 0; e < elements_.size(); ++e) v[static_cast<Eigen::Index>(e)] = elements_[e].volume0;
    return v;
  }

  Eigen::VectorXd element_areas() const {
    Eigen::VectorXd v(elements_.size());
    for (size_t e = 0; e < elements_.size(); ++e) v[static_cast<Eigen::Index>(e)] = elements_[e].area;
    return v;
  }

  std::vector<Vec3> element_centroids() const {
    std::vector<Vec3> c;
    c.reserve(elements_.size());
    for (const Element& e : elements_) c.push_back(e.centroid);
    return c;
  }

  // Stiffness interpolation factor K_e = factor * K_e^0, i.e. E(rho)/E0.
  double modulus_scale(double rho) const { return simp_modulus(mat_, rho) / mat_.E0; }

  void fix_boundary(const std::vector<BoundaryCondition>& bcs) {
    const int ncs = surf_.num_cp_s(), nct = surf_.num_cp_t();
    auto fix_cp = [&](int i, int j) {
      for (int c = 0; c < kDofPerCp; ++c)
        fixed_[kDofPerCp * surf_.cp_index(i, j) + c] = 1;
    };
    for (const BoundaryCondition& bc : bcs) {
      switch (bc.kind) {
        case BoundaryCondition::Kind::Edge: {
          if (bc.edge == "s0")
            for (int j = 0; j < nct; ++j) fix_cp(0, j);
          else if (bc.edge == "s1")
            for (int j = 0; j < nct; ++j) fix_cp(ncs - 1, j);
          else if (bc.edge == "t0")
            for (int i = 0; i < ncs; ++i) fix_cp(i, 0);
          else if (bc.edge == "t1")
            for (int i = 0; i < ncs; ++i) fix_cp(i, nct - 1);
          else
            throw std::invalid_argument("fix_boundary: unknown edge '" + bc.edge + "'");
          break;
        }
        case BoundaryCondition::Kind::Corner:
          fix_cp(bc.corner_i ? ncs - 1 : 0, bc.corner_j ? nct - 1 : 0);
          break;
        case BoundaryCondition::Kind::Point: {
          const auto gs = surf_.kv_s.greville();
          const auto gt = surf_.kv_t.greville();
          int bi = 0, bj = 0;
          for (int i = 1; i < ncs; ++i)
            if (std::abs(gs[i] - bc.s) < std::abs(gs[bi] - bc.s)) bi = i;
          for (int j = 1; j < nct; ++j)
            if (std::abs(gt[j] - bc.t) < std::abs(gt[bj] - bc.t)) bj = j;
          fix_cp(bi, bj);
          break;
        }
      }
    }
    rebuild_dof_maps();
    pattern_ready_ = false;
  }

  void set_loads(const std::vector<LoadCase>& loads) {
    F_.setZero(num_dofs());
    for (const LoadCase& l : loads) add_load(l);
  }

  // Reduced (free-free) stiffness, lower triangle, for the given projected
  // element densities. The sparsity pattern and per-element scatter maps are
  // cached; repeated calls with the same densities are bitwise identical.
  const Eigen::SparseMatrix<double>& assemble(const Eigen::VectorXd& rho_elem) {
    if (rho_elem.size() != static_cast<Eigen::Index>(elements_.size()))
      throw std::invalid_argument("assemble: one density per element required");
    if (!pattern_ready_) build_pattern();
    double* vals = K_.valuePtr();
    std::fill(vals, vals + K_.nonZeros(), 0.0);
    for (size_t e = 0; e < elements_.size(); ++e) {
      const double f = modulus_scale(rho_elem[static_cast<Eigen::Index>(e)]);
      const double* ke = elements_[e].Ke0.data();
      for (const auto& [vi, ki] : scatter_[e]) vals[vi] += f * ke[ki];
    }
    return K_;
  }

  // Solves K(rho) U = F with fixed DOFs eliminated; returns the full-length
  // displacement vector (zeros at fixed DOFs).
  Eigen::VectorXd solve(const Eigen::VectorXd& rho_elem) {
    assemble(rho_elem);
    if (!analyzed_) {
      llt_.analyzePattern(K_);
      analyzed_ = true;
    }
    llt_.factorize(K_);
    if (llt_.info() != Eigen::Success) report_indefinite();
    Eigen::VectorXd Ff(n_free_);
    for (int d = 0; d < num_dofs(); ++d)
      if (free_index_[d] >= 0) Ff[free_index_[d]] = F_[d];
    const Eigen::VectorXd Uf = llt_.solve(Ff);

    const double rnorm = (K_.selfadjointView<Eigen::Lower>() * Uf - Ff).norm();
    const double fnorm = Ff.norm();
    if (fnorm > 0.0 && rnorm > 1e-8 * fnorm)
      throw std::runtime_error("solve_equilibrium: residual " + std::to_string(rnorm / fnorm) +
                               " exceeds tolerance");

    Eigen::VectorXd U = Eigen::VectorXd::Zero(num_dofs());
    for (int d = 0; d < num_dofs(); ++d)
      if (free_index_[d] >= 0) U[d] = Uf[free_index_[d]];
    return U;
  }

  double compliance(const Eigen::VectorXd& U) const { return U.dot(F_); }

  // Element-sum form of the compliance for the given densities.
  double compliance_element_sum(const Eigen::VectorXd& U,
                                const Eigen::VectorXd& rho_elem) const {
    double c = 0.0;
    for (size_t e = 0; e < elements_.size(); ++e) {
      const Eigen::VectorXd Ue = gather(U, elements_[e]);
      c += modulus_scale(rho_elem[static_cast<Eigen::Index>(e)]) *
           Ue.dot(elements_[e].Ke0 * Ue);
    }
    return c;
  }

  // w_e = U_e^T K_e^0 U_e, the solid-element strain energies (doubled).
  Eigen::VectorXd element_energies_solid(const Eigen::VectorXd& U) const {
    Eigen::VectorXd w(elements_.size());
    for (size_t e = 0; e < elements_.size(); ++e) {
      const Eigen::VectorXd Ue = gather(U, elements_[e]);
      w[static_cast<Eigen::Index>(e)] = Ue.dot(elements_[e].Ke0 * Ue);
    }
    return w;
  }

  // Full-size symmetric stiffness without boundary conditions (test support).
  Eigen::SparseMatrix<double> assemble_unconstrained(const Eigen::VectorXd& rho_elem) const {
    std::vector<Eigen::Triplet<double>> trips;
    for (size_t e = 0; e < elements_.size(); ++e) {
      const Element& el = elements_[e];
      const double f = modulus_scale(rho_elem[static_cast<Eigen::Index>(e)]);
      const int nd = static_cast<int>(el.cps.size()) * kDofPerCp;
      for (int a = 0; a < nd; ++a)
        for (int b = 0; b < nd; ++b)
          trips.emplace_back(global_dof(el, a), global_dof(el, b), f * el.Ke0(a, b));
    }
    Eigen::SparseMatrix<double> K(num_dofs(), num_dofs());
    K.setFromTriplets(trips.begin(), trips.end());
    return K;
  }

  bool is_fixed(int dof) const { return fixed_[dof] != 0; }

  Eigen::VectorXd gather(const Eigen::VectorXd& U, const Element& el) const {
    Eigen::VectorXd Ue(el.cps.size() * kDofPerCp);
    for (size_t a = 0; a < el.cps.size(); ++a)
      for (int c = 0; c < kDofPerCp; ++c)
        Ue[kDofPerCp * a + c] = U[kDofPerCp * el.cps[a] + c];
    return Ue;
  }

private:
  int global_dof(const Element& el, int local) const {
    return kDofPerCp * el.cps[local / kDofPerCp] + local % kDofPerCp;
  }

  // Count near-zero pivots with a simplicial LDLT for the error message.
  [[noreturn]] void report_indefinite() const {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt(K_);
    int near_zero = 0;
    if (ldlt.info() == Eigen::Success) {
      const auto& d = ldlt.vectorD();
      const double scale = d.cwiseAbs().maxCoeff();
      for (Eigen::Index i = 0; i < d.size(); ++i)
        if (std::abs(d[i]) < 1e-12 * scale) ++near_zero;
    }
    throw std::runtime_error(
        "solve_equilibrium: factorization failed (insufficient boundary conditions?); " +
        std::to_string(near_zero) + " near-zero pivots");
  }

  void build_elements(int threads) {
    const int p = surf_.kv_s.degree(), q = surf_.kv_t.degree();
    const auto bs = surf_.kv_s.breakpoints();
    const auto bt = surf_.kv_t.breakpoints();

    elements_.clear();
    for (size_t jt = 0; jt + 1 < bt.size(); ++jt)
      for (size_t is = 0; is + 1 < bs.size(); ++is) {
        Element e;
        e.s0 = bs[is];
        e.s1 = bs[is + 1];
        e.t0 = bt[jt];
        e.t1 = bt[jt + 1];
        e.center_s = 0.5 * (e.s0 + e.s1);
        e.center_t = 0.5 * (e.t0 + e.t1);
        e.span_s = surf_.kv_s.find_span(e.center_s);
        e.span_t = surf_.kv_t.find_span(e.center_t);
        e.cps.reserve((p + 1) * (q + 1));
        for (int jj = 0; jj <= q; ++jj)
          for (int ii = 0; ii <= p; ++ii)
            e.cps.push_back(surf_.cp_index(e.span_s - p + ii, e.span_t - q + jj));
        elements_.push_back(std::move(e));
      }

    const Eigen::Matrix<double, 6, 6> D0 = material_matrix(mat_, 1.0);
    detail::parallel_for(
        static_cast<int>(elements_.size()), threads, [&](int idx) {
          Element& e = elements_[idx];
          const int nd = static_cast<int>(e.cps.size()) * kDofPerCp;
          e.Ke0 = Eigen::MatrixXd::Zero(nd, nd);
          e.volume0 = 0.0;
          e.area = 0.0;
          const double js = 0.5 * (e.s1 - e.s0), jt = 0.5 * (e.t1 - e.t0);
          for (size_t gs = 0; gs < rule_.xs.size(); ++gs)
            for (size_t gt = 0; gt < rule_.xt.size(); ++gt) {
              const double s = e.center_s + js * rule_.xs[gs];
              const double t = e.center_t + jt * rule_.xt[gt];
              const double w_st = rule_.ws[gs] * rule_.wt[gt] * js * jt;
              const SurfaceBasis basis = surf_.basis(s, t, 1);
              Vec3 S, Ss, St;
              surf_.derivs(s, t, S, Ss, St);
              const FrameDerivs fd = frame_with_derivs(surf_, s, t);
              e.area += Ss.cross(St).norm() * w_st;
              const double half_h = 0.5 * thickness_;
              for (size_t gz = 0; gz < rule_.xz.size(); ++gz) {
                const double zeta = rule_.xz[gz];
                Eigen::Matrix3d J;
                J.col(0) = Ss + zeta * half_h * fd.v3_s;
                J.col(1) = St + zeta * half_h * fd.v3_t;
                J.col(2) = half_h * fd.frame.v3;
                const double detJ = std::abs(J.determinant());
                if (detJ <= 0.0)
                  throw std::runtime_error("element " + std::to_string(idx) +
                                           ": singular Jacobian at a quadrature point");
                const double w = w_st * rule_.wz[gz] * detJ;
                const Eigen::MatrixXd B = strain_displacement(basis, fd, J, thickness_, zeta);
                e.Ke0.noalias() += w * B.transpose() * (D0 * B);
                e.volume0 += w;
              }
            }
          e.centroid = surf_.point(e.center_s, e.center_t);
        });
  }

  void rebuild_dof_maps() {
    free_index_.assign(num_dofs(), -1);
    n_free_ = 0;
    for (int d = 0; d < num_dofs(); ++d)
      if (!fixed_[d]) free_index_[d] = n_free_++;
  }

  void build_pattern() {
    std::vector<Eigen::Triplet<double>> trips;
    scatter_.assign(elements_.size(), {});
    for (const Element& el : elements_) {
      const int nd = static_cast<int>(el.cps.size()) * kDofPerCp;
      for (int a = 0; a < nd; ++a) {
        const int ga = free_index_[global_dof(el, a)];
        if (ga < 0) continue;
        for (int b = 0; b < nd; ++b) {
          const int gb = free_index_[global_dof(el, b)];
          if (gb < 0 || ga < gb) continue;  // keep the lower triangle
          trips.emplace_back(ga, gb, 0.0);
        }
      }
    }
    K_ = Eigen::SparseMatrix<double>(n_free_, n_free_);
    K_.setFromTriplets(trips.begin(), trips.end());
    K_.makeCompressed();

    // per-element map from Ke0 entries to compressed value slots
    for (size_t e = 0; e < elements_.size(); ++e) {
      const Element& el = elements_[e];
      const int nd = static_cast<int>(el.cps.size()) * kDofPerCp;
      auto& list = scatter_[e];
      list.reserve(nd * nd / 2);
      for (int b = 0; b < nd; ++b) {
        const int gb = free_index_[global_dof(el, b)];
        if (gb < 0) continue;
        for (int a = 0; a < nd; ++a) {
          const int ga = free_index_[global_dof(el, a)];
          if (ga < 0 || ga < gb) continue;
          const int* begin = K_.innerIndexPtr() + K_.outerIndexPtr()[gb];
          const int* end = K_.innerIndexPtr() + K_.outerIndexPtr()[gb + 1];
          const int* it = std::lower_bound(begin, end, ga);
          list.emplace_back(static_cast<int>(it - K_.innerIndexPtr()),
                            b * nd + a);  // Ke0 is column-major
        }
      }
    }
    pattern_ready_ = true;
    analyzed_ = false;
  }

  void add_load(const LoadCase& l) {
    switch (l.kind) {
      case LoadCase::Kind::Point: {
        const SurfaceBasis b = surf_.basis(l.at_s, l.at_t, 0);
        for (int jj = 0; jj <= b.q; ++jj)
          for (int ii = 0; ii <= b.p; ++ii) {
            const int cp = surf_.cp_index(b.span_s - b.p + ii, b.span_t - b.q + jj);
            const double R = b.R[jj * (b.p + 1) + ii];
            for (int c = 0; c < 3; ++c) F_[kDofPerCp * cp + c] += R * l.force[c];
          }
        break;
      }
      case LoadCase::Kind::Line: {
        const bool hold_t = (l.line_param == 't');
        if (!hold_t && l.line_param != 's')
          throw std::invalid_argument("load: line parameter must be 's' or 't'");
        const KnotVector& kv = hold_t ? surf_.kv_s : surf_.kv_t;
        const KnotVector& kv_held = hold_t ? surf_.kv_t : surf_.kv_s;
        if (l.line_value < kv_held.domain_min() || l.line_value > kv_held.domain_max())
          throw std::invalid_argument("load: line location outside the domain");
        const auto& gx = hold_t ? rule_.xs : rule_.xt;
        const auto& gw = hold_t ? rule_.ws : rule_.wt;
        const auto bp = kv.breakpoints();
        for (size_t sp = 0; sp + 1 < bp.size(); ++sp) {
          const double mid = 0.5 * (bp[sp] + bp[sp + 1]);
          const double half = 0.5 * (bp[sp + 1] - bp[sp]);
          for (size_t g = 0; g < gx.size(); ++g) {
            const double u = mid + half * gx[g];
            const double s = hold_t ? u : l.line_value;
            const double t = hold_t ? l.line_value : u;
            Vec3 S, Ss, St;
            surf_.derivs(s, t, S, Ss, St);
            const double speed = hold_t ? Ss.norm() : St.norm();
            const double w = gw[g] * half * speed;
            const SurfaceBasis b = surf_.basis(s, t, 0);
            for (int jj = 0; jj <= b.q; ++jj)
              for (int ii = 0; ii <= b.p; ++ii) {
                const int cp = surf_.cp_index(b.span_s - b.p + ii, b.span_t - b.q + jj);
                const double R = b.R[jj * (b.p + 1) + ii];
                for (int c = 0; c < 3; ++c) F_[kDofPerCp * cp + c] += w * R * l.force[c];
              }
          }
        }
        break;
      }
      case LoadCase::Kind::Pressure: {
        for (const Element& e : elements_) {
          const double js = 0.5 * (e.s1 - e.s0), jt = 0.5 * (e.t1 - e.t0);
          for (size_t gs = 0; gs < rule_.xs.size(); ++gs)
            for (size_t gt = 0; gt < rule_.xt.size(); ++gt) {
              const double s = e.center_s + js * rule_.xs[gs];
              const double t = e.center_t + jt * rule_.xt[gt];
              Vec3 S, Ss, St;
              surf_.derivs(s, t, S, Ss, St);
              const double w = rule_.ws[gs] * rule_.wt[gt] * js * jt * Ss.cross(St).norm();
              const SurfaceBasis b = surf_.basis(s, t, 0);
              for (int jj = 0; jj <= b.q; ++jj)
                for (int ii = 0; ii <= b.p; ++ii) {
                  const int cp = surf_.cp_index(b.span_s - b.p + ii, b.span_t - b.q + jj);
                  const double R = b.R[jj * (b.p + 1) + ii];
                  for (int c = 0; c < 3; ++c)
                    F_[kDofPerCp * cp + c] += w * R * l.force[c];
                }
            }
        }
        break;
      }
    }
  }

  NurbsSurface surf_;
  double thickness_;
  MaterialParams mat_;
  GaussRule rule_;
  std::vector<Element> elements_;
  std::vector<char> fixed_;
  std::vector<int> free_index_;
  int n_free_ = 0;
  Eigen::VectorXd F_;

  Eigen::SparseMatrix<double> K_;
  std::vector<std::vector<std::pair<int, int>>> scatter_;
  bool pattern_ready_ = false;
  bool analyzed_ = false;
  Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt_;
};

}  // namespace igatopt

#endif  // IGATOPT_RM_ANALYSIS_HPP
