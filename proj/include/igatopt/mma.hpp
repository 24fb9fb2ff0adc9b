// Method of Moving Asymptotes for one objective and a single inequality
// constraint with box bounds [0,1]^n: asymptote adaptation, the convex
// separable subproblem, and an exact dual solve by bisection on the scalar
// multiplier.
#ifndef IGATOPT_MMA_HPP
#define IGATOPT_MMA_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace igatopt {

struct MmaConfig {
  double move = 0.1;
  double asyinit = 0.1;
  double asyincr = 1.1;
  double asydecr = 0.7;
  double albefa = 0.1;       // bound offset fraction inside the asymptotes
  double raa0 = 5e-3;        // curvature floor; damps the near-optimum limit
                             // cycle the tiny classic value suffers from
  double dual_tol = 1e-9;    // KKT residual tolerance for the dual solve

  void validate() const {
    if (!(move > 0.0 && move <= 1.0))
      throw std::invalid_argument("MmaConfig: move must be in (0,1]");
    if (!(asydecr < 1.0 && 1.0 < asyincr))
      throw std::invalid_argument("MmaConfig: need asydecr < 1 < asyincr");
    if (!(asyinit > 0.0)) throw std::invalid_argument("MmaConfig: asyinit must be positive");
  }
};

struct MmaState {
  Eigen::VectorXd xold1, xold2;
  Eigen::VectorXd low, upp;
  int iter = 0;
};

// Convex separable subproblem in the standard (p,q) form:
//   min sum p0/(upp-x) + q0/(x-low)   s.t.  sum P/(upp-x) + Q/(x-low) <= b,
//   alfa <= x <= beta.
struct MmaSubproblem {
  Eigen::VectorXd low, upp, alfa, beta;
  Eigen::VectorXd p0, q0, P, Q;
  double b = 0.0;

  double objective(const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j)
      v += p0[j] / (upp[j] - x[j]) + q0[j] / (x[j] - low[j]);
    return v;
  }

  // constraint residual sum P/(upp-x) + Q/(x-low) - b  (feasible when <= 0)
  double constraint(const Eigen::VectorXd& x) const {
    double v = -b;
    for (Eigen::Index j = 0; j < x.size(); ++j)
      v += P[j] / (upp[j] - x[j]) + Q[j] / (x[j] - low[j]);
    return v;
  }

  // primal minimizer for a fixed dual multiplier, clamped to [alfa, beta]
  Eigen::VectorXd primal(double lambda) const {
    Eigen::VectorXd x(p0.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double sp = std::sqrt(p0[j] + lambda * P[j]);
      const double sq = std::sqrt(q0[j] + lambda * Q[j]);
      const double xj = (low[j] * sp + upp[j] * sq) / (sp + sq);
      x[j] = std::clamp(xj, alfa[j], beta[j]);
    }
    return x;
  }
};

inline MmaSubproblem build_subproblem(const Eigen::VectorXd& x, const Eigen::VectorXd& df0,
                                      double g, const Eigen::VectorXd& dg,
                                      const MmaState& state, const MmaConfig& cfg) {
  const Eigen::Index n = x.size();
  MmaSubproblem sp;
  sp.low = state.low;
  sp.upp = state.upp;
  sp.alfa.resize(n);
  sp.beta.resize(n);
  sp.p0.resize(n);
  sp.q0.resize(n);
  sp.P.resize(n);
  sp.Q.resize(n);

  for (Eigen::Index j = 0; j < n; ++j) {
    sp.alfa[j] = std::max({0.0, sp.low[j] + cfg.albefa * (x[j] - sp.low[j]),
                           x[j] - cfg.move});
    sp.beta[j] = std::min({1.0, sp.upp[j] - cfg.albefa * (sp.upp[j] - x[j]),
                           x[j] + cfg.move});

    const double u2 = (sp.upp[j] - x[j]) * (sp.upp[j] - x[j]);
    const double l2 = (x[j] - sp.low[j]) * (x[j] - sp.low[j]);

    const double df_pos = std::max(df0[j], 0.0);
    const double df_neg = std::max(-df0[j], 0.0);
    const double pq0 = 0.001 * (df_pos + df_neg) + cfg.raa0;
    sp.p0[j] = (df_pos + pq0) * u2;
    sp.q0[j] = (df_neg + pq0) * l2;

    const double dg_pos = std::max(dg[j], 0.0);
    const double dg_neg = std::max(-dg[j], 0.0);
    const double pq = 0.001 * (dg_pos + dg_neg) + cfg.raa0;
    sp.P[j] = (dg_pos + pq) * u2;
    sp.Q[j] = (dg_neg + pq) * l2;
  }

  // b = -g(x) + value of the approximation's constraint part at x
  sp.b = -g;
  for (Eigen::Index j = 0; j < n; ++j)
    sp.b += sp.P[j] / (sp.upp[j] - x[j]) + sp.Q[j] / (x[j] - sp.low[j]);
  return sp;
}

// Dual bisection on the single multiplier; the dual is concave so the
// constraint residual is monotone non-increasing in lambda.
inline Eigen::VectorXd solve_subproblem(const MmaSubproblem& sp, const MmaConfig& cfg) {
  const double scale = std::max(1.0, std::abs(sp.b));
  Eigen::VectorXd x = sp.primal(0.0);
  if (sp.constraint(x) <= cfg.dual_tol * scale) return x;

  double lo = 0.0, hi = 1.0;
  while (sp.constraint(sp.primal(hi)) > 0.0 && hi < 1e12) {
    lo = hi;
    hi *= 10.0;
  }
  for (int it = 0; it < 128; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sp.constraint(sp.primal(mid)) > 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-14 * std::max(1.0, hi)) break;
  }
  return sp.primal(hi);
}

// One MMA design update. f0/df0 describe the objective, g/dg the single
// constraint in the form g <= 0. Updates the asymptote state in place.
inline Eigen::VectorXd mma_update(const Eigen::VectorXd& x, double f0,
                                  const Eigen::VectorXd& df0, double g,
                                  const Eigen::VectorXd& dg, MmaState& state,
                                  const MmaConfig& cfg) {
  cfg.validate();
  (void)f0;  // the subproblem depends on the gradients only
  const Eigen::Index n = x.size();
  if (df0.size() != n || dg.size() != n)
    throw std::invalid_argument("mma_update: gradient size mismatch");
  if (!df0.allFinite() || !dg.allFinite() || !std::isfinite(g))
    throw std::invalid_argument("mma_update: non-finite inputs");

  state.iter += 1;
  if (state.iter <= 2 || state.xold1.size() != n || state.xold2.size() != n) {
    state.low = x.array() - cfg.asyinit;
    state.upp = x.array() + cfg.asyinit;
  } else {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double z = (x[j] - state.xold1[j]) * (state.xold1[j] - state.xold2[j]);
      double factor = 1.0;
      if (z > 0.0)
        factor = cfg.asyincr;
      else if (z < 0.0)
        factor = cfg.asydecr;
      state.low[j] = x[j] - factor * (state.xold1[j] - state.low[j]);
      state.upp[j] = x[j] + factor * (state.upp[j] - state.xold1[j]);
      // keep the asymptotes within [x-10, x+10] and at least 0.01 away
      state.low[j] = std::clamp(state.low[j], x[j] - 10.0, x[j] - 0.01);
      state.upp[j] = std::clamp(state.upp[j], x[j] + 0.01, x[j] + 10.0);
    }
  }

  const MmaSubproblem sp = build_subproblem(x, df0, g, dg, state, cfg);
  Eigen::VectorXd xnew = solve_subproblem(sp, cfg);

  state.xold2 = (state.xold1.size() == n) ? state.xold1 : x;
  state.xold1 = x;
  return xnew;
}

// g and dg for the two problem flavors: V/V* - 1 or Vbar/alpha - 1.
inline std::pair<double, Eigen::VectorXd> constraint_wrap(double value, double bound,
                                                          const Eigen::VectorXd& gradient) {
  if (!(bound > 0.0))
    throw std::invalid_argument("constraint_wrap: bound must be positive");
  return {value / bound - 1.0, gradient / bound};
}

}  // namespace igatopt

#endif  // IGATOPT_MMA_HPP
