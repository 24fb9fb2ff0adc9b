#include "igatopt/sensitivities.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace igatopt;

namespace {

struct Setup {
  MultiLevelModel mm;
  AnalysisModel model;
  DesignMap map;
  DensityField field;

  Setup(int design_spans, int analysis_spans, double tau = 4.0)
      : mm(build_multilevel(ShellModel{make_plate(100.0, 100.0), 5.0}, design_spans,
                            design_spans, analysis_spans, analysis_spans)),
        model(mm.analysis, 5.0, MaterialParams{}, 0, 2),
        map(DesignMap::build(mm.design, model_centers())) {
    model.fix_boundary({BoundaryCondition::Edge("s0")});
    model.set_loads({LoadCase::PointLoad(1.0, 0.5, Vec3(0, 0, -100))});
    field.basis = mm.design;
    field.tau = tau;
    field.kappa = 0.5;
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    field.coefficients =
        Eigen::VectorXd::Constant(mm.design.num_cp_s() * mm.design.num_cp_t(), 0.45);
    for (Eigen::Index i = 0; i < field.coefficients.size(); ++i)
      field.coefficients[i] += dist(rng);
  }

  std::vector<std::pair<double, double>> model_centers() {
    return AnalysisModel(mm.analysis, 5.0, MaterialParams{}, 0, 2).element_centers();
  }

  double solve_compliance(const Eigen::VectorXd& coeffs) {
    DensityField f = field;
    f.coefficients = coeffs;
    const Eigen::VectorXd rho = element_densities(f, map);
    return model.compliance(model.solve(rho));
  }
};

std::vector<int> pick_indices(int count, int total, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> dist(0, total - 1);
  std::vector<int> idx;
  while (static_cast<int>(idx.size()) < count) {
    const int i = dist(rng);
    if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
  }
  return idx;
}

}  // namespace

TEST_CASE("compliance gradient: zero load and locality") {
  Setup s(5, 10);

  SECTION("no load, no gradient") {
    s.model.set_loads({});
    const Eigen::VectorXd U = s.model.solve(element_densities(s.field, s.map));
    const Eigen::VectorXd g = compliance_gradient(s.model, U, s.field, s.map);
    CHECK(g.norm() == 0.0);
  }

  SECTION("coefficients with no element center in their support get exact zeros") {
    // design basis much finer than the analysis elements
    NurbsSurface plate = make_plate(100.0, 100.0);
    NurbsSurface fine_design = plate.refined(uniform_refinement_knots(plate.kv_s, 24),
                                             uniform_refinement_knots(plate.kv_t, 24));
    AnalysisModel coarse(plate.refined(uniform_refinement_knots(plate.kv_s, 6),
                                       uniform_refinement_knots(plate.kv_t, 6)),
                         5.0, MaterialParams{}, 0, 2);
    coarse.fix_boundary({BoundaryCondition::Edge("s0")});
    coarse.set_loads({LoadCase::PointLoad(1.0, 0.5, Vec3(0, 0, -100))});
    const DesignMap map = DesignMap::build(fine_design, coarse.element_centers());

    DensityField f;
    f.basis = fine_design;
    f.tau = 4.0;
    f.coefficients =
        Eigen::VectorXd::Constant(fine_design.num_cp_s() * fine_design.num_cp_t(), 0.5);
    const Eigen::VectorXd U = coarse.solve(element_densities(f, map));
    const Eigen::VectorXd g = compliance_gradient(coarse, U, f, map);
    // corner coefficient support is [0, 1/24]^2, first center is at 1/12
    CHECK(g[0] == 0.0);
    CHECK(g.norm() > 0.0);
  }
}

TEST_CASE("compliance gradient matches finite differences through the full pipeline") {
  Setup s(5, 10);
  const Eigen::VectorXd rho = element_densities(s.field, s.map);
  const Eigen::VectorXd U = s.model.solve(rho);
  const Eigen::VectorXd grad = compliance_gradient(s.model, U, s.field, s.map);

  // non-positive everywhere
  CHECK(grad.maxCoeff() <= 1e-12);

  const auto idx =
      pick_indices(10, static_cast<int>(s.field.coefficients.size()), 99);
  const FdCheckResult r = fd_gradient_check(
      [&](const Eigen::VectorXd& x) { return s.solve_compliance(x); },
      s.field.coefficients, grad, idx, 1e-5);
  INFO("max relative error " << r.max_rel_error);
  CHECK(r.max_rel_error <= 1e-3);
}

TEST_CASE("volume gradient: closed form and finite differences") {
  Setup s(5, 10, 2.0);
  const Eigen::VectorXd vols = s.model.solid_volumes();

  SECTION("non-negative and FD-consistent") {
    const Eigen::VectorXd grad = volume_gradient(vols, s.field, s.map);
    CHECK(grad.minCoeff() >= -1e-12);
    const auto idx =
        pick_indices(10, static_cast<int>(s.field.coefficients.size()), 7);
    const FdCheckResult r = fd_gradient_check(
        [&](const Eigen::VectorXd& x) {
          DensityField f = s.field;
          f.coefficients = x;
          return total_volume(element_densities(f, s.map), vols);
        },
        s.field.coefficients, grad, idx, 1e-5);
    CHECK(r.max_rel_error <= 1e-4);
  }

  SECTION("uniform field at kappa: entries carry the closed-form H'") {
    DensityField f = s.field;
    f.coefficients.setConstant(0.5);
    f.tau = 2.0;
    const Eigen::VectorXd grad = volume_gradient(vols, f, s.map);
    const double hprime = 2.0 / (2.0 * std::tanh(1.0));  // tau / (2 tanh(tau/2))
    // sum over all coefficients recovers sum_e V_e^0 H'(rho_e)
    CHECK(grad.sum() == Catch::Approx(hprime * vols.sum()).epsilon(1e-12));
    // a single entry equals H' times the basis-weighted volumes in its support
    double expect = 0.0;
    const int target = 0;
    for (size_t e = 0; e < s.map.points.size(); ++e)
      for (const auto& en : s.map.points[e])
        if (en.coefficient == target)
          expect += vols[static_cast<Eigen::Index>(e)] * hprime * en.value;
    CHECK(grad[target] == Catch::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("local volume gradient") {
  Setup s(5, 10, 2.0);
  const Eigen::VectorXd vols = s.model.solid_volumes();
  const auto centroids = s.model.element_centroids();
  const Eigen::VectorXd areas = s.model.element_areas();

  SECTION("degenerate singleton neighborhoods at gamma 1 reduce to the mean") {
    // huge element spacing surrogate: radius below the element pitch
    Neighborhoods nb;
    const int n = static_cast<int>(vols.size());
    nb.lists.resize(n);
    nb.weight_sums.resize(n);
    for (int e = 0; e < n; ++e) {
      nb.lists[e] = {e};
      nb.weight_sums[e] = vols[e];
    }
    const Eigen::VectorXd g1 = local_volume_gradient(vols, nb, s.field, s.map, 1.0);
    const Eigen::VectorXd rho_c = center_densities(s.field, s.map);
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(s.map.num_coefficients);
    for (size_t e = 0; e < s.map.points.size(); ++e) {
      const double f =
          heaviside_deriv(rho_c[static_cast<Eigen::Index>(e)], s.field.tau, s.field.kappa) / n;
      for (const auto& en : s.map.points[e]) expect[en.coefficient] += f * en.value;
    }
    CHECK((g1 - expect).cwiseAbs().maxCoeff() <= 1e-12 * expect.cwiseAbs().maxCoeff());
  }

  SECTION("matches finite differences with real neighborhoods") {
    const Neighborhoods nb = Neighborhoods::build(centroids, areas, vols, 2);
    const Eigen::VectorXd grad = local_volume_gradient(vols, nb, s.field, s.map, 16.0);
    const auto idx =
        pick_indices(10, static_cast<int>(s.field.coefficients.size()), 17);
    const FdCheckResult r = fd_gradient_check(
        [&](const Eigen::VectorXd& x) {
          DensityField f = s.field;
          f.coefficients = x;
          const Eigen::VectorXd rho = element_densities(f, s.map);
          return aggregate_pmean(local_average(rho, nb, vols), 16.0);
        },
        s.field.coefficients, grad, idx, 1e-5);
    INFO("max relative error " << r.max_rel_error);
    CHECK(r.max_rel_error <= 1e-3);
  }

  SECTION("uniform field gradient inherits the square-plate symmetries") {
    DensityField f = s.field;
    f.coefficients.setConstant(0.4);
    const Neighborhoods nb = Neighborhoods::build(centroids, areas, vols, 2);
    const Eigen::VectorXd grad = local_volume_gradient(vols, nb, f, s.map, 16.0);
    const int n = s.mm.design.num_cp_s();
    REQUIRE(n == s.mm.design.num_cp_t());
    auto at = [&](int i, int j) { return grad[j * n + i]; };
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        CHECK(at(i, j) == Catch::Approx(at(j, i)).margin(1e-12));
        CHECK(at(i, j) == Catch::Approx(at(n - 1 - i, j)).margin(1e-12));
        CHECK(at(i, j) == Catch::Approx(at(i, n - 1 - j)).margin(1e-12));
      }
  }
}

TEST_CASE("fd_gradient_check is exact on quadratics") {
  const int n = 12;
  Eigen::VectorXd c(n), x(n);
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int i = 0; i < n; ++i) {
    c[i] = dist(rng);
    x[i] = dist(rng);
  }
  const Eigen::VectorXd grad = 2.0 * (x - c);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  const FdCheckResult r = fd_gradient_check(
      [&](const Eigen::VectorXd& y) { return (y - c).squaredNorm(); }, x, grad, idx, 1e-5);
  CHECK(r.max_rel_error <= 1e-8);
}
