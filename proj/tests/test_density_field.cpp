#include "igatopt/density_field.hpp"
#include "igatopt/shell_geometry.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace igatopt;

namespace {

DensityField uniform_field(const NurbsSurface& basis, double value, double tau = 2.0,
                           double kappa = 0.5) {
  DensityField f;
  f.basis = basis;
  f.coefficients = Eigen::VectorXd::Constant(basis.num_cp_s() * basis.num_cp_t(), value);
  f.tau = tau;
  f.kappa = kappa;
  f.validate();
  return f;
}

}  // namespace

TEST_CASE("eval_density: partition of unity and end interpolation") {
  NurbsSurface basis = make_plate(1.0, 1.0).refined(
      uniform_refinement_knots(uniform_clamped_knots(2, 1), 5),
      uniform_refinement_knots(uniform_clamped_knots(2, 1), 5));
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(0.0, 1.0);

  SECTION("uniform coefficients give a constant field") {
    DensityField f = uniform_field(basis, 0.3);
    for (int trial = 0; trial < 50; ++trial)
      CHECK(f.eval(dist(rng), dist(rng)) == Catch::Approx(0.3).margin(1e-12));
  }

  SECTION("0/1 coefficients stay within [0,1]") {
    DensityField f = uniform_field(basis, 0.0);
    for (Eigen::Index i = 0; i < f.coefficients.size(); ++i)
      f.coefficients[i] = (i % 3 == 0) ? 1.0 : 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const double v = f.eval(dist(rng), dist(rng));
      CHECK(v >= -1e-14);
      CHECK(v <= 1.0 + 1e-14);
    }
  }

  SECTION("clamped corner interpolates the corner coefficient") {
    DensityField f = uniform_field(basis, 0.5);
    for (Eigen::Index i = 0; i < f.coefficients.size(); ++i)
      f.coefficients[i] = dist(rng);
    CHECK(f.eval(0.0, 0.0) == Catch::Approx(f.coefficients[0]).margin(1e-13));
  }
}

TEST_CASE("heaviside projection basics") {
  SECTION("fixed points at kappa = 0.5") {
    for (double tau : {0.5, 2.0, 16.0, 64.0}) {
      CHECK(heaviside(0.5, tau, 0.5) == Catch::Approx(0.5).margin(1e-14));
      CHECK(heaviside(0.0, tau, 0.5) == Catch::Approx(0.0).margin(1e-14));
      CHECK(heaviside(1.0, tau, 0.5) == Catch::Approx(1.0).margin(1e-14));
    }
  }

  SECTION("sharpening limits are monotone in tau") {
    double prev_lo = heaviside(0.4, 2.0, 0.5), prev_hi = heaviside(0.6, 2.0, 0.5);
    for (double tau : {4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) {
      const double lo = heaviside(0.4, tau, 0.5), hi = heaviside(0.6, tau, 0.5);
      CHECK(lo <= prev_lo + 1e-14);
      CHECK(hi >= prev_hi - 1e-14);
      prev_lo = lo;
      prev_hi = hi;
    }
    CHECK(heaviside(0.4, 512.0, 0.5) <= 1e-12);
    CHECK(heaviside(0.6, 512.0, 0.5) >= 1.0 - 1e-12);
  }

  SECTION("monotone increasing in rho for any kappa") {
    for (double kappa : {0.25, 0.5, 0.75}) {
      double prev = heaviside(0.0, 8.0, kappa);
      for (double r = 0.05; r <= 1.0; r += 0.05) {
        const double v = heaviside(r, 8.0, kappa);
        CHECK(v > prev);
        prev = v;
      }
    }
  }

  SECTION("analytic derivative matches finite differences") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(0.05, 0.95);
    const double h = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
      const double r = dist(rng);
      const double fd = (heaviside(r + h, 8.0, 0.5) - heaviside(r - h, 8.0, 0.5)) / (2 * h);
      CHECK(fd == Catch::Approx(heaviside_deriv(r, 8.0, 0.5)).epsilon(1e-6));
    }
  }

  SECTION("invalid tau rejected") {
    CHECK_THROWS_AS(heaviside(0.5, 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(heaviside_deriv(0.5, -1.0, 0.5), std::invalid_argument);
  }
}

TEST_CASE("element densities at centers follow the projection") {
  ShellModel cad{make_plate(10.0, 10.0), 1.0};
  const MultiLevelModel mm = build_multilevel(cad, 4, 4, 8, 8);

  // centers of an 8x8 analysis element grid
  std::vector<std::pair<double, double>> centers;
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 8; ++i)
      centers.emplace_back((i + 0.5) / 8.0, (j + 0.5) / 8.0);
  const DesignMap map = DesignMap::build(mm.design, centers);

  SECTION("uniform field projects uniformly") {
    DensityField f = uniform_field(mm.design, 0.3, 4.0);
    const Eigen::VectorXd rho = element_densities(f, map);
    for (Eigen::Index e = 0; e < rho.size(); ++e)
      CHECK(rho[e] == Catch::Approx(heaviside(0.3, 4.0, 0.5)).margin(1e-12));
  }

  SECTION("0.5 is a fixed point at kappa = 0.5") {
    DensityField f = uniform_field(mm.design, 0.5, 8.0);
    const Eigen::VectorXd rho = element_densities(f, map);
    for (Eigen::Index e = 0; e < rho.size(); ++e)
      CHECK(rho[e] == Catch::Approx(0.5).margin(1e-12));
  }

  SECTION("design refinement leaves element densities unchanged") {
    DensityField f = uniform_field(mm.design, 0.0, 4.0);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (Eigen::Index i = 0; i < f.coefficients.size(); ++i) f.coefficients[i] = dist(rng);
    const Eigen::VectorXd before = element_densities(f, map);

    const DensityField fr = refine_density_field(f, {0.3, 0.6}, {0.45});
    const DesignMap map2 = DesignMap::build(fr.basis, centers);
    const Eigen::VectorXd after = element_densities(fr, map2);
    for (Eigen::Index e = 0; e < before.size(); ++e)
      CHECK(after[e] == Catch::Approx(before[e]).margin(1e-10));
  }
}

TEST_CASE("total volume is linear in the element densities") {
  Eigen::VectorXd vols(4);
  vols << 1.0, 2.0, 3.0, 4.0;
  CHECK(total_volume(Eigen::VectorXd::Ones(4), vols) == Catch::Approx(10.0));
  CHECK(total_volume(Eigen::VectorXd::Constant(4, 0.3), vols) ==
        Catch::Approx(3.0).margin(1e-12));
  CHECK_THROWS_AS(total_volume(Eigen::VectorXd::Ones(3), vols), std::invalid_argument);
}

TEST_CASE("local averaging over element neighborhoods") {
  // 3x3 grid of unit elements on a flat plate
  std::vector<Vec3> centroids;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) centroids.push_back(Vec3(i, j, 0));
  const Eigen::VectorXd areas = Eigen::VectorXd::Ones(9);
  const Eigen::VectorXd vols = Eigen::VectorXd::Ones(9);

  SECTION("radius covering all 9 gives the 1/9 average at the center") {
    const Neighborhoods nb = Neighborhoods::build(centroids, areas, vols, 3);
    REQUIRE(nb.lists[4].size() == 9);
    Eigen::VectorXd rho = Eigen::VectorXd::Zero(9);
    rho[4] = 1.0;
    const Eigen::VectorXd bar = local_average(rho, nb, vols);
    CHECK(bar[4] == Catch::Approx(1.0 / 9.0).margin(1e-14));
  }

  SECTION("tiny radius reduces to the element itself") {
    // delta = 1, so radius 1 catches the 4-neighbors; shrink distances instead
    std::vector<Vec3> spread;
    for (const Vec3& c : centroids) spread.push_back(3.0 * c);
    const Neighborhoods nb = Neighborhoods::build(spread, areas, vols, 1);
    for (int e = 0; e < 9; ++e) REQUIRE(nb.lists[e].size() == 1);
    Eigen::VectorXd rho(9);
    for (int e = 0; e < 9; ++e) rho[e] = 0.1 * e;
    const Eigen::VectorXd bar = local_average(rho, nb, vols);
    for (int e = 0; e < 9; ++e) CHECK(bar[e] == Catch::Approx(rho[e]).margin(1e-14));
  }

  SECTION("uniform field is a fixed point; bounds hold") {
    const Neighborhoods nb = Neighborhoods::build(centroids, areas, vols, 2);
    const Eigen::VectorXd bar = local_average(Eigen::VectorXd::Constant(9, 0.42), nb, vols);
    for (int e = 0; e < 9; ++e) CHECK(bar[e] == Catch::Approx(0.42).margin(1e-14));

    std::mt19937 rng(13);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Eigen::VectorXd rho(9);
    for (int e = 0; e < 9; ++e) rho[e] = dist(rng);
    const Eigen::VectorXd b2 = local_average(rho, nb, vols);
    for (int e = 0; e < 9; ++e) {
      CHECK(b2[e] >= rho.minCoeff() - 1e-14);
      CHECK(b2[e] <= rho.maxCoeff() + 1e-14);
    }
  }
}

TEST_CASE("p-mean aggregation") {
  SECTION("constant vector aggregates to itself") {
    CHECK(aggregate_pmean(Eigen::VectorXd::Constant(7, 0.3), 16.0) ==
          Catch::Approx(0.3).margin(1e-14));
  }
  SECTION("two-point example (0,1) at gamma = 16") {
    Eigen::VectorXd v(2);
    v << 0.0, 1.0;
    CHECK(aggregate_pmean(v, 16.0) ==
          Catch::Approx(std::pow(0.5, 1.0 / 16.0)).margin(1e-15));
  }
  SECTION("bounded by the max and monotone in entries") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Eigen::VectorXd v(20);
    for (int i = 0; i < 20; ++i) v[i] = dist(rng);
    const double agg = aggregate_pmean(v, 16.0);
    CHECK(agg <= v.maxCoeff() + 1e-14);
    Eigen::VectorXd v2 = v;
    v2[5] += 0.1;
    CHECK(aggregate_pmean(v2, 16.0) > agg);
  }
  SECTION("non-decreasing in gamma (power-mean inequality)") {
    std::mt19937 rng(19);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Eigen::VectorXd v(30);
    for (int i = 0; i < 30; ++i) v[i] = dist(rng);
    double prev = aggregate_pmean(v, 1.0);
    for (double gamma : {4.0, 16.0, 64.0}) {
      const double cur = aggregate_pmean(v, gamma);
      CHECK(cur >= prev - 1e-12);
      prev = cur;
    }
  }
  SECTION("invalid gamma rejected") {
    CHECK_THROWS_AS(aggregate_pmean(Eigen::VectorXd::Ones(3), 0.0), std::invalid_argument);
  }
}
