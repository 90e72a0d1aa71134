#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "spme/spme.hpp"

using namespace spme;

namespace {

// int_{|y| < R} (C - k|y|^2)^m dy in closed form through the beta function.
double closed_form_mass(double C, double k, double m, int d) {
  if (d == 1) return std::pow(C, m) * std::sqrt(C / k) * std::beta(0.5, m + 1.0);
  return std::numbers::pi * std::pow(C, m + 1.0) / (k * (m + 1.0));
}

// Mass of u_B(t, .) by Gauss quadrature in the radial variable; exact for p = 3.
double numeric_mass(const BarenblattParams& bp, double t) {
  const double R = barenblatt_support_radius(bp, t);
  const QuadratureRule rule(10);
  double sum = 0.0;
  for (int q = 0; q < rule.order(); ++q) {
    const double r = R * rule.nodes()[static_cast<std::size_t>(q)];
    const double w = R * rule.weights()[static_cast<std::size_t>(q)];
    const double u = barenblatt(bp, t, Point{r, 0.0});
    sum += bp.d == 1 ? 2.0 * w * u : 2.0 * std::numbers::pi * r * w * u;
  }
  return sum;
}

}  // namespace

TEST(Barenblatt, ConstantsOneDim) {
  const auto bp = barenblatt_constants(3.0, 1);
  EXPECT_NEAR(bp.a, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(bp.b, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(bp.k, 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(bp.C, std::pow(std::sqrt(3.0) / 8.0, 2.0 / 3.0), 1e-13);
  EXPECT_NEAR(bp.C, std::cbrt(3.0) / 4.0, 1e-13);
  EXPECT_NEAR(bp.radius_coefficient(), std::sqrt(12.0 * bp.C), 1e-13);
}

TEST(Barenblatt, UnitMassAgainstBetaFunction) {
  for (double p : {2.5, 3.0, 4.0, 5.0}) {
    for (int d : {1, 2}) {
      const auto bp = barenblatt_constants(p, d);
      EXPECT_NEAR(closed_form_mass(bp.C, bp.k, 1.0 / (p - 2.0), d), 1.0, 1e-10) << "p=" << p << " d=" << d;
      const auto bp2 = barenblatt_constants(p, d, 2.5);
      EXPECT_NEAR(closed_form_mass(bp2.C, bp2.k, 1.0 / (p - 2.0), d), 2.5, 1e-10);
    }
  }
  EXPECT_THROW(barenblatt_constants(2.0, 1), std::invalid_argument);
}

TEST(Barenblatt, MassIsTimeInvariant) {
  for (int d : {1, 2}) {
    const auto bp = barenblatt_constants(3.0, d);
    for (double t : {0.01, 0.05, 0.1}) EXPECT_NEAR(numeric_mass(bp, t), 1.0, 1e-8) << "d=" << d << " t=" << t;
  }
}

TEST(Barenblatt, ValuesAndSupport) {
  const auto bp = barenblatt_constants(3.0, 1);
  const double t = 0.05;
  EXPECT_NEAR(barenblatt(bp, t, Point{0.0, 0.0}), std::pow(t, -bp.a) * bp.C, 1e-13);
  const double R = barenblatt_support_radius(bp, t);
  EXPECT_EQ(barenblatt(bp, t, Point{R * (1.0 + 1e-12), 0.0}), 0.0);
  EXPECT_GT(barenblatt(bp, t, Point{0.99 * R, 0.0}), 0.0);
  EXPECT_THROW(barenblatt(bp, 0.0, Point{0.0, 0.0}), std::invalid_argument);
}

TEST(Barenblatt, SolvesPorousMediumEquation) {
  for (int d : {1, 2}) {
    const auto bp = barenblatt_constants(3.0, d);
    const auto u = [&](double t, double x, double y) { return barenblatt(bp, t, Point{x, y}); };
    const auto a = [&](double t, double x, double y) {
      const double v = u(t, x, y);
      return std::abs(v) * v;
    };
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> U(0.0, 0.8);
    const double e = 1e-4;
    for (int n = 0; n < 20; ++n) {
      const double t = 0.02 + 0.08 * U(rng);
      const double R = barenblatt_support_radius(bp, t);
      const double x = R * (U(rng) - 0.4);
      const double y = d == 2 ? R * (U(rng) - 0.4) : 0.0;
      const double ut = (u(t + e, x, y) - u(t - e, x, y)) / (2.0 * e);
      double lap = (a(t, x + e, y) - 2.0 * a(t, x, y) + a(t, x - e, y)) / (e * e);
      if (d == 2) lap += (a(t, x, y + e) - 2.0 * a(t, x, y) + a(t, x, y - e)) / (e * e);
      EXPECT_NEAR(ut, lap, 1e-5 * std::abs(ut) + 1e-6) << "d=" << d << " t=" << t << " x=" << x;
    }
  }
}

TEST(StochasticBarenblatt, ZeroPathClosedForm) {
  const auto bp = barenblatt_constants(3.0, 1);
  const int N = 1000;
  const IncrementTable zero(Eigen::MatrixXd::Zero(N, 1), 0.1 / N);
  const StochasticBarenblatt ex(bp, zero);
  for (double t : {0.01, 0.0501, 0.1}) {
    const double theta = 2.0 * (1.0 - std::exp(-t / 2.0));
    for (double x : {0.0, 0.1, 0.2}) {
      const double ref = barenblatt(bp, theta, Point{x, 0.0}) * std::exp(-t / 2.0);
      EXPECT_NEAR(ex(t, Point{x, 0.0}), ref, 1e-9 * std::max(1.0, ref));
    }
    EXPECT_NEAR(ex.support_radius(t), std::sqrt(12.0 * bp.C) * std::cbrt(theta), 1e-10);
  }
}

TEST(StochasticBarenblatt, SmallPathLimit) {
  const auto bp = barenblatt_constants(3.0, 1);
  const int N = 128;
  const double tau = 0.1 / N;
  const IncrementTable path(N, tau, 1, 3);
  const StochasticBarenblatt ref(bp, IncrementTable(Eigen::MatrixXd::Zero(N, 1), tau));
  const Point x{0.05, 0.0};
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const StochasticBarenblatt ex(bp, IncrementTable(eps * path.increments(), tau));
    const double diff = std::abs(ex(0.1, x) - ref(0.1, x));
    EXPECT_LT(diff, prev);
    prev = diff;
  }
  EXPECT_LT(prev, 1e-2 * ref(0.1, x));
}

TEST(StochasticBarenblatt, PositiveAndPathwiseRadius) {
  const auto bp = barenblatt_constants(3.0, 1);
  const IncrementTable path(64, 0.1 / 64, 1, 11);
  const StochasticBarenblatt ex(bp, path);
  for (int n = 1; n <= 64; ++n) {
    const double t = n * 0.1 / 64;
    EXPECT_NEAR(ex.support_radius(t), std::sqrt(12.0 * bp.C) * std::cbrt(ex.theta(n)), 1e-12);
    for (double x : {-0.5, -0.1, 0.0, 0.3}) EXPECT_GE(ex(t, Point{x, 0.0}), 0.0);
  }
  EXPECT_NEAR(stochastic_exact(bp, 0.1, Point{0.0, 0.0}, path), ex(0.1, Point{0.0, 0.0}), 1e-15);
  EXPECT_THROW(StochasticBarenblatt(barenblatt_constants(3.0, 2), path), std::invalid_argument);
}

TEST(SpacetimeError, ZeroForOwnTrajectory) {
  const Grid g(1.5, 8, 1);
  Trajectory traj(g, 0.1, 10, 0);
  for (int n = 0; n <= 10; ++n) {
    Eigen::VectorXd c(8);
    for (int i = 0; i < 8; ++i) c[i] = std::sin(0.3 * n + i);
    traj.states().push_back(c);
  }
  const SpaceTimeFunction self = [&](double t, const Point& x) { return eval_field(traj.right_constant(t), x); };
  EXPECT_NEAR(lp_spacetime_error(traj, self, 3.0, 0.01, 0.1), 0.0, 1e-14);
  EXPECT_NEAR(lp_spacetime_error(traj, self, 3.0, 0.01, 0.1, ErrorQuadrature::gauss(3, 2)), 0.0, 1e-14);
}

TEST(SpacetimeError, ConstantDifference) {
  for (int d : {1, 2}) {
    const Grid g(1.5, 8, d);
    Trajectory traj(g, 0.1, 20, 0);
    for (int n = 0; n <= 20; ++n) {
      traj.states().push_back(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.cell_count()), 0.1 * n));
    }
    const double c = 0.37;
    const SpaceTimeFunction shifted = [&](double t, const Point& x) {
      return eval_field(traj.right_constant(t), x) + c;
    };
    const double vol = g.domain_volume();
    // A grid-aligned t_lo: both windows cover the same steps.
    EXPECT_NEAR(lp_spacetime_error(traj, shifted, 3.0, 0.02, 0.1), c * std::cbrt(0.08 * vol), 1e-12);
    // Off-grid t_lo under the clipped window.
    EXPECT_NEAR(lp_spacetime_error(traj, shifted, 2.0, 0.0123, 0.1, ErrorQuadrature::gauss(2, 1)),
                c * std::sqrt((0.1 - 0.0123) * vol), 1e-12);
  }
}

TEST(SpacetimeError, TriangleInequality) {
  const Grid g(1.5, 8, 1);
  Trajectory a(g, 0.1, 10, 0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int n = 0; n <= 10; ++n) {
    Eigen::VectorXd c(8);
    for (int i = 0; i < 8; ++i) c[i] = z(rng);
    a.states().push_back(c);
  }
  const SpaceTimeFunction f = [](double t, const Point& x) { return std::sin(3.0 * x[0] + t); };
  const SpaceTimeFunction h = [](double t, const Point& x) { return x[0] * x[0] - t; };
  const SpaceTimeFunction fh = [&](double t, const Point& x) { return f(t, x) - h(t, x); };
  Trajectory zero(g, 0.1, 10, 0);
  zero.states().assign(11, Eigen::VectorXd::Zero(8));
  const auto rule = ErrorQuadrature::gauss(4, 3);
  // ||u - f|| <= ||u - h|| + ||f - h||
  EXPECT_LE(lp_spacetime_error(a, f, 3.0, 0.01, 0.1, rule),
            lp_spacetime_error(a, h, 3.0, 0.01, 0.1, rule) + lp_spacetime_error(zero, fh, 3.0, 0.01, 0.1, rule) +
                1e-12);
}

TEST(HeatFourier, Properties) {
  SineSeries s;
  s.d = 2;
  s.L = 1.5;
  s.coeff = Eigen::MatrixXd::Zero(3, 3);
  s.coeff(0, 0) = 1.0;
  const Point x{0.2, -0.4};
  EXPECT_NEAR(heat_fourier(s, 0.0, x), s.mode(1, 1, x), 1e-15);
  EXPECT_NEAR(heat_fourier(s, 0.3, x), std::exp(-0.3 * s.eigenvalue(1, 1)) * s.mode(1, 1, x), 1e-15);
  SineSeries s2 = s;
  s2.coeff.setZero();
  s2.coeff(2, 1) = -0.5;
  SineSeries both = s;
  both.coeff += s2.coeff;
  EXPECT_NEAR(heat_fourier(both, 0.2, x), heat_fourier(s, 0.2, x) + heat_fourier(s2, 0.2, x), 1e-15);
}

TEST(DiscreteSupport, Cases) {
  const Grid g(1.5, 16, 1);
  EXPECT_TRUE(discrete_support(BasisCoefficients(g)).empty());
  const H1NegProjector P(g);
  const auto u0 = initial_condition(g, P, InitialKind::delta_regularized);
  const auto cells = discrete_support(u0);
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[0], 7u);
  EXPECT_EQ(cells[1], 8u);
  EXPECT_NEAR(support_extent(g, cells), g.h(), 1e-15);
  EXPECT_THROW(discrete_support(u0, 0.0), std::invalid_argument);
}

TEST(DiscreteSupport, StopsAtSignChangeOfTail) {
  const Grid g(1.5, 16, 1);
  PiecewiseConstField means(g);
  means.values << 1e-3, -3e-3, 1e-2, -4e-2, 0.1, 0.5, 1.0, 2.0, 2.0, 1.0, 0.5, 0.1, -4e-2, 1e-2, -3e-3, 1e-3;
  const auto cells = discrete_support(tilde_restriction(means));
  ASSERT_EQ(cells.size(), 8u);
  EXPECT_EQ(cells.front(), 4u);
  EXPECT_EQ(cells.back(), 11u);
  // A second positive bump not connected to the peak is left out.
  means.values[1] = 0.3;
  EXPECT_EQ(discrete_support(tilde_restriction(means)).size(), 8u);
}

// In 2D the projected delta keeps positive arms along the axes (a few percent
// of the peak), so only inclusion of the central cells and symmetry hold.
TEST(DiscreteSupport, DeltaIn2D) {
  const Grid g(1.5, 8, 2);
  const H1NegProjector P(g);
  const auto cells = discrete_support(initial_condition(g, P, InitialKind::delta_regularized));
  for (int a : {4, 5}) {
    for (int b : {4, 5}) {
      EXPECT_TRUE(std::binary_search(cells.begin(), cells.end(), g.flatten(MultiIndex{{a, b}})));
    }
  }
  for (std::size_t k : cells) {
    const MultiIndex i = g.unflatten(k);
    EXPECT_TRUE(std::binary_search(cells.begin(), cells.end(), g.flatten(MultiIndex{{9 - i[0], i[1]}})));
    EXPECT_TRUE(std::binary_search(cells.begin(), cells.end(), g.flatten(MultiIndex{{i[1], i[0]}})));
  }
}

TEST(DiscreteSupport, ProjectedBarenblattInsideRadius) {
  const auto bp = barenblatt_constants(3.0, 1);
  const double t = 0.05;
  for (int J : {32, 64, 128}) {
    const Grid g(1.5, J, 1);
    const auto c = h1neg_projection(g, assemble_mass(g), [&](const Point& x) { return barenblatt(bp, t, x); },
                                    QuadratureRule(6));
    EXPECT_LE(support_extent(g, discrete_support(c)), barenblatt_support_radius(bp, t) + 2.0 * g.h()) << "J=" << J;
  }
}
