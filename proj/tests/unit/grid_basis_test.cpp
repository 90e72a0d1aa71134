#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spme/spme.hpp"

using namespace spme;

TEST(Grid, RejectsBadParameters) {
  EXPECT_THROW(Grid(0.0, 8, 1), std::invalid_argument);
  EXPECT_THROW(Grid(1.0, 3, 1), std::invalid_argument);
  EXPECT_THROW(Grid(1.0, 8, 3), std::invalid_argument);
}

TEST(Grid, FlattenRoundTrip) {
  const Grid g(1.5, 6, 2);
  EXPECT_EQ(g.cell_count(), 36u);
  for (std::size_t f = 0; f < g.cell_count(); ++f) EXPECT_EQ(g.flatten(g.unflatten(f)), f);
  MultiIndex i;
  i[0] = 2;
  i[1] = 1;
  EXPECT_EQ(g.flatten(i), 1u);  // i_1 runs fastest
}

TEST(Grid, HalfOpenCells) {
  const Grid g(1.5, 8, 1);
  EXPECT_EQ(cell_of_coordinate(g, -1.5), 1);
  for (int k = 1; k <= 8; ++k) EXPECT_EQ(cell_of_coordinate(g, g.node(k)), k);
  EXPECT_EQ(cell_of_coordinate(g, g.node(3) + 1e-12), 4);
  EXPECT_THROW(cell_of_coordinate(g, 1.6), std::out_of_range);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int n = 0; n < 1000; ++n) {
    const double x = u(rng);
    const int k = cell_of_coordinate(g, x);
    EXPECT_GT(x, g.node(k - 1));
    EXPECT_LE(x, g.node(k));
  }
}

TEST(Grid, StencilNeighbors) {
  const Grid g2(1.0, 5, 2);
  MultiIndex corner;
  EXPECT_EQ(stencil_neighbors(g2, corner).size(), 4u);
  MultiIndex mid;
  mid[0] = 3;
  mid[1] = 3;
  EXPECT_EQ(stencil_neighbors(g2, mid).size(), 9u);
  for (std::size_t a = 0; a < g2.cell_count(); ++a) {
    for (const auto& n : stencil_neighbors(g2, g2.unflatten(a))) {
      bool back = false;
      for (const auto& m : stencil_neighbors(g2, n.index)) back = back || g2.flatten(m.index) == a;
      EXPECT_TRUE(back);
    }
  }
  const Grid g1(1.0, 5, 1);
  MultiIndex i1;
  i1[0] = 3;
  EXPECT_EQ(stencil_neighbors(g1, i1).size(), 3u);
}

TEST(Basis1D, PhiValues) {
  const Grid g(1.5, 8, 1);
  const Basis1D b(g);
  const double h = g.h();
  EXPECT_EQ(phi1d_eval(b, 4, g.node(3) + 0.5 * h), 1.0);
  EXPECT_EQ(phi1d_eval(b, 4, g.node(2) + 0.5 * h), -0.5);
  EXPECT_EQ(phi1d_eval(b, 4, g.node(4) + 0.5 * h), -0.5);
  EXPECT_EQ(phi1d_eval(b, 1, -1.5), 1.5);
  EXPECT_EQ(phi1d_eval(b, 1, g.node(1)), 1.5);
  EXPECT_EQ(phi1d_eval(b, 8, 1.5), 1.5);
  EXPECT_EQ(phi1d_eval(b, 4, 1.4), 0.0);
  EXPECT_THROW(phi1d_eval(b, 9, 0.0), std::out_of_range);
}

TEST(Basis1D, PsiValues) {
  const Grid g(1.5, 8, 1);
  const Basis1D b(g);
  const double h = g.h();
  EXPECT_NEAR(psi1d_eval(b, 4, g.node(3) + 0.5 * h), 3.0 * h * h / 8.0, 1e-15);
  EXPECT_NEAR(psi1d_eval(b, 4, g.node(2)), 0.0, 1e-15);
  // Both one-sided pieces give h^2/4 at x_{i-1}.
  EXPECT_NEAR(b.piece(4, 3)->psi(h), 0.25 * h * h, 1e-15);
  EXPECT_NEAR(b.piece(4, 4)->psi(0.0), 0.25 * h * h, 1e-15);
}

TEST(Basis1D, PsiInvertsLaplacian) {
  for (int J : {4, 8, 17}) {
    const Grid g(1.5, J, 1);
    const Basis1D b(g);
    for (int j = 1; j <= J; ++j) {
      for (int k = 1; k <= J; ++k) {
        const auto pc = b.piece(j, k);
        if (!pc) continue;
        EXPECT_EQ(-pc->psi.second_derivative(), pc->phi) << "j=" << j << " k=" << k;
      }
    }
  }
}

TEST(Basis1D, PsiIsC1AndVanishesOnBoundary) {
  const int J = 9;
  const Grid g(1.5, J, 1);
  const Basis1D b(g);
  const double h = g.h();
  const double tol = 1e-14;
  for (int j = 1; j <= J; ++j) {
    // Node k joins cell k and cell k+1; outside the support the pieces are 0.
    for (int k = 0; k <= J; ++k) {
      const auto left = k >= 1 ? b.piece(j, k) : std::nullopt;
      const auto right = k < J ? b.piece(j, k + 1) : std::nullopt;
      const double vl = left ? left->psi(h) : 0.0;
      const double dl = left ? left->psi.derivative(h) : 0.0;
      const double vr = right ? right->psi(0.0) : 0.0;
      const double dr = right ? right->psi.derivative(0.0) : 0.0;
      if (k == 0) {
        EXPECT_NEAR(vr, 0.0, tol);
      } else if (k == J) {
        EXPECT_NEAR(vl, 0.0, tol);
      } else {
        EXPECT_NEAR(vl, vr, tol) << "j=" << j << " node " << k;
        EXPECT_NEAR(dl, dr, tol) << "j=" << j << " node " << k;
      }
    }
  }
}

TEST(Basis1D, NeighborPsiSumIsThreeQuarters) {
  const int J = 10;
  const Grid g(1.5, J, 1);
  const Basis1D b(g);
  const double h = g.h();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 2; i < J; ++i) {
    for (int n = 0; n < 20; ++n) {
      const double x = g.node(i - 1) + h * (1.0 - u(rng));
      const double s = psi1d_eval(b, i - 1, x) + psi1d_eval(b, i, x) + psi1d_eval(b, i + 1, x);
      EXPECT_NEAR(1.5 / (h * h) * s, 0.75, 1e-13);
    }
  }
}

TEST(TensorBasis, CellCenterValues) {
  const Grid g(1.5, 8, 2);
  const double h = g.h();
  MultiIndex i;
  i[0] = 4;
  i[1] = 5;
  const Point c{g.node(3) + 0.5 * h, g.node(4) + 0.5 * h};
  EXPECT_NEAR(phi_nd_eval(g, i, c), 9.0 / 8.0, 1e-14);
  EXPECT_NEAR(psi_nd_eval(g, i, c), 27.0 * h * h / 128.0, 1e-15);
  EXPECT_EQ(phi_nd_eval(g, i, Point{1.4, 1.4}), 0.0);
  EXPECT_NEAR(psi_nd_eval(g, i, Point{-1.5, 0.1}), 0.0, 1e-15);
}

TEST(TensorBasis, CellMeansMatchStencil) {
  const Grid g(1.5, 8, 2);
  MultiIndex i;
  i[0] = 4;
  i[1] = 4;
  BasisCoefficients c(g);
  c.values[static_cast<Eigen::Index>(g.flatten(i))] = 1.0;
  const auto means = cell_average(c, QuadratureRule(3));
  double total = 0.0;
  for (std::size_t k = 0; k < g.cell_count(); ++k) {
    const MultiIndex j = g.unflatten(k);
    const int dist = std::max(std::abs(j[0] - i[0]), std::abs(j[1] - i[1]));
    const double expected = dist == 0 ? 1.0 : (dist == 1 ? -0.125 : 0.0);
    EXPECT_NEAR(means.values[static_cast<Eigen::Index>(k)], expected, 1e-13);
    total += means.values[static_cast<Eigen::Index>(k)];
  }
  EXPECT_NEAR(total, 0.0, 1e-13);
}

TEST(TensorBasis, PsiInvertsLaplacianByFiniteDifferences) {
  const Grid g(1.5, 8, 2);
  const double h = g.h();
  MultiIndex i;
  i[0] = 4;
  i[1] = 5;
  const double e = 1e-3 * h;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (int n = 0; n < 50; ++n) {
    // A point strictly inside one cell of the support.
    const int c1 = 3 + n % 3;
    const int c2 = 4 + (n / 3) % 3;
    const Point x{g.node(c1 - 1) + u(rng) * h, g.node(c2 - 1) + u(rng) * h};
    auto f = [&](double a, double b) { return psi_nd_eval(g, i, Point{a, b}); };
    const double lap = (f(x[0] + e, x[1]) + f(x[0] - e, x[1]) + f(x[0], x[1] + e) + f(x[0], x[1] - e) -
                        4.0 * f(x[0], x[1])) / (e * e);
    EXPECT_NEAR(-lap, phi_nd_eval(g, i, x), 1e-5);
  }
}

TEST(EvalField, Locality) {
  const Grid g(1.5, 8, 1);
  BasisCoefficients c(g);
  EXPECT_EQ(eval_field(c, Point{0.3, 0.0}), 0.0);
  c.values[1] = 1.0;
  EXPECT_EQ(eval_field(c, Point{1.2, 0.0}), 0.0);
  c.values.setOnes();
  for (int k = 3; k <= 6; ++k) {
    EXPECT_NEAR(eval_field(c, Point{g.node(k - 1) + 0.5 * g.h(), 0.0}), 0.0, 1e-15);
  }
}
