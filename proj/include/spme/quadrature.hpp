#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "spme/grid.hpp"

namespace spme {

/// Gauss-Legendre rule with q points on [0, 1]; exact for degree <= 2q - 1.
class QuadratureRule {
 public:
  explicit QuadratureRule(int q = 3) : q_(q) {
    if (q < 1 || q > 64) throw std::invalid_argument("QuadratureRule: order must lie in 1..64");
    nodes_.resize(static_cast<std::size_t>(q));
    weights_.resize(static_cast<std::size_t>(q));
    for (int i = 0; i < q; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
      auto [p, dp] = legendre(q, x);
      for (int it = 0; it < 100; ++it) {
        const double dx = p / dp;
        x -= dx;
        std::tie(p, dp) = legendre(q, x);
        if (std::abs(dx) < 1e-16) break;
      }
      const auto ui = static_cast<std::size_t>(q - 1 - i);
      nodes_[ui] = 0.5 * (x + 1.0);
      weights_[ui] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
  }

  int order() const { return q_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  int q_;
  std::vector<double> nodes_;
  std::vector<double> weights_;

  /// P_q(x) and P_q'(x) by the three-term recurrence.
  static std::pair<double, double> legendre(int q, double x) {
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= q; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    return {p1, q * (x * p1 - p0) / (x * x - 1.0)};
  }
};

/// Extra per-direction breakpoints (global coordinates) at which cells are
/// split before applying the rule, e.g. jump lines of an indicator function.
struct Breaklines {
  std::array<std::vector<double>, kMaxDim> coords;

  static Breaklines none() { return {}; }
  static Breaklines same_in_all_directions(std::vector<double> c) {
    Breaklines b;
    for (auto& v : b.coords) v = c;
    return b;
  }
};

namespace detail {

/// Sub-interval endpoints of [a, b] after splitting at interior breakpoints.
inline std::vector<double> split_interval(double a, double b, const std::vector<double>& breaks) {
  std::vector<double> pts{a};
  for (double x : breaks) {
    if (x > a && x < b) pts.push_back(x);
  }
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  return pts;
}

}  // namespace detail

/// Calls f(s, w) at every quadrature point of `cell`, where s is the
/// cell-local coordinate and w the physical weight.
template <class F>
void for_each_cell_point(const Grid& g, const MultiIndex& cell, const QuadratureRule& rule,
                         const Breaklines& breaks, F&& f) {
  const int d = g.dim();
  std::array<std::vector<double>, kMaxDim> pts;
  std::array<std::vector<double>, kMaxDim> wts;
  for (int k = 0; k < d; ++k) {
    const double a = g.node(cell[k] - 1);
    const double b = g.node(cell[k]);
    const auto sub = detail::split_interval(a, b, breaks.coords[static_cast<std::size_t>(k)]);
    auto& pk = pts[static_cast<std::size_t>(k)];
    auto& wk = wts[static_cast<std::size_t>(k)];
    for (std::size_t m = 0; m + 1 < sub.size(); ++m) {
      const double len = sub[m + 1] - sub[m];
      for (int q = 0; q < rule.order(); ++q) {
        pk.push_back(sub[m] - a + len * rule.nodes()[static_cast<std::size_t>(q)]);
        wk.push_back(len * rule.weights()[static_cast<std::size_t>(q)]);
      }
    }
  }
  if (d == 1) {
    for (std::size_t q = 0; q < pts[0].size(); ++q) f(Point{pts[0][q], 0.0}, wts[0][q]);
    return;
  }
  for (std::size_t q2 = 0; q2 < pts[1].size(); ++q2) {
    for (std::size_t q1 = 0; q1 < pts[0].size(); ++q1) {
      f(Point{pts[0][q1], pts[1][q2]}, wts[0][q1] * wts[1][q2]);
    }
  }
}

/// Global point of cell-local coordinates s.
inline Point global_point(const Grid& g, const MultiIndex& cell, const Point& s) {
  Point x{0.0, 0.0};
  for (int k = 0; k < g.dim(); ++k) {
    x[static_cast<std::size_t>(k)] = g.node(cell[k] - 1) + s[static_cast<std::size_t>(k)];
  }
  return x;
}

/// Integral of f over D, accumulated cell by cell.
template <class F>
double integrate_domain(const Grid& g, const QuadratureRule& rule, const Breaklines& breaks, F&& f) {
  double total = 0.0;
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const MultiIndex cell = g.unflatten(c);
    double cell_sum = 0.0;
    for_each_cell_point(g, cell, rule, breaks, [&](const Point& s, double w) {
      cell_sum += w * f(global_point(g, cell, s));
    });
    total += cell_sum;
  }
  return total;
}

}  // namespace spme
