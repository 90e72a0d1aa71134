#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spme/basis.hpp"
#include "spme/grid.hpp"
#include "spme/noise.hpp"
#include "spme/quadrature.hpp"
#include "spme/stepper.hpp"

namespace spme {

/// Reference solution u(t, x).
using SpaceTimeFunction = std::function<double(double, const Point&)>;

/// Source-type solution t^{-a} max{0, C - k|x|^2 t^{-2b}}^{1/(p-2)}.
struct BarenblattParams {
  double p = 3.0;
  int d = 1;
  double a = 0.0;
  double b = 0.0;
  double k = 0.0;
  double C = 0.0;

  /// sqrt(C/k): the support radius at t = 1.
  double radius_coefficient() const { return std::sqrt(C / k); }
};

namespace detail {

/// int_{|y| < R} (C - k|y|^2)^m dy with R = sqrt(C/k), through r = R sin(theta).
inline double barenblatt_mass(double C, double k, double m, int d) {
  const double R = std::sqrt(C / k);
  const QuadratureRule rule(32);
  const double half_pi = std::numbers::pi / 2.0;
  const int pieces = 8;
  double sum = 0.0;
  for (int piece = 0; piece < pieces; ++piece) {
    for (int q = 0; q < rule.order(); ++q) {
      const double theta = half_pi * (piece + rule.nodes()[static_cast<std::size_t>(q)]) / pieces;
      const double c = std::cos(theta);
      const double r = R * std::sin(theta);
      const double integrand = std::pow(C * c * c, m) * std::pow(r, d - 1) * R * c;
      sum += rule.weights()[static_cast<std::size_t>(q)] * half_pi / pieces * integrand;
    }
  }
  // Surface measure of the unit sphere: 2 points in 1D, circumference 2 pi in 2D.
  return (d == 1 ? 2.0 : 2.0 * std::numbers::pi) * sum;
}

}  // namespace detail

inline BarenblattParams barenblatt_constants(double p, int d, double mass = 1.0) {
  if (!(p > 2.0)) throw std::invalid_argument("barenblatt_constants: need p > 2");
  if (d != 1 && d != 2) throw std::invalid_argument("barenblatt_constants: d must be 1 or 2");
  if (!(mass > 0.0)) throw std::invalid_argument("barenblatt_constants: mass must be positive");
  BarenblattParams bp;
  bp.p = p;
  bp.d = d;
  bp.a = d / (d * (p - 2.0) + 2.0);
  bp.b = bp.a / d;
  bp.k = bp.a * (p - 2.0) / (2.0 * d * (p - 1.0));
  // mass(C) = C^{m + d/2} mass(1) for m = 1/(p-2).
  const double m = 1.0 / (p - 2.0);
  const double unit = detail::barenblatt_mass(1.0, bp.k, m, d);
  bp.C = std::pow(mass / unit, 1.0 / (m + 0.5 * d));
  return bp;
}

inline double squared_norm(const Point& x, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += x[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k)];
  return s;
}

inline double barenblatt(const BarenblattParams& bp, double t, const Point& x) {
  if (!(t > 0.0)) throw std::invalid_argument("barenblatt: need t > 0");
  const double bracket = bp.C - bp.k * squared_norm(x, bp.d) * std::pow(t, -2.0 * bp.b);
  if (bracket <= 0.0) return 0.0;
  const double m = 1.0 / (bp.p - 2.0);
  return std::pow(t, -bp.a) * (m == 1.0 ? bracket : std::pow(bracket, m));
}

/// Radius of supp u_B(t, .).
inline double barenblatt_support_radius(const BarenblattParams& bp, double t) {
  return bp.radius_coefficient() * std::pow(t, bp.b);
}

/// Exact solution for alpha(u) = u|u|, sigma(u) = u in 1D along one sampled path:
///   u(t) = u_B(theta(t), x) exp(W(t) - t/2),  theta(t) = int_0^t exp(W(s) - s/2) ds.
/// theta uses the trapezoidal rule on the path's time grid. Between grid
/// times W is interpolated linearly.
class StochasticBarenblatt {
 public:
  StochasticBarenblatt(const BarenblattParams& bp, const IncrementTable& path) : bp_(bp) {
    if (bp.p != 3.0 || bp.d != 1) {
      throw std::invalid_argument("stochastic_exact: only p = 3, d = 1 is supported");
    }
    N_ = path.steps();
    tau_ = path.tau();
    W_.assign(static_cast<std::size_t>(N_) + 1, 0.0);
    theta_.assign(static_cast<std::size_t>(N_) + 1, 0.0);
    for (int n = 1; n <= N_; ++n) {
      const auto nn = static_cast<std::size_t>(n);
      W_[nn] = path.cumulative(n);
      theta_[nn] = theta_[nn - 1] + 0.5 * tau_ * (integrand(n - 1, W_[nn - 1]) + integrand(n, W_[nn]));
    }
  }

  double W(int n) const { return W_.at(static_cast<std::size_t>(n)); }
  double theta(int n) const { return theta_.at(static_cast<std::size_t>(n)); }
  /// exp(W(t_n) - t_n/2).
  double factor(int n) const { return integrand(n, W(n)); }

  /// (theta(t), exp(W(t) - t/2)) for t in [0, T].
  std::pair<double, double> transform(double t) const {
    if (t < 0.0 || t > N_ * tau_ * (1.0 + 1e-12)) throw std::out_of_range("stochastic_exact: t outside [0, T]");
    const double r = t / tau_;
    const long near = std::lround(r);
    if (std::abs(r - static_cast<double>(near)) <= 1e-9) {
      const int n = static_cast<int>(std::clamp(near, 0L, static_cast<long>(N_)));
      return {theta(n), factor(n)};
    }
    const int n = std::clamp(static_cast<int>(std::ceil(r)), 1, N_);
    const double t0 = (n - 1) * tau_;
    const double lambda = (t - t0) / tau_;
    const double w = (1.0 - lambda) * W(n - 1) + lambda * W(n);
    const double e = std::exp(w - 0.5 * t);
    return {theta(n - 1) + 0.5 * (t - t0) * (factor(n - 1) + e), e};
  }

  double operator()(double t, const Point& x) const {
    if (!(t > 0.0)) throw std::invalid_argument("stochastic_exact: need t > 0");
    const auto [th, f] = transform(t);
    return barenblatt(bp_, th, x) * f;
  }

  /// sqrt(C/k) theta(t)^{1/3}.
  double support_radius(double t) const { return barenblatt_support_radius(bp_, transform(t).first); }

 private:
  double integrand(int n, double w) const { return std::exp(w - 0.5 * n * tau_); }

  BarenblattParams bp_;
  int N_ = 0;
  double tau_ = 0.0;
  std::vector<double> W_;
  std::vector<double> theta_;
};

inline double stochastic_exact(const BarenblattParams& bp, double t, const Point& x, const IncrementTable& path) {
  return StochasticBarenblatt(bp, path)(t, x);
}

/// int_D |v(x) - u_h(x)|^p dx by cellwise quadrature (no 1/p root).
inline double lp_distance_pow(const BasisCoefficients& c, const SpaceFunction& v, double p,
                              const QuadratureRule& rule = QuadratureRule(4),
                              const Breaklines& breaks = Breaklines::none()) {
  const Grid& g = c.grid;
  std::array<double, LocalCellBasis::kSlots> phi{};
  std::array<double, LocalCellBasis::kSlots> psi{};
  double sum = 0.0;
  for (std::size_t k = 0; k < g.cell_count(); ++k) {
    const MultiIndex cell = g.unflatten(k);
    const LocalCellBasis local(g, cell);
    for_each_cell_point(g, cell, rule, breaks, [&](const Point& s, double w) {
      local.evaluate(s, phi, psi);
      double u = 0.0;
      for (int a = 0; a < LocalCellBasis::kSlots; ++a) {
        if (local.valid(a)) u += c.values[static_cast<Eigen::Index>(local.flat(a))] * phi[static_cast<std::size_t>(a)];
      }
      const double diff = std::abs((v ? v(global_point(g, cell, s)) : 0.0) - u);
      sum += w * (p == 1.0 ? diff : std::pow(diff, p));
    });
  }
  return sum;
}

/// ||v - u_h||_{L^p(D)}.
inline double lp_distance(const BasisCoefficients& c, const SpaceFunction& v, double p,
                          const QuadratureRule& rule = QuadratureRule(4),
                          const Breaklines& breaks = Breaklines::none()) {
  return std::pow(lp_distance_pow(c, v, p, rule, breaks), 1.0 / p);
}

/// Quadrature for the space-time error norm.
///
/// Space: a Gauss rule per cell. Time: per step interval, either a Gauss rule
/// or the right endpoint t_n (where ubar_tau = u^n). Window: either clip step
/// intervals to [t_lo, T], or keep only whole steps with t_{n-1} >= t_lo.
/// The convergence tables use cell midpoints, whole steps, and the interval
/// midpoint (deterministic) or t_n (stochastic).
struct ErrorQuadrature {
  enum class Window { clipped, whole_steps };

  QuadratureRule space = QuadratureRule(1);
  /// nullopt: sample the reference at t_n only.
  std::optional<QuadratureRule> time = QuadratureRule(1);
  Window window = Window::whole_steps;

  static ErrorQuadrature deterministic_table() { return {}; }
  static ErrorQuadrature stochastic_table() { return {QuadratureRule(1), std::nullopt, Window::whole_steps}; }
  /// Clipped window with Gauss rules of the given orders in space and time.
  static ErrorQuadrature gauss(int space_order, int time_order) {
    return {QuadratureRule(space_order), QuadratureRule(time_order), Window::clipped};
  }
};

/// Accumulates ||u - ubar_tau||_{L^p((t_lo,T) x D)} one step at a time;
/// ubar_tau = u^n on (t_{n-1}, t_n]. Usable as a run_path observer.
class SpacetimeErrorAccumulator {
 public:
  SpacetimeErrorAccumulator(const Grid& g, SpaceTimeFunction exact, double p, double t_lo, double T, double tau,
                            ErrorQuadrature rule = ErrorQuadrature::deterministic_table())
      : g_(g), exact_(std::move(exact)), p_(p), t_lo_(t_lo), T_(T), tau_(tau), rule_(std::move(rule)) {
    if (!(t_lo < T)) throw std::invalid_argument("lp_spacetime_error: need t_lo < T");
  }

  void add(int n, double t_n, const Eigen::VectorXd& u) {
    if (n == 0) return;
    const double start = t_n - tau_;
    const double slack = 1e-9 * tau_;
    double lo = std::max(start, t_lo_);
    double hi = std::min(t_n, T_);
    if (rule_.window == ErrorQuadrature::Window::whole_steps) {
      if (start < t_lo_ - slack || t_n > T_ + slack) return;
      lo = start;
      hi = t_n;
    }
    if (hi - lo <= 0.0) return;
    const BasisCoefficients c(g_, u);
    const auto at = [&](double t) {
      return lp_distance_pow(c, [&](const Point& x) { return exact_(t, x); }, p_, rule_.space);
    };
    if (!rule_.time) {
      sum_ += (hi - lo) * at(t_n);
      return;
    }
    const QuadratureRule& qt = *rule_.time;
    for (int k = 0; k < qt.order(); ++k) {
      const auto kk = static_cast<std::size_t>(k);
      sum_ += (hi - lo) * qt.weights()[kk] * at(lo + (hi - lo) * qt.nodes()[kk]);
    }
  }

  double value() const { return std::pow(sum_, 1.0 / p_); }

  StepObserver observer() {
    return [this](int n, double t, const Eigen::VectorXd& u) { add(n, t, u); };
  }

 private:
  Grid g_;
  SpaceTimeFunction exact_;
  double p_;
  double t_lo_;
  double T_;
  double tau_;
  ErrorQuadrature rule_;
  double sum_ = 0.0;
};

inline double lp_spacetime_error(const Trajectory& traj, const SpaceTimeFunction& exact, double p, double t_lo,
                                 double T, const ErrorQuadrature& rule = ErrorQuadrature::deterministic_table()) {
  if (traj.states().size() != static_cast<std::size_t>(traj.steps()) + 1) {
    throw std::invalid_argument("lp_spacetime_error: trajectory has no stored states");
  }
  SpacetimeErrorAccumulator acc(traj.grid(), exact, p, t_lo, T, traj.tau(), rule);
  for (int n = 1; n <= traj.steps(); ++n) acc.add(n, traj.time(n), traj.states()[static_cast<std::size_t>(n)]);
  return acc.value();
}

/// Flat indices (sorted) of the discrete support: the face-connected set of
/// cells with mean u_h > eps that contains the cell of largest mean.
///
/// Outside the front the scheme leaves a tail whose cell means alternate in
/// sign and decay by about 2 + sqrt(3) per cell, so a plain |u_h| > eps test
/// reaches ~log(peak/eps)/log(3.7) cells past the front. The first
/// non-positive cell ends the connected component instead.
inline std::vector<std::size_t> discrete_support(const BasisCoefficients& c, double eps = 1e-8,
                                                 const QuadratureRule& rule = QuadratureRule(3)) {
  if (!(eps > 0.0)) throw std::invalid_argument("discrete_support: eps must be positive");
  const Grid& g = c.grid;
  std::array<double, LocalCellBasis::kSlots> phi{};
  std::array<double, LocalCellBasis::kSlots> psi{};
  std::vector<double> mean(g.cell_count(), 0.0);
  for (std::size_t k = 0; k < g.cell_count(); ++k) {
    const MultiIndex cell = g.unflatten(k);
    const LocalCellBasis local(g, cell);
    double sum = 0.0;
    for_each_cell_point(g, cell, rule, Breaklines::none(), [&](const Point& s, double w) {
      local.evaluate(s, phi, psi);
      double u = 0.0;
      for (int a = 0; a < LocalCellBasis::kSlots; ++a) {
        if (local.valid(a)) u += c.values[static_cast<Eigen::Index>(local.flat(a))] * phi[static_cast<std::size_t>(a)];
      }
      sum += w * u;
    });
    mean[k] = sum / g.cell_volume();
  }
  const auto top = static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
  std::vector<std::size_t> out;
  if (!(mean[top] > eps)) return out;
  std::vector<char> seen(g.cell_count(), 0);
  std::vector<std::size_t> stack{top};
  seen[top] = 1;
  while (!stack.empty()) {
    const std::size_t k = stack.back();
    stack.pop_back();
    out.push_back(k);
    for (int dir = 0; dir < g.dim(); ++dir) {
      for (int step : {-1, 1}) {
        MultiIndex j = g.unflatten(k);
        j[dir] += step;
        if (!g.contains(j)) continue;
        const std::size_t f = g.flatten(j);
        if (seen[f] || !(mean[f] > eps)) continue;
        seen[f] = 1;
        stack.push_back(f);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Largest distance from the origin of any point of the given cells; 0 if empty.
inline double support_extent(const Grid& g, const std::vector<std::size_t>& cells) {
  double r2 = 0.0;
  for (std::size_t k : cells) {
    const MultiIndex i = g.unflatten(k);
    double s = 0.0;
    for (int dir = 0; dir < g.dim(); ++dir) {
      const double far = std::max(std::abs(g.node(i[dir] - 1)), std::abs(g.node(i[dir])));
      s += far * far;
    }
    r2 = std::max(r2, s);
  }
  return std::sqrt(r2);
}

/// Coefficients a_k of u0 = sum a_k e_k with the Dirichlet eigenfunctions
/// e_k(x) = prod_j sin(k_j pi (x_j + L) / (2L)) of (-L, L)^d. Entry (k1-1, k2-1);
/// a single column for d = 1.
struct SineSeries {
  int d = 1;
  double L = 1.0;
  Eigen::MatrixXd coeff;

  double eigenvalue(int k1, int k2) const {
    const double w = std::numbers::pi / (2.0 * L);
    const double l1 = (k1 * w) * (k1 * w);
    return d == 1 ? l1 : l1 + (k2 * w) * (k2 * w);
  }

  double mode(int k1, int k2, const Point& x) const {
    const double w = std::numbers::pi / (2.0 * L);
    const double e1 = std::sin(k1 * w * (x[0] + L));
    return d == 1 ? e1 : e1 * std::sin(k2 * w * (x[1] + L));
  }
};

/// Dirichlet heat semigroup applied to a truncated sine series.
inline double heat_fourier(const SineSeries& u0, double t, const Point& x) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < u0.coeff.rows(); ++i) {
    for (Eigen::Index j = 0; j < u0.coeff.cols(); ++j) {
      const double a = u0.coeff(i, j);
      if (a == 0.0) continue;
      const int k1 = static_cast<int>(i) + 1;
      const int k2 = static_cast<int>(j) + 1;
      sum += a * std::exp(-u0.eigenvalue(k1, k2) * t) * u0.mode(k1, k2, x);
    }
  }
  return sum;
}

}  // namespace spme
