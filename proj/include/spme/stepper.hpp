#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spme/assembly.hpp"
#include "spme/basis.hpp"
#include "spme/grid.hpp"
#include "spme/noise.hpp"
#include "spme/quadrature.hpp"
#include "spme/sparse.hpp"
#include "spme/transfer.hpp"

namespace spme {

/// Forcing f(t, x); an empty function means f = 0.
using Forcing = std::function<double(double, const Point&)>;

struct SchemeConfig {
  double T = 0.1;
  int N = 128;
  /// Exponent of alpha(u) = |u|^{p-2} u.
  double p = 3.0;
  Forcing forcing;
  NoiseModel noise;
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  int quad_order = 3;
  /// Declared lambda_B of the noise; defaults to 0 (none) and 2 (linear and spacetime).
  std::optional<double> lambda_B;

  double tau() const { return T / N; }

  double effective_lambda_B() const {
    if (lambda_B) return *lambda_B;
    return noise.kind == NoiseKind::none ? 0.0 : 2.0;
  }

  /// Largest step size allowed by the a priori stability bound.
  double max_tau() const { return 1.0 / (2.0 * (1.0 + effective_lambda_B())); }

  void validate() const {
    if (!(T > 0.0)) throw std::invalid_argument("SchemeConfig: T must be positive");
    if (N < 1) throw std::invalid_argument("SchemeConfig: N must be at least 1");
    if (!(p > 1.0)) throw std::invalid_argument("SchemeConfig: p must exceed 1");
    if (newton_max_iter < 1) throw std::invalid_argument("SchemeConfig: newton_max_iter must be positive");
    if (!(newton_tol > 0.0)) throw std::invalid_argument("SchemeConfig: newton_tol must be positive");
    if (tau() > max_tau()) {
      throw std::invalid_argument("SchemeConfig: tau = " + std::to_string(tau()) +
                                  " exceeds 1/(2(1+lambda_B)) = " + std::to_string(max_tau()));
    }
  }
};

/// Regularized Dirac mass: (2h)^{-d} on the 2^d central cells, 0 elsewhere.
inline PiecewiseConstField regularized_delta(const Grid& g) {
  const int J = g.cells_per_dim();
  if (J % 2 != 0) throw std::invalid_argument("regularized_delta: J must be even");
  PiecewiseConstField f(g);
  const double value = std::pow(2.0 * g.h(), -g.dim());
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const MultiIndex i = g.unflatten(c);
    bool central = true;
    for (int k = 0; k < g.dim(); ++k) central = central && (i[k] == J / 2 || i[k] == J / 2 + 1);
    if (central) f.values[static_cast<Eigen::Index>(c)] = value;
  }
  return f;
}

/// Pointwise view of a piecewise-constant field.
inline SpaceFunction as_function(const PiecewiseConstField& f) {
  return [f](const Point& x) {
    return f.values[static_cast<Eigen::Index>(f.grid.flatten(cell_of_point(f.grid, x)))];
  };
}

enum class InitialKind { delta_regularized, function };

/// u_{h,0} = P_h u0 for the regularized delta or a given function.
inline BasisCoefficients initial_condition(const Grid& g, const H1NegProjector& projector,
                                           InitialKind kind, const SpaceFunction& u0 = {},
                                           const QuadratureRule& rule = QuadratureRule(4),
                                           const Breaklines& breaks = Breaklines::none()) {
  if (kind == InitialKind::delta_regularized) {
    // Piecewise constant per cell: the cell-interior rule is exact.
    return projector(as_function(regularized_delta(g)), QuadratureRule(3));
  }
  if (!u0) throw std::invalid_argument("initial_condition: function kind needs u0");
  return projector(u0, rule, breaks);
}

/// Immutable per-grid data shared by every trajectory of one configuration.
class SchemeContext {
 public:
  SchemeContext(const Grid& g, const SchemeConfig& cfg)
      : g_(g),
        cfg_(cfg),
        projector_(g),
        op_(g, cfg.p, QuadratureRule(cfg.quad_order)),
        noise_(cfg.noise, g, &projector_.mass(), QuadratureRule(cfg.quad_order)) {
    cfg.validate();
    mass_scale_ = projector_.mass().storage().diagonal().cwiseAbs().maxCoeff();
  }

  const Grid& grid() const { return g_; }
  const SchemeConfig& config() const { return cfg_; }
  const SparseSymMatrix& mass() const { return projector_.mass(); }
  const H1NegProjector& projector() const { return projector_; }
  const NonlinearOperator& nonlinear() const { return op_; }
  const NoiseLoad& noise() const { return noise_; }
  double mass_scale() const { return mass_scale_; }

  /// tau * (f(t_n), bold psi_i), or zero without forcing.
  Eigen::VectorXd forcing_load(double t) const {
    if (!cfg_.forcing) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g_.cell_count()));
    const auto& f = cfg_.forcing;
    return cfg_.tau() * psi_load(g_, [&](const Point& x) { return f(t, x); }, QuadratureRule(cfg_.quad_order));
  }

 private:
  Grid g_;
  SchemeConfig cfg_;
  H1NegProjector projector_;
  NonlinearOperator op_;
  NoiseLoad noise_;
  double mass_scale_ = 1.0;
};

struct StepStats {
  int iterations = 0;
  double residual = 0.0;
  bool picard_start = false;
};

/// Newton solver for one implicit step
///   M u + tau K(u) = M u_prev + b + s.
/// Holds a Jacobian workspace, so each concurrent trajectory needs its own.
class Stepper {
 public:
  explicit Stepper(std::shared_ptr<const SchemeContext> ctx) : ctx_(std::move(ctx)) {
    jac_ = ctx_->mass();
    solver_.analyze(jac_);
  }

  const SchemeContext& context() const { return *ctx_; }

  /// Euclidean residual norm divided by the largest mass-matrix diagonal.
  double residual_norm(const Eigen::VectorXd& F) const { return F.norm() / ctx_->mass_scale(); }

  Eigen::VectorXd residual(const Eigen::VectorXd& u, const Eigen::VectorXd& rhs) const {
    return ctx_->mass() * u + ctx_->config().tau() * ctx_->nonlinear().apply(u) - rhs;
  }

  Eigen::VectorXd step(const Eigen::VectorXd& prev, const Eigen::VectorXd& b_vec, const Eigen::VectorXd& s_vec,
                       StepStats* stats = nullptr, const Eigen::VectorXd* guess = nullptr) {
    const auto& cfg = ctx_->config();
    const double tau = cfg.tau();
    const SparseSymMatrix& M = ctx_->mass();
    const Eigen::VectorXd rhs = M * prev + b_vec + s_vec;

    Eigen::VectorXd u = guess ? *guess : prev;
    Eigen::VectorXd F = residual(u, rhs);
    double r = residual_norm(F);
    StepStats st;

    // J_K(0) = 0 for p > 2: start from the linear (Picard) solve with M.
    if (r > cfg.newton_tol && cfg.p > 2.0 && u.cwiseAbs().maxCoeff() == 0.0) {
      solver_.factorize(M);
      u = solver_.solve(rhs - tau * ctx_->nonlinear().apply(u), 1e-9);
      F = residual(u, rhs);
      r = residual_norm(F);
      st.picard_start = true;
    }

    int it = 0;
    while (r > cfg.newton_tol) {
      if (it >= cfg.newton_max_iter) {
        throw SolverError("Newton: no convergence after " + std::to_string(it) + " iterations", r);
      }
      ++it;
      jac_.storage() = M.storage();
      ctx_->nonlinear().add_jacobian(u, tau, jac_);
      solver_.factorize(jac_);
      const Eigen::VectorXd delta = solver_.solve(-F, 1e-8);
      // Large coefficients (a concentrated state) can put newton_tol below
      // the round-off level of the residual; an update at relative round-off
      // level then ends the iteration.
      if (delta.norm() <= kUpdateTol * std::max(1.0, u.norm())) {
        u += delta;
        r = residual_norm(residual(u, rhs));
        break;
      }
      // Armijo backtracking on the residual norm.
      double lambda = 1.0;
      Eigen::VectorXd trial;
      Eigen::VectorXd Ft;
      double rt = 0.0;
      for (int k = 0; k < 30; ++k) {
        trial = u + lambda * delta;
        Ft = residual(trial, rhs);
        rt = residual_norm(Ft);
        if (rt <= (1.0 - 1e-4 * lambda) * r) break;
        lambda *= 0.5;
      }
      if (!(rt < r)) throw SolverError("Newton: line search stalled", r);
      u = std::move(trial);
      F = std::move(Ft);
      r = rt;
    }
    st.iterations = it;
    st.residual = r;
    if (stats) *stats = st;
    return u;
  }

 private:
  static constexpr double kUpdateTol = 1e-11;

  std::shared_ptr<const SchemeContext> ctx_;
  SparseSymMatrix jac_;
  SymmetricSolver solver_;
};

/// Coefficient vectors u^0..u^N of one sample path.
class Trajectory {
 public:
  Trajectory(const Grid& g, double T, int N, std::uint64_t seed) : grid_(g), T_(T), N_(N), seed_(seed) {}

  const Grid& grid() const { return grid_; }
  int steps() const { return N_; }
  double final_time() const { return T_; }
  double tau() const { return T_ / N_; }
  double time(int n) const { return n == N_ ? T_ : n * tau(); }
  std::uint64_t seed() const { return seed_; }

  std::vector<Eigen::VectorXd>& states() { return states_; }
  const std::vector<Eigen::VectorXd>& states() const { return states_; }
  BasisCoefficients state(int n) const { return BasisCoefficients(grid_, states_.at(static_cast<std::size_t>(n))); }

  /// Step index n with t in (t_{n-1}, t_n]; t = 0 maps to step 1.
  int right_index(double t) const {
    if (t < 0.0 || t > T_ * (1.0 + 1e-14)) throw std::out_of_range("Trajectory: time outside [0, T]");
    if (t <= 0.0) return 1;
    int n = static_cast<int>(std::ceil(t / tau()));
    n = std::clamp(n, 1, N_);
    while (n > 1 && t <= time(n - 1)) --n;
    while (n < N_ && t > time(n)) ++n;
    return n;
  }

  /// Right-continuous piecewise-constant interpolant: u^n on (t_{n-1}, t_n], u^1 at 0.
  BasisCoefficients right_constant(double t) const { return state(right_index(t)); }

  /// Shifted interpolant: 0 on [0, tau), u^{n-1} on [t_{n-1}, t_n), u^N at T.
  BasisCoefficients left_constant(double t) const {
    if (t < 0.0 || t > T_ * (1.0 + 1e-14)) throw std::out_of_range("Trajectory: time outside [0, T]");
    if (t >= T_) return state(N_);
    int n = static_cast<int>(std::floor(t / tau())) + 1;
    n = std::clamp(n, 1, N_);
    while (n > 1 && t < time(n - 1)) --n;
    while (n < N_ && t >= time(n)) ++n;
    if (n == 1) return BasisCoefficients(grid_);
    return state(n - 1);
  }

  /// CSV rows "n,t,c_1,...,c_{J^d}".
  void write_csv(std::ostream& os) const {
    os << "n,t";
    for (std::size_t i = 1; i <= grid_.cell_count(); ++i) os << ",c_" << i;
    os << '\n';
    os.precision(10);
    for (std::size_t n = 0; n < states_.size(); ++n) {
      os << n << ',' << time(static_cast<int>(n));
      for (Eigen::Index i = 0; i < states_[n].size(); ++i) os << ',' << states_[n][i];
      os << '\n';
    }
  }

 private:
  Grid grid_;
  double T_;
  int N_;
  std::uint64_t seed_;
  std::vector<Eigen::VectorXd> states_;
};

/// Called after every step with (n, t_n, u^n, increments table).
using StepObserver = std::function<void(int, double, const Eigen::VectorXd&)>;

struct PathOptions {
  InitialKind initial = InitialKind::delta_regularized;
  SpaceFunction u0;
  bool store_states = true;
  StepObserver observer;
};

/// One full sample path from the initial condition through N steps.
/// Increments come from brownian_increments(N, tau, r, seed); step 1 has none.
inline Trajectory run_path(const std::shared_ptr<const SchemeContext>& ctx, std::uint64_t seed,
                           const PathOptions& opts = {}, const IncrementTable* table = nullptr) {
  const SchemeConfig& cfg = ctx->config();
  const Grid& g = ctx->grid();
  Trajectory traj(g, cfg.T, cfg.N, seed);
  std::optional<IncrementTable> own;
  if (!table && cfg.noise.kind != NoiseKind::none) {
    own.emplace(cfg.N, cfg.tau(), cfg.noise.modes(g), seed);
    table = &*own;
  }
  Stepper stepper(ctx);
  Eigen::VectorXd u = initial_condition(g, ctx->projector(), opts.initial, opts.u0).values;
  if (opts.store_states) traj.states().push_back(u);
  if (opts.observer) opts.observer(0, 0.0, u);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(u.size());
  for (int n = 1; n <= cfg.N; ++n) {
    const double t = traj.time(n);
    const Eigen::VectorXd b = ctx->forcing_load(t);
    const Eigen::VectorXd s = table ? ctx->noise()(u, table->row(n)) : zero;
    try {
      u = stepper.step(u, b, s);
    } catch (const SolverError& e) {
      throw SolverError("step " + std::to_string(n) + ": " + e.message(), e.residual());
    }
    if (opts.store_states) traj.states().push_back(u);
    if (opts.observer) opts.observer(n, t, u);
  }
  return traj;
}

inline Trajectory run_path(const Grid& g, const SchemeConfig& cfg, std::uint64_t seed,
                           const PathOptions& opts = {}) {
  return run_path(std::make_shared<const SchemeContext>(g, cfg), seed, opts);
}

/// Discrete H^{-1} energy u^T M u.
inline double h1neg_energy(const SparseSymMatrix& M, const Eigen::VectorXd& u) { return u.dot(M * u); }

}  // namespace spme
