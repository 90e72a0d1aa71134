#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "spme/assembly.hpp"
#include "spme/basis.hpp"
#include "spme/grid.hpp"
#include "spme/quadrature.hpp"
#include "spme/sparse.hpp"

namespace spme {

/// Brownian increments Delta_n beta_k for steps n = 1..N and modes k = 1..r.
///
/// Rows n >= 2 are i.i.d. Normal(0, tau); row 1 is identically zero so the
/// first step of every run is deterministic. Generated by a std::mt19937_64
/// seeded with `seed`, drawing row by row, mode by mode.
class IncrementTable {
 public:
  IncrementTable(int steps, double tau, int modes, std::uint64_t seed)
      : N_(steps), r_(modes), tau_(tau), seed_(seed) {
    if (steps < 1) throw std::invalid_argument("IncrementTable: need at least one step");
    if (!(tau > 0.0)) throw std::invalid_argument("IncrementTable: step size must be positive");
    if (modes < 1) throw std::invalid_argument("IncrementTable: need at least one mode");
    inc_ = Eigen::MatrixXd::Zero(steps, modes);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(tau));
    for (int n = 1; n < steps; ++n) {
      for (int k = 0; k < modes; ++k) inc_(n, k) = normal(rng);
    }
    accumulate();
  }

  /// Prescribed increments, one row per step; row 1 must be zero.
  IncrementTable(Eigen::MatrixXd increments, double tau)
      : N_(static_cast<int>(increments.rows())), r_(static_cast<int>(increments.cols())), tau_(tau), seed_(0),
        inc_(std::move(increments)) {
    if (N_ < 1 || r_ < 1) throw std::invalid_argument("IncrementTable: empty increment matrix");
    if (!(tau > 0.0)) throw std::invalid_argument("IncrementTable: step size must be positive");
    if (inc_.row(0).cwiseAbs().maxCoeff() != 0.0) {
      throw std::invalid_argument("IncrementTable: first-step increments must be zero");
    }
    accumulate();
  }

  int steps() const { return N_; }
  int modes() const { return r_; }
  double tau() const { return tau_; }
  std::uint64_t seed() const { return seed_; }

  /// Increments of step n (one-based), one entry per mode.
  Eigen::VectorXd row(int n) const {
    if (n < 1 || n > N_) throw std::out_of_range("IncrementTable: step " + std::to_string(n));
    return inc_.row(n - 1).transpose();
  }

  /// W_k(t_n) = sum_{m <= n} Delta_m beta_k, n = 0..N.
  double cumulative(int n, int mode = 0) const { return cumulative_(n, mode); }

  const Eigen::MatrixXd& increments() const { return inc_; }

 private:
  void accumulate() {
    cumulative_ = Eigen::MatrixXd::Zero(N_ + 1, r_);
    for (int n = 1; n <= N_; ++n) cumulative_.row(n) = cumulative_.row(n - 1) + inc_.row(n - 1);
  }

  int N_;
  int r_;
  double tau_;
  std::uint64_t seed_;
  Eigen::MatrixXd inc_;
  Eigen::MatrixXd cumulative_;
};

inline IncrementTable brownian_increments(int N, double tau, int r, std::uint64_t seed) {
  return IncrementTable(N, tau, r, seed);
}

enum class NoiseKind {
  none,
  /// sigma(u) = u driven by one scalar Brownian motion.
  linear,
  /// sigma_h(u) = sigma0 sum_k u chi_k / |D_k|, one Brownian motion per cell.
  spacetime,
};

struct NoiseModel {
  NoiseKind kind = NoiseKind::none;
  double sigma0 = 1.0;

  static NoiseModel none() { return {}; }
  static NoiseModel linear() { return {NoiseKind::linear, 1.0}; }
  static NoiseModel spacetime(double amplitude) { return {NoiseKind::spacetime, amplitude}; }

  /// Number of Brownian modes the model consumes on grid g.
  int modes(const Grid& g) const {
    switch (kind) {
      case NoiseKind::none:
      case NoiseKind::linear: return 1;
      case NoiseKind::spacetime: return static_cast<int>(g.cell_count());
    }
    return 1;
  }
};

inline const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::none: return "none";
    case NoiseKind::linear: return "linear";
    case NoiseKind::spacetime: return "spacetime";
  }
  return "?";
}

/// Per-grid helper for the stochastic load (sigma^r(u_h^{n-1}) Delta_n W, bold psi_i).
class NoiseLoad {
 public:
  NoiseLoad(const NoiseModel& m, const Grid& g, const SparseSymMatrix* mass = nullptr,
            const QuadratureRule& rule = QuadratureRule(3))
      : model_(m), g_(g) {
    if (m.kind == NoiseKind::linear) {
      mass_ = mass ? *mass : assemble_mass(g);
    }
    if (m.kind == NoiseKind::spacetime) build_cell_moments(rule);
  }

  const NoiseModel& model() const { return model_; }

  Eigen::VectorXd operator()(const Eigen::VectorXd& prev, const Eigen::VectorXd& inc_row) const {
    if (inc_row.size() != model_.modes(g_)) {
      throw std::invalid_argument("noise_load: increment row has " + std::to_string(inc_row.size()) +
                                  " entries, model needs " + std::to_string(model_.modes(g_)));
    }
    const auto n = static_cast<Eigen::Index>(g_.cell_count());
    switch (model_.kind) {
      case NoiseKind::none: return Eigen::VectorXd::Zero(n);
      // int u_h psi_i = (M u)_i exactly.
      case NoiseKind::linear: return inc_row[0] * (mass_ * prev);
      case NoiseKind::spacetime: {
        // entry i = sigma0 sum_k dB_k |D_k|^{-1} int_{D_k} u_h psi_i
        Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
        const double inv_vol = 1.0 / g_.cell_volume();
        for (std::size_t k = 0; k < g_.cell_count(); ++k) {
          const double dB = inc_row[static_cast<Eigen::Index>(k)];
          if (dB == 0.0) continue;
          const auto& cm = cell_moments_[k];
          for (const auto& [i, j, v] : cm) {
            out[i] += model_.sigma0 * dB * inv_vol * v * prev[j];
          }
        }
        return out;
      }
    }
    return Eigen::VectorXd::Zero(n);
  }

 private:
  struct Moment {
    Eigen::Index i;
    Eigen::Index j;
    double value;  // int_{D_k} phi_j psi_i
  };

  void build_cell_moments(const QuadratureRule& rule) {
    cell_moments_.resize(g_.cell_count());
    std::array<double, LocalCellBasis::kSlots> phi{};
    std::array<double, LocalCellBasis::kSlots> psi{};
    for (std::size_t k = 0; k < g_.cell_count(); ++k) {
      const MultiIndex cell = g_.unflatten(k);
      const LocalCellBasis local(g_, cell);
      std::array<double, 81> acc{};
      for_each_cell_point(g_, cell, rule, Breaklines::none(), [&](const Point& s, double w) {
        local.evaluate(s, phi, psi);
        for (int a = 0; a < 9; ++a) {
          for (int b = 0; b < 9; ++b) {
            acc[static_cast<std::size_t>(a * 9 + b)] +=
                w * psi[static_cast<std::size_t>(a)] * phi[static_cast<std::size_t>(b)];
          }
        }
      });
      for (int a = 0; a < 9; ++a) {
        if (!local.valid(a)) continue;
        for (int b = 0; b < 9; ++b) {
          if (!local.valid(b)) continue;
          cell_moments_[k].push_back({static_cast<Eigen::Index>(local.flat(a)),
                                      static_cast<Eigen::Index>(local.flat(b)),
                                      acc[static_cast<std::size_t>(a * 9 + b)]});
        }
      }
    }
  }

  NoiseModel model_;
  Grid g_;
  SparseSymMatrix mass_;
  std::vector<std::vector<Moment>> cell_moments_;
};

inline Eigen::VectorXd noise_load(const NoiseModel& m, const Grid& g, const BasisCoefficients& prev,
                                  const Eigen::VectorXd& inc_row,
                                  const QuadratureRule& rule = QuadratureRule(3)) {
  return NoiseLoad(m, g, nullptr, rule)(prev.values, inc_row);
}

}  // namespace spme
