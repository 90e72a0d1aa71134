#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "spme/assembly.hpp"
#include "spme/basis.hpp"
#include "spme/grid.hpp"
#include "spme/quadrature.hpp"
#include "spme/sparse.hpp"

namespace spme {

/// Element of the piecewise-constant space span{chi_i}: one value per cell.
struct PiecewiseConstField {
  Grid grid;
  Eigen::VectorXd values;

  explicit PiecewiseConstField(const Grid& g)
      : grid(g), values(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.cell_count()))) {}
  PiecewiseConstField(const Grid& g, Eigen::VectorXd v) : grid(g), values(std::move(v)) {
    if (static_cast<std::size_t>(values.size()) != g.cell_count()) {
      throw std::invalid_argument("PiecewiseConstField: wrong number of cell values");
    }
  }

  double lp_norm(double p) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) s += std::pow(std::abs(values[i]), p);
    return std::pow(s * grid.cell_volume(), 1.0 / p);
  }
};

/// Cell means v_i = |D_i|^{-1} int_{D_i} v.
inline PiecewiseConstField cell_average(const Grid& g, const SpaceFunction& v,
                                        const QuadratureRule& rule = QuadratureRule(3),
                                        const Breaklines& breaks = Breaklines::none()) {
  PiecewiseConstField out(g);
  const double vol = g.cell_volume();
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const MultiIndex cell = g.unflatten(c);
    double sum = 0.0;
    for_each_cell_point(g, cell, rule, breaks, [&](const Point& s, double w) {
      sum += w * v(global_point(g, cell, s));
    });
    out.values[static_cast<Eigen::Index>(c)] = sum / vol;
  }
  return out;
}

/// Cell means of u_h = sum c_i bold phi_i.
inline PiecewiseConstField cell_average(const BasisCoefficients& c,
                                        const QuadratureRule& rule = QuadratureRule(3)) {
  const Grid& g = c.grid;
  PiecewiseConstField out(g);
  std::array<double, LocalCellBasis::kSlots> phi{};
  std::array<double, LocalCellBasis::kSlots> psi{};
  for (std::size_t k = 0; k < g.cell_count(); ++k) {
    const MultiIndex cell = g.unflatten(k);
    const LocalCellBasis local(g, cell);
    double sum = 0.0;
    for_each_cell_point(g, cell, rule, Breaklines::none(), [&](const Point& s, double w) {
      local.evaluate(s, phi, psi);
      for (int a = 0; a < LocalCellBasis::kSlots; ++a) {
        if (local.valid(a)) {
          sum += w * c.values[static_cast<Eigen::Index>(local.flat(a))] * phi[static_cast<std::size_t>(a)];
        }
      }
    });
    out.values[static_cast<Eigen::Index>(k)] = sum / g.cell_volume();
  }
  return out;
}

/// Values assumed for cells outside D by the discrete Laplacian.
enum class GhostRule {
  /// Ghost cells hold 0.
  zero,
  /// Ghost cells hold the odd reflection of the adjacent interior value,
  /// matching sine-type data vanishing on the boundary. With this rule the
  /// scaled stencil coincides with the cell means of the boundary basis
  /// functions.
  odd_reflection,
};

/// Matrix of -Delta_h: the 9-point operator
///   (8 / (3h^2)) [f_i - (1/8) sum_{k != 0} f_{i+k}]
/// for d = 2, and the 3-point operator (2 / h^2) [f_i - f_{i-1}/2 - f_{i+1}/2]
/// for d = 1.
inline SparseSymMatrix discrete_laplacian_matrix(const Grid& g, GhostRule ghosts = GhostRule::zero) {
  const int J = g.cells_per_dim();
  const int d = g.dim();
  const double h = g.h();
  const double center = d == 2 ? 8.0 / (3.0 * h * h) : 2.0 / (h * h);
  const double off = d == 2 ? -center / 8.0 : -center / 2.0;
  std::vector<Eigen::Triplet<double>> t;
  // Reflect a 1D index into the grid; returns the sign picked up.
  auto reflect = [&](int& i) {
    if (i < 1) {
      i = 1 - i;
      return -1.0;
    }
    if (i > J) {
      i = 2 * J + 1 - i;
      return -1.0;
    }
    return 1.0;
  };
  for (std::size_t r = 0; r < g.cell_count(); ++r) {
    const MultiIndex i = g.unflatten(r);
    t.emplace_back(static_cast<int>(r), static_cast<int>(r), center);
    const int lo2 = d == 2 ? -1 : 0;
    const int hi2 = d == 2 ? 1 : 0;
    for (int o2 = lo2; o2 <= hi2; ++o2) {
      for (int o1 = -1; o1 <= 1; ++o1) {
        if (o1 == 0 && o2 == 0) continue;
        MultiIndex j = i;
        j[0] += o1;
        if (d == 2) j[1] += o2;
        if (g.contains(j)) {
          t.emplace_back(static_cast<int>(r), static_cast<int>(g.flatten(j)), off);
          continue;
        }
        if (ghosts == GhostRule::zero) continue;
        double sign = reflect(j[0]);
        if (d == 2) sign *= reflect(j[1]);
        t.emplace_back(static_cast<int>(r), static_cast<int>(g.flatten(j)), sign * off);
      }
    }
  }
  return SparseSymMatrix::from_triplets(static_cast<Eigen::Index>(g.cell_count()), t);
}

/// (-Delta_h f) for a piecewise-constant field.
inline PiecewiseConstField discrete_laplacian_apply(const PiecewiseConstField& f,
                                                    GhostRule ghosts = GhostRule::zero) {
  return PiecewiseConstField(f.grid, discrete_laplacian_matrix(f.grid, ghosts) * f.values);
}

/// Implementable restriction: coefficients v solving
///   -Delta_h (w v) = cell means of the target,  w = 3h^2/8 (d=2), h^2/2 (d=1),
/// with odd-reflection ghosts, so that the cell means of the resulting field
/// reproduce the target's cell means.
class TildeRestriction {
 public:
  explicit TildeRestriction(const Grid& g) : g_(g) {
    const double h = g.h();
    const double w = g.dim() == 2 ? 3.0 * h * h / 8.0 : h * h / 2.0;
    SparseSymMatrix a = discrete_laplacian_matrix(g, GhostRule::odd_reflection);
    a.storage() *= w;
    op_ = a;
    solver_.factorize(op_);
  }

  const Grid& grid() const { return g_; }
  /// The scaled operator, equal to the matrix of basis cell means.
  const SparseSymMatrix& cell_mean_operator() const { return op_; }

  BasisCoefficients operator()(const PiecewiseConstField& target) const {
    if (!(target.grid == g_)) throw std::invalid_argument("TildeRestriction: grid mismatch");
    return BasisCoefficients(g_, solver_.solve(target.values, 1e-12));
  }

 private:
  Grid g_;
  SparseSymMatrix op_;
  SymmetricSolver solver_;
};

inline BasisCoefficients tilde_restriction(const PiecewiseConstField& target) {
  return TildeRestriction(target.grid)(target);
}

inline BasisCoefficients tilde_restriction(const Grid& g, const SpaceFunction& v,
                                           const QuadratureRule& rule = QuadratureRule(4),
                                           const Breaklines& breaks = Breaklines::none()) {
  return TildeRestriction(g)(cell_average(g, v, rule, breaks));
}

/// Discrete H^{-1} projection: M c = ((v, bold psi_i))_i with a cached
/// factorization of the mass matrix.
class H1NegProjector {
 public:
  explicit H1NegProjector(const Grid& g) : H1NegProjector(g, assemble_mass(g)) {}
  H1NegProjector(const Grid& g, SparseSymMatrix mass) : g_(g), mass_(std::move(mass)) {
    solver_.factorize(mass_);
  }

  const SparseSymMatrix& mass() const { return mass_; }
  const SymmetricSolver& solver() const { return solver_; }

  BasisCoefficients from_load(const Eigen::VectorXd& load) const {
    return BasisCoefficients(g_, solver_.solve(load, 1e-12));
  }

  BasisCoefficients operator()(const SpaceFunction& v, const QuadratureRule& rule = QuadratureRule(4),
                               const Breaklines& breaks = Breaklines::none()) const {
    return from_load(psi_load(g_, v, rule, breaks));
  }

 private:
  Grid g_;
  SparseSymMatrix mass_;
  SymmetricSolver solver_;
};

inline BasisCoefficients h1neg_projection(const Grid& g, const SparseSymMatrix& M, const SpaceFunction& v,
                                          const QuadratureRule& rule = QuadratureRule(4),
                                          const Breaklines& breaks = Breaklines::none()) {
  return H1NegProjector(g, M)(v, rule, breaks);
}

}  // namespace spme
