#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Sparse>

#include "spme/basis.hpp"
#include "spme/grid.hpp"
#include "spme/quadrature.hpp"
#include "spme/sparse.hpp"

namespace spme {

/// Exact 1D integrals of the basis pairs on one direction of a grid.
///
/// mass(i, j) = (phi_j, psi_i), psi_gram(i, j) = (psi_j, psi_i),
/// phi_gram(i, j) = (phi_j, phi_i); cell_phi(k, j) and cell_psi(k, j) are the
/// means of phi_j and psi_j over cell k. Indices are zero-based.
struct OneDimIntegrals {
  Eigen::MatrixXd mass;
  Eigen::MatrixXd psi_gram;
  Eigen::MatrixXd phi_gram;
  Eigen::MatrixXd cell_phi;
  Eigen::MatrixXd cell_psi;

  explicit OneDimIntegrals(const Grid& g) {
    const int J = g.cells_per_dim();
    const double h = g.h();
    const Basis1D b(g);
    mass = Eigen::MatrixXd::Zero(J, J);
    psi_gram = Eigen::MatrixXd::Zero(J, J);
    phi_gram = Eigen::MatrixXd::Zero(J, J);
    cell_phi = Eigen::MatrixXd::Zero(J, J);
    cell_psi = Eigen::MatrixXd::Zero(J, J);
    for (int k = 1; k <= J; ++k) {
      for (int i = std::max(1, k - 1); i <= std::min(J, k + 1); ++i) {
        const auto pi = b.piece(i, k);
        if (!pi) continue;
        cell_phi(k - 1, i - 1) = pi->phi;
        cell_psi(k - 1, i - 1) = integrate(pi->psi, h) / h;
        for (int j = std::max(1, k - 1); j <= std::min(J, k + 1); ++j) {
          const auto pj = b.piece(j, k);
          if (!pj) continue;
          mass(i - 1, j - 1) += pj->phi * integrate(pi->psi, h);
          psi_gram(i - 1, j - 1) += integrate_product(pi->psi, pj->psi, h);
          phi_gram(i - 1, j - 1) += h * pi->phi * pj->phi;
        }
      }
    }
  }
};

namespace detail {

/// Builds the n x n matrix with the (5^d)-point pattern |i_k - j_k| <= 2 and
/// entries value(i, j) for multi-indices i, j.
template <class F>
SparseSymMatrix build_banded(const Grid& g, F&& value) {
  const int J = g.cells_per_dim();
  const int d = g.dim();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(g.cell_count() * (d == 1 ? 5 : 25));
  for (std::size_t r = 0; r < g.cell_count(); ++r) {
    const MultiIndex i = g.unflatten(r);
    const int lo2 = d == 2 ? -2 : 0;
    const int hi2 = d == 2 ? 2 : 0;
    for (int o2 = lo2; o2 <= hi2; ++o2) {
      for (int o1 = -2; o1 <= 2; ++o1) {
        MultiIndex j = i;
        j[0] += o1;
        if (d == 2) j[1] += o2;
        if (j[0] < 1 || j[0] > J || (d == 2 && (j[1] < 1 || j[1] > J))) continue;
        t.emplace_back(static_cast<int>(r), static_cast<int>(g.flatten(j)), value(i, j));
      }
    }
  }
  return SparseSymMatrix::from_triplets(static_cast<Eigen::Index>(g.cell_count()), t);
}

}  // namespace detail

/// H^{-1} mass matrix m_ij = (bold phi_j, bold psi_i) by exact integration.
///
/// The tensor basis factorizes, so for d = 2
///   M = s^2 (M1 (x) P1 + P1 (x) M1),  s = 3 / (2 h^2),
/// with the 1D matrices of OneDimIntegrals. Every structural entry within the
/// 5^d band is stored, including exact zeros, so Jacobians can share the pattern.
inline SparseSymMatrix assemble_mass(const Grid& g) {
  const OneDimIntegrals I(g);
  if (g.dim() == 1) {
    return detail::build_banded(g, [&](const MultiIndex& i, const MultiIndex& j) {
      return I.mass(i[0] - 1, j[0] - 1);
    });
  }
  const double s = tensor_scale(g);
  return detail::build_banded(g, [&](const MultiIndex& i, const MultiIndex& j) {
    const int a1 = i[0] - 1, b1 = j[0] - 1, a2 = i[1] - 1, b2 = j[1] - 1;
    return s * s * (I.mass(a1, b1) * I.psi_gram(a2, b2) + I.psi_gram(a1, b1) * I.mass(a2, b2));
  });
}

/// L^2 Gram matrix g_ij = (bold phi_j, bold phi_i) by exact integration.
inline SparseSymMatrix assemble_gram(const Grid& g) {
  const OneDimIntegrals I(g);
  if (g.dim() == 1) {
    return detail::build_banded(g, [&](const MultiIndex& i, const MultiIndex& j) {
      return I.phi_gram(i[0] - 1, j[0] - 1);
    });
  }
  const double s = tensor_scale(g);
  return detail::build_banded(g, [&](const MultiIndex& i, const MultiIndex& j) {
    const int a1 = i[0] - 1, b1 = j[0] - 1, a2 = i[1] - 1, b2 = j[1] - 1;
    return s * s *
           (I.phi_gram(a1, b1) * I.psi_gram(a2, b2) + I.mass(a1, b1) * I.mass(b2, a2) +
            I.mass(b1, a1) * I.mass(a2, b2) + I.psi_gram(a1, b1) * I.phi_gram(a2, b2));
  });
}

/// alpha(z) = |z|^{p-2} z and its derivative.
class PowerLaw {
 public:
  explicit PowerLaw(double p, double jacobian_regularization = 1e-12)
      : p_(p), delta_(jacobian_regularization) {
    if (!(p > 1.0)) throw std::invalid_argument("PowerLaw: exponent p must exceed 1");
  }

  double exponent() const { return p_; }

  double operator()(double z) const {
    if (p_ == 2.0) return z;
    if (p_ == 3.0) return std::abs(z) * z;
    if (z == 0.0) return 0.0;
    return std::pow(std::abs(z), p_ - 2.0) * z;
  }

  /// (p-1)|z|^{p-2}; for p < 2 the singular factor is regularized to
  /// (p-1)(|z| + delta)^{p-2}.
  double derivative(double z) const {
    if (p_ == 2.0) return 1.0;
    if (p_ == 3.0) return 2.0 * std::abs(z);
    if (p_ < 2.0) return (p_ - 1.0) * std::pow(std::abs(z) + delta_, p_ - 2.0);
    return (p_ - 1.0) * std::pow(std::abs(z), p_ - 2.0);
  }

 private:
  double p_;
  double delta_;
};

/// Quadrature-based evaluation of K(c)_i = (alpha(u_h), bold phi_i) and its
/// Jacobian, with the per-direction basis values tabulated once per grid.
class NonlinearOperator {
 public:
  NonlinearOperator(const Grid& g, double p, const QuadratureRule& rule = QuadratureRule(3))
      : g_(g), alpha_(p), rule_(rule), scale_(tensor_scale(g)) {
    const int J = g.cells_per_dim();
    const int q = rule.order();
    const Basis1D b(g);
    phi_tab_.assign(static_cast<std::size_t>(J) * 3, 0.0);
    psi_tab_.assign(static_cast<std::size_t>(J) * 3 * static_cast<std::size_t>(q), 0.0);
    for (int k = 1; k <= J; ++k) {
      for (int o = -1; o <= 1; ++o) {
        const int j = k + o;
        if (j < 1 || j > J) continue;
        const auto pc = b.piece(j, k);
        if (!pc) continue;
        phi_tab_[index1(k, o)] = pc->phi;
        for (int m = 0; m < q; ++m) {
          psi_tab_[index1(k, o) * static_cast<std::size_t>(q) + static_cast<std::size_t>(m)] =
              pc->psi(g.h() * rule.nodes()[static_cast<std::size_t>(m)]);
        }
      }
    }
  }

  const Grid& grid() const { return g_; }
  const PowerLaw& alpha() const { return alpha_; }

  /// K(c).
  Eigen::VectorXd apply(const Eigen::VectorXd& c) const {
    check_size(c);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(c.size());
    for_each_point(c, [&](const Slots& slots, const std::array<double, 9>& phi, double u, double w) {
      const double a = w * alpha_(u);
      for (int s = 0; s < slots.count; ++s) {
        out[slots.flat[static_cast<std::size_t>(s)]] += a * phi[static_cast<std::size_t>(s)];
      }
    });
    return out;
  }

  /// out += scale * J_K(c); `out` must already hold the 5^d pattern.
  void add_jacobian(const Eigen::VectorXd& c, double scale, SparseSymMatrix& out) const {
    check_size(c);
    auto& m = out.storage();
    std::array<double, 81> local{};
    std::size_t current_cell = static_cast<std::size_t>(-1);
    Slots current_slots;
    auto flush = [&]() {
      if (current_cell == static_cast<std::size_t>(-1)) return;
      for (int a = 0; a < current_slots.count; ++a) {
        for (int b = 0; b < current_slots.count; ++b) {
          const double v = local[static_cast<std::size_t>(a * 9 + b)];
          if (v != 0.0) {
            m.coeffRef(current_slots.flat[static_cast<std::size_t>(a)],
                       current_slots.flat[static_cast<std::size_t>(b)]) += scale * v;
          }
        }
      }
    };
    for_each_point(c, [&](const Slots& slots, const std::array<double, 9>& phi, double u, double w) {
      if (slots.cell != current_cell) {
        flush();
        current_cell = slots.cell;
        current_slots = slots;
        local.fill(0.0);
      }
      const double a = w * alpha_.derivative(u);
      if (a == 0.0) return;
      for (int i = 0; i < slots.count; ++i) {
        const double ai = a * phi[static_cast<std::size_t>(i)];
        for (int j = 0; j < slots.count; ++j) {
          local[static_cast<std::size_t>(i * 9 + j)] += ai * phi[static_cast<std::size_t>(j)];
        }
      }
    });
    flush();
  }

  /// J_K(c) on the 5^d pattern.
  SparseSymMatrix jacobian(const Eigen::VectorXd& c) const {
    SparseSymMatrix out = detail::build_banded(g_, [](const MultiIndex&, const MultiIndex&) { return 0.0; });
    add_jacobian(c, 1.0, out);
    return out;
  }

  /// Integral of alpha(u_h) u_h over D; nonnegative by monotonicity of alpha.
  double energy_pairing(const Eigen::VectorXd& c) const {
    double sum = 0.0;
    for_each_point(c, [&](const Slots&, const std::array<double, 9>&, double u, double w) {
      sum += w * alpha_(u) * u;
    });
    return sum;
  }

 private:
  struct Slots {
    std::size_t cell = 0;
    int count = 0;
    std::array<Eigen::Index, 9> flat{};
    std::array<int, 9> o1{};
    std::array<int, 9> o2{};
  };

  std::size_t index1(int k, int o) const {
    return static_cast<std::size_t>(k - 1) * 3 + static_cast<std::size_t>(o + 1);
  }

  void check_size(const Eigen::VectorXd& c) const {
    if (static_cast<std::size_t>(c.size()) != g_.cell_count()) {
      throw std::invalid_argument("NonlinearOperator: coefficient vector has wrong length");
    }
  }

  /// Visits every quadrature point with the supported basis values and u_h.
  template <class F>
  void for_each_point(const Eigen::VectorXd& c, F&& f) const {
    const int J = g_.cells_per_dim();
    const int d = g_.dim();
    const int q = rule_.order();
    const double h = g_.h();
    const auto& wq = rule_.weights();
    std::array<double, 9> phi{};
    std::array<double, 9> coef{};
    Slots slots;
    for (std::size_t cell = 0; cell < g_.cell_count(); ++cell) {
      const MultiIndex k = g_.unflatten(cell);
      slots.cell = cell;
      slots.count = 0;
      const int lo2 = d == 2 ? -1 : 0;
      const int hi2 = d == 2 ? 1 : 0;
      for (int o2 = lo2; o2 <= hi2; ++o2) {
        if (d == 2 && (k[1] + o2 < 1 || k[1] + o2 > J)) continue;
        for (int o1 = -1; o1 <= 1; ++o1) {
          if (k[0] + o1 < 1 || k[0] + o1 > J) continue;
          MultiIndex j = k;
          j[0] += o1;
          if (d == 2) j[1] += o2;
          const auto s = static_cast<std::size_t>(slots.count);
          slots.flat[s] = static_cast<Eigen::Index>(g_.flatten(j));
          slots.o1[s] = o1;
          slots.o2[s] = o2;
          coef[s] = c[slots.flat[s]];
          ++slots.count;
        }
      }
      if (d == 1) {
        for (int m = 0; m < q; ++m) {
          double u = 0.0;
          for (int s = 0; s < slots.count; ++s) {
            const auto us = static_cast<std::size_t>(s);
            phi[us] = phi_tab_[index1(k[0], slots.o1[us])];
            u += coef[us] * phi[us];
          }
          f(slots, phi, u, h * wq[static_cast<std::size_t>(m)]);
        }
        continue;
      }
      for (int m2 = 0; m2 < q; ++m2) {
        for (int m1 = 0; m1 < q; ++m1) {
          double u = 0.0;
          for (int s = 0; s < slots.count; ++s) {
            const auto us = static_cast<std::size_t>(s);
            const std::size_t i1 = index1(k[0], slots.o1[us]);
            const std::size_t i2 = index1(k[1], slots.o2[us]);
            const double psi1 = psi_tab_[i1 * static_cast<std::size_t>(q) + static_cast<std::size_t>(m1)];
            const double psi2 = psi_tab_[i2 * static_cast<std::size_t>(q) + static_cast<std::size_t>(m2)];
            phi[us] = scale_ * (phi_tab_[i1] * psi2 + psi1 * phi_tab_[i2]);
            u += coef[us] * phi[us];
          }
          f(slots, phi, u, h * h * wq[static_cast<std::size_t>(m1)] * wq[static_cast<std::size_t>(m2)]);
        }
      }
    }
  }

  Grid g_;
  PowerLaw alpha_;
  QuadratureRule rule_;
  double scale_;
  std::vector<double> phi_tab_;
  std::vector<double> psi_tab_;
};

inline Eigen::VectorXd nonlinear_term(const Grid& g, const BasisCoefficients& c, double p,
                                      const QuadratureRule& rule = QuadratureRule(3)) {
  return NonlinearOperator(g, p, rule).apply(c.values);
}

inline SparseSymMatrix nonlinear_jacobian(const Grid& g, const BasisCoefficients& c, double p,
                                          const QuadratureRule& rule = QuadratureRule(3)) {
  return NonlinearOperator(g, p, rule).jacobian(c.values);
}

/// Pointwise-evaluable function on D.
using SpaceFunction = std::function<double(const Point&)>;

/// Load vector with entries (w, bold psi_i).
inline Eigen::VectorXd psi_load(const Grid& g, const SpaceFunction& w,
                                const QuadratureRule& rule = QuadratureRule(3),
                                const Breaklines& breaks = Breaklines::none()) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.cell_count()));
  std::array<double, LocalCellBasis::kSlots> phi{};
  std::array<double, LocalCellBasis::kSlots> psi{};
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const MultiIndex cell = g.unflatten(c);
    const LocalCellBasis local(g, cell);
    for_each_cell_point(g, cell, rule, breaks, [&](const Point& s, double wt) {
      const double val = w(global_point(g, cell, s));
      if (val == 0.0) return;
      local.evaluate(s, phi, psi);
      for (int a = 0; a < LocalCellBasis::kSlots; ++a) {
        if (local.valid(a)) {
          out[static_cast<Eigen::Index>(local.flat(a))] += wt * val * psi[static_cast<std::size_t>(a)];
        }
      }
    });
  }
  return out;
}

}  // namespace spme
