#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "spme/grid.hpp"

namespace spme {

/// c0 + c1 s + c2 s^2 in the cell-local coordinate s = x - x_{k-1} in [0, h].
struct Quadratic {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  double operator()(double s) const { return c0 + s * (c1 + s * c2); }
  double derivative(double s) const { return c1 + 2.0 * c2 * s; }
  double second_derivative() const { return 2.0 * c2; }
};

/// Exact integral over [0, h] of the product of two quadratics.
inline double integrate_product(const Quadratic& a, const Quadratic& b, double h) {
  const std::array<double, 3> ac{a.c0, a.c1, a.c2};
  const std::array<double, 3> bc{b.c0, b.c1, b.c2};
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int e = i + j + 1;
      sum += ac[static_cast<std::size_t>(i)] * bc[static_cast<std::size_t>(j)] *
             std::pow(h, e) / e;
    }
  }
  return sum;
}

/// Exact integral over [0, h] of a quadratic.
inline double integrate(const Quadratic& a, double h) {
  return h * (a.c0 + h * (a.c1 / 2.0 + h * a.c2 / 3.0));
}

/// Restriction of the 1D pair (phi_j, psi_j) to one cell: phi is constant,
/// psi is a quadratic in the local coordinate.
struct BasisPiece {
  double phi = 0.0;
  Quadratic psi;
};

/// Piecewise-polynomial descriptors of the 1D basis phi_1..phi_J and
/// psi_j = (-d^2/dx^2)^{-1} phi_j with homogeneous Dirichlet data.
///
/// Interior phi_j is (-1/2, 1, -1/2) on cells j-1, j, j+1; the boundary
/// functions phi_1 and phi_J are (3/2, -1/2) and (-1/2, 3/2).
class Basis1D {
 public:
  /// Uses the per-direction partition of `g` (any dimension).
  explicit Basis1D(const Grid& g) : g_(g), J_(g.cells_per_dim()), h_(g.h()) {}

  int size() const { return J_; }
  double h() const { return h_; }
  const Grid& grid() const { return g_; }

  /// Piece of basis function j on cell k (both one-based), or nullopt outside
  /// its support.
  std::optional<BasisPiece> piece(int j, int k) const {
    const double h = h_;
    const int o = k - j;
    if (j == 1) {
      if (o == 0) return BasisPiece{1.5, {0.0, h, -0.75}};
      if (o == 1) return BasisPiece{-0.5, {0.25 * h * h, -0.5 * h, 0.25}};
      return std::nullopt;
    }
    if (j == J_) {
      if (o == -1) return BasisPiece{-0.5, {0.0, 0.0, 0.25}};
      if (o == 0) return BasisPiece{1.5, {0.25 * h * h, 0.5 * h, -0.75}};
      return std::nullopt;
    }
    switch (o) {
      case -1: return BasisPiece{-0.5, {0.0, 0.0, 0.25}};
      case 0: return BasisPiece{1.0, {0.25 * h * h, 0.5 * h, -0.5}};
      case 1: return BasisPiece{-0.5, {0.25 * h * h, -0.5 * h, 0.25}};
      default: return std::nullopt;
    }
  }

  /// Polynomial breakpoints bounding supp(phi_j) = supp(psi_j), as node indices.
  std::pair<int, int> support(int j) const {
    if (j == 1) return {0, 2};
    if (j == J_) return {J_ - 2, J_};
    return {j - 2, j + 1};
  }

  double node(int k) const { return g_.node(k); }

 private:
  Grid g_;
  int J_;
  double h_;
};

namespace detail {

inline void check_index_1d(int J, int j) {
  if (j < 1 || j > J) {
    throw std::out_of_range("basis index " + std::to_string(j) + " outside 1.." +
                            std::to_string(J));
  }
}

}  // namespace detail

inline double phi1d_eval(const Basis1D& b, int j, double x) {
  detail::check_index_1d(b.size(), j);
  const int k = cell_of_coordinate(b.grid(), x);
  const auto pc = b.piece(j, k);
  return pc ? pc->phi : 0.0;
}

inline double psi1d_eval(const Basis1D& b, int j, double x) {
  detail::check_index_1d(b.size(), j);
  const int k = cell_of_coordinate(b.grid(), x);
  const auto pc = b.piece(j, k);
  return pc ? pc->psi(x - b.node(k - 1)) : 0.0;
}

/// Prefactor (3 / (d^{1/(d-1)} h^2))^{d-1} of the tensor basis; 1 for d = 1.
inline double tensor_scale(const Grid& g) {
  const int d = g.dim();
  if (d == 1) return 1.0;
  const double base = 3.0 / (std::pow(static_cast<double>(d), 1.0 / (d - 1)) * g.h() * g.h());
  return std::pow(base, d - 1);
}

/// Values of the (at most 3^d) basis functions supported on one cell,
/// evaluated at a point given in cell-local coordinates.
///
/// Slot a = (o_1 + 1) + 3 (o_2 + 1) holds basis j = k + o; `valid[a]` is false
/// when j falls outside the grid.
class LocalCellBasis {
 public:
  static constexpr int kSlots = 9;

  LocalCellBasis(const Grid& g, const MultiIndex& cell) : g_(g), cell_(cell), scale_(tensor_scale(g)) {
    const Basis1D b(g);
    for (int dir = 0; dir < g.dim(); ++dir) {
      for (int o = -1; o <= 1; ++o) {
        const int j = cell[dir] + o;
        auto& slot = pieces_[static_cast<std::size_t>(dir)][static_cast<std::size_t>(o + 1)];
        slot = (j >= 1 && j <= g.cells_per_dim()) ? b.piece(j, cell[dir]) : std::nullopt;
      }
    }
    for (int a = 0; a < kSlots; ++a) {
      const int o1 = a % 3 - 1;
      const int o2 = a / 3 - 1;
      bool ok = pieces_[0][static_cast<std::size_t>(o1 + 1)].has_value();
      if (g.dim() == 2) {
        ok = ok && pieces_[1][static_cast<std::size_t>(o2 + 1)].has_value();
      } else {
        ok = ok && o2 == 0;
      }
      valid_[static_cast<std::size_t>(a)] = ok;
      if (ok) {
        MultiIndex j = cell;
        j[0] += o1;
        if (g.dim() == 2) j[1] += o2;
        flat_[static_cast<std::size_t>(a)] = g.flatten(j);
      }
    }
  }

  bool valid(int a) const { return valid_[static_cast<std::size_t>(a)]; }
  std::size_t flat(int a) const { return flat_[static_cast<std::size_t>(a)]; }
  const MultiIndex& cell() const { return cell_; }

  /// phi and psi values of every slot at local coordinates s (s_k in [0, h]).
  void evaluate(const Point& s, std::array<double, kSlots>& phi, std::array<double, kSlots>& psi) const {
    std::array<std::array<double, 3>, kMaxDim> p1{};
    std::array<std::array<double, 3>, kMaxDim> q1{};
    for (int dir = 0; dir < g_.dim(); ++dir) {
      for (int o = 0; o < 3; ++o) {
        const auto& pc = pieces_[static_cast<std::size_t>(dir)][static_cast<std::size_t>(o)];
        p1[static_cast<std::size_t>(dir)][static_cast<std::size_t>(o)] = pc ? pc->phi : 0.0;
        q1[static_cast<std::size_t>(dir)][static_cast<std::size_t>(o)] =
            pc ? pc->psi(s[static_cast<std::size_t>(dir)]) : 0.0;
      }
    }
    for (int a = 0; a < kSlots; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      if (!valid_[ua]) {
        phi[ua] = 0.0;
        psi[ua] = 0.0;
        continue;
      }
      const auto o1 = static_cast<std::size_t>(a % 3);
      if (g_.dim() == 1) {
        phi[ua] = p1[0][o1];
        psi[ua] = q1[0][o1];
      } else {
        const auto o2 = static_cast<std::size_t>(a / 3);
        phi[ua] = scale_ * (p1[0][o1] * q1[1][o2] + q1[0][o1] * p1[1][o2]);
        psi[ua] = scale_ * q1[0][o1] * q1[1][o2];
      }
    }
  }

 private:
  Grid g_;
  MultiIndex cell_;
  double scale_;
  std::array<std::array<std::optional<BasisPiece>, 3>, kMaxDim> pieces_{};
  std::array<bool, kSlots> valid_{};
  std::array<std::size_t, kSlots> flat_{};
};

/// Local coordinates of x relative to the lower corner of its cell.
inline Point local_coordinates(const Grid& g, const MultiIndex& cell, const Point& x) {
  Point s{0.0, 0.0};
  for (int k = 0; k < g.dim(); ++k) {
    s[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)] - g.node(cell[k] - 1);
  }
  return s;
}

namespace detail {

/// Tensor evaluation of basis i at x: returns (phi, psi).
inline std::pair<double, double> tensor_eval(const Grid& g, const MultiIndex& i, const Point& x) {
  if (!g.contains(i)) throw std::out_of_range("basis multi-index outside grid");
  const MultiIndex cell = cell_of_point(g, x);
  const Basis1D b(g);
  std::array<double, kMaxDim> p{};
  std::array<double, kMaxDim> q{};
  for (int k = 0; k < g.dim(); ++k) {
    const auto pc = b.piece(i[k], cell[k]);
    if (!pc) return {0.0, 0.0};
    p[static_cast<std::size_t>(k)] = pc->phi;
    q[static_cast<std::size_t>(k)] = pc->psi(x[static_cast<std::size_t>(k)] - g.node(cell[k] - 1));
  }
  if (g.dim() == 1) return {p[0], q[0]};
  const double s = tensor_scale(g);
  return {s * (p[0] * q[1] + q[0] * p[1]), s * q[0] * q[1]};
}

}  // namespace detail

/// bold phi_i(x) of the tensor basis.
inline double phi_nd_eval(const Grid& g, const MultiIndex& i, const Point& x) {
  return detail::tensor_eval(g, i, x).first;
}

/// bold psi_i(x) = (-Delta)^{-1} bold phi_i.
inline double psi_nd_eval(const Grid& g, const MultiIndex& i, const Point& x) {
  return detail::tensor_eval(g, i, x).second;
}

/// Coefficients c of u_h = sum_i c_i bold phi_i.
struct BasisCoefficients {
  Grid grid;
  Eigen::VectorXd values;

  explicit BasisCoefficients(const Grid& g)
      : grid(g), values(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.cell_count()))) {}
  BasisCoefficients(const Grid& g, Eigen::VectorXd v) : grid(g), values(std::move(v)) {
    if (static_cast<std::size_t>(values.size()) != g.cell_count()) {
      throw std::invalid_argument("BasisCoefficients: expected " +
                                  std::to_string(g.cell_count()) + " coefficients");
    }
  }
};

/// u_h at a point x; only the basis functions supported on x's cell contribute.
inline double eval_field(const BasisCoefficients& c, const Point& x) {
  const Grid& g = c.grid;
  const MultiIndex cell = cell_of_point(g, x);
  const LocalCellBasis local(g, cell);
  std::array<double, LocalCellBasis::kSlots> phi{};
  std::array<double, LocalCellBasis::kSlots> psi{};
  local.evaluate(local_coordinates(g, cell, x), phi, psi);
  double u = 0.0;
  for (int a = 0; a < LocalCellBasis::kSlots; ++a) {
    if (local.valid(a)) u += c.values[static_cast<Eigen::Index>(local.flat(a))] * phi[static_cast<std::size_t>(a)];
  }
  return u;
}

}  // namespace spme
