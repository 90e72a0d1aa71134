#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace spme {

/// Largest spatial dimension the library supports.
inline constexpr int kMaxDim = 2;

/// A point in D; only the first `dim` components are meaningful.
using Point = std::array<double, kMaxDim>;

/// One-based cell multi-index (i_1, ..., i_d). Unused trailing components stay 1.
struct MultiIndex {
  std::array<int, kMaxDim> idx{1, 1};

  int& operator[](int k) { return idx[static_cast<std::size_t>(k)]; }
  int operator[](int k) const { return idx[static_cast<std::size_t>(k)]; }
  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

/// Uniform tensor partition of D = (-L, L)^d into J^d half-open cells
/// D_i = prod_k (x_{i_k - 1}, x_{i_k}].
class Grid {
 public:
  Grid(double half_width, int cells_per_dim, int dim)
      : L_(half_width), J_(cells_per_dim), d_(dim) {
    if (!(half_width > 0.0) || !std::isfinite(half_width)) {
      throw std::invalid_argument("Grid: half-width L must be positive, got " +
                                  std::to_string(half_width));
    }
    if (cells_per_dim < 4) {
      throw std::invalid_argument("Grid: need at least 4 cells per direction, got " +
                                  std::to_string(cells_per_dim));
    }
    if (dim < 1 || dim > kMaxDim) {
      throw std::invalid_argument("Grid: dimension must be 1 or 2, got " +
                                  std::to_string(dim));
    }
    h_ = 2.0 * L_ / J_;
    n_ = 1;
    for (int k = 0; k < d_; ++k) n_ *= static_cast<std::size_t>(J_);
  }

  double half_width() const { return L_; }
  int cells_per_dim() const { return J_; }
  int dim() const { return d_; }
  double h() const { return h_; }
  std::size_t cell_count() const { return n_; }
  double cell_volume() const { return std::pow(h_, d_); }
  double domain_volume() const { return std::pow(2.0 * L_, d_); }

  /// Node x_k = -L + k h, k = 0..J; the last node is pinned to L.
  double node(int k) const { return k == J_ ? L_ : -L_ + k * h_; }

  bool contains(const MultiIndex& i) const {
    for (int k = 0; k < d_; ++k) {
      if (i[k] < 1 || i[k] > J_) return false;
    }
    return true;
  }

  /// Row-major linearization with i_1 fastest.
  std::size_t flatten(const MultiIndex& i) const {
    std::size_t flat = 0;
    for (int k = d_ - 1; k >= 0; --k) {
      flat = flat * static_cast<std::size_t>(J_) + static_cast<std::size_t>(i[k] - 1);
    }
    return flat;
  }

  MultiIndex unflatten(std::size_t flat) const {
    MultiIndex i;
    for (int k = 0; k < d_; ++k) {
      i[k] = static_cast<int>(flat % static_cast<std::size_t>(J_)) + 1;
      flat /= static_cast<std::size_t>(J_);
    }
    return i;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.L_ == b.L_ && a.J_ == b.J_ && a.d_ == b.d_;
  }

 private:
  double L_;
  int J_;
  int d_;
  double h_ = 0.0;
  std::size_t n_ = 0;
};

inline Grid make_grid(double L, int J, int d) { return Grid(L, J, d); }

/// One-based index of the 1D cell (x_{k-1}, x_k] containing coordinate x;
/// x = -L maps to cell 1.
inline int cell_of_coordinate(const Grid& g, double x) {
  const double L = g.half_width();
  if (!(x >= -L && x <= L)) {
    throw std::out_of_range("cell_of_coordinate: coordinate " + std::to_string(x) +
                            " outside [-L, L]");
  }
  const int J = g.cells_per_dim();
  int k = static_cast<int>(std::ceil((x + L) / g.h()));
  if (k < 1) k = 1;
  if (k > J) k = J;
  // Snap against the node table so exact node hits follow the half-open rule.
  while (k > 1 && x <= g.node(k - 1)) --k;
  while (k < J && x > g.node(k)) ++k;
  return k;
}

inline MultiIndex cell_of_point(const Grid& g, const Point& x) {
  MultiIndex i;
  for (int k = 0; k < g.dim(); ++k) i[k] = cell_of_coordinate(g, x[static_cast<std::size_t>(k)]);
  return i;
}

/// Neighbor j = i + offset of a cell.
struct StencilNeighbor {
  MultiIndex index;
  std::array<int, kMaxDim> offset{0, 0};
};

/// Cells sharing a closure point with D_i, including i itself.
inline std::vector<StencilNeighbor> stencil_neighbors(const Grid& g, const MultiIndex& i) {
  if (!g.contains(i)) throw std::out_of_range("stencil_neighbors: index outside grid");
  std::vector<StencilNeighbor> out;
  const int d = g.dim();
  const int lo2 = d == 2 ? -1 : 0;
  const int hi2 = d == 2 ? 1 : 0;
  for (int o2 = lo2; o2 <= hi2; ++o2) {
    for (int o1 = -1; o1 <= 1; ++o1) {
      StencilNeighbor n;
      n.index = i;
      n.index[0] += o1;
      n.offset[0] = o1;
      if (d == 2) {
        n.index[1] += o2;
        n.offset[1] = o2;
      }
      if (g.contains(n.index)) out.push_back(n);
    }
  }
  return out;
}

}  // namespace spme
