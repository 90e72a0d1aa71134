#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#ifdef SPME_WITH_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

namespace spme {

inline std::string fmt_sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

/// Thrown when a linear or nonlinear solve fails to meet its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + fmt_sci(residual) + ")"), message_(what), residual_(residual) {}
  double residual() const { return residual_; }
  /// The message without the residual suffix.
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  double residual_;
};

/// Symmetric sparse matrix in compressed-row storage.
class SparseSymMatrix {
 public:
  using Storage = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  SparseSymMatrix() = default;
  explicit SparseSymMatrix(Storage m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw std::invalid_argument("SparseSymMatrix: matrix not square");
    m_.makeCompressed();
  }

  static SparseSymMatrix from_triplets(Eigen::Index n, const std::vector<Eigen::Triplet<double>>& t) {
    Storage m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return SparseSymMatrix(std::move(m));
  }

  Eigen::Index size() const { return m_.rows(); }
  Eigen::Index nonzeros() const { return m_.nonZeros(); }
  const Storage& storage() const { return m_; }
  Storage& storage() { return m_; }

  /// Number of stored entries in row i whose magnitude exceeds `tol`.
  int row_nonzeros(Eigen::Index i, double tol = 0.0) const {
    int n = 0;
    for (Storage::InnerIterator it(m_, i); it; ++it) {
      if (std::abs(it.value()) > tol) ++n;
    }
    return n;
  }

  double coeff(Eigen::Index i, Eigen::Index j) const { return m_.coeff(i, j); }

  Eigen::VectorXd operator*(const Eigen::VectorXd& x) const { return m_ * x; }

  /// max |a_ij - a_ji| over stored entries.
  double asymmetry() const {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m_.outerSize(); ++i) {
      for (Storage::InnerIterator it(m_, i); it; ++it) {
        worst = std::max(worst, std::abs(it.value() - m_.coeff(it.col(), i)));
      }
    }
    return worst;
  }

  /// Debug dump: one "i j value" triplet per line, zero-based indices.
  void write_triplets(std::ostream& os) const {
    os.precision(17);
    for (Eigen::Index i = 0; i < m_.outerSize(); ++i) {
      for (Storage::InnerIterator it(m_, i); it; ++it) {
        os << i << ' ' << it.col() << ' ' << it.value() << '\n';
      }
    }
  }

 private:
  Storage m_;
};

/// Sparse Cholesky factorization of an SPD matrix: CHOLMOD's supernodal LL^T
/// when built with SPME_WITH_CHOLMOD, otherwise Eigen's simplicial LDL^T with
/// AMD ordering. solve() is safe to call from several threads.
class SymmetricSolver {
 public:
#ifdef SPME_WITH_CHOLMOD
  using Factor = Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>, Eigen::Lower>;
#else
  using Factor = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>>;
#endif

  SymmetricSolver() = default;
  explicit SymmetricSolver(const SparseSymMatrix& a) { factorize(a); }
  SymmetricSolver(const SymmetricSolver& other) : SymmetricSolver() {
    if (other.factorized_) factorize(SparseSymMatrix(SparseSymMatrix::Storage(other.colmajor_)));
  }
  SymmetricSolver& operator=(const SymmetricSolver& other) {
    if (this != &other) {
      analyzed_ = false;
      factorized_ = false;
      ldlt_ = std::make_unique<Factor>();
      if (other.factorized_) factorize(SparseSymMatrix(SparseSymMatrix::Storage(other.colmajor_)));
    }
    return *this;
  }

  /// Symbolic analysis for a fixed sparsity pattern; call once, then factorize.
  void analyze(const SparseSymMatrix& a) {
    colmajor_ = a.storage();
    ldlt_->analyzePattern(colmajor_);
    analyzed_ = true;
  }

  void factorize(const SparseSymMatrix& a) {
    colmajor_ = a.storage();
    if (!analyzed_) {
      ldlt_->analyzePattern(colmajor_);
      analyzed_ = true;
    }
    ldlt_->factorize(colmajor_);
    if (ldlt_->info() != Eigen::Success) {
      factorized_ = false;
      throw SolverError("SymmetricSolver: factorization failed", 0.0);
    }
    factorized_ = true;
  }

  /// Solves A x = b; throws when the relative residual exceeds `rel_tol`.
  Eigen::VectorXd solve(const Eigen::VectorXd& b, double rel_tol = 1e-10) const {
    if (!factorized_) throw SolverError("SymmetricSolver: no factorization", 0.0);
    Eigen::VectorXd x;
    {
      std::lock_guard<std::mutex> lock(*mutex_);
      x = ldlt_->solve(b);
      if (ldlt_->info() != Eigen::Success) throw SolverError("SymmetricSolver: solve failed", 0.0);
    }
    const double bn = b.norm();
    if (bn > 0.0) {
      const double r = (colmajor_ * x - b).norm() / bn;
      if (!(r <= rel_tol)) throw SolverError("SymmetricSolver: residual above tolerance", r);
    }
    return x;
  }

 private:
  Eigen::SparseMatrix<double> colmajor_;
  std::unique_ptr<Factor> ldlt_ = std::make_unique<Factor>();
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
  bool analyzed_ = false;
  bool factorized_ = false;
};

}  // namespace spme
