#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "adstab/riccati.hpp"

namespace adstab {

namespace {

// Starts and sizes of the 1x1 and 2x2 diagonal blocks of a real Schur form.
std::vector<std::pair<Eigen::Index, Eigen::Index>> schur_blocks(const Matrix& t) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;
  const Eigen::Index n = t.rows();
  for (Eigen::Index i = 0; i < n;) {
    const Eigen::Index size = (i + 1 < n && t(i + 1, i) != 0.0) ? 2 : 1;
    blocks.emplace_back(i, size);
    i += size;
  }
  return blocks;
}

// Solves P^T Y + Y R = F for blocks of size at most 2 via the Kronecker form.
Matrix small_sylvester(const Matrix& p, const Matrix& r, const Matrix& f, double scale) {
  const Eigen::Index a = p.rows();
  const Eigen::Index b = r.rows();
  Eigen::Matrix4d k = Eigen::Matrix4d::Zero();
  Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
  for (Eigen::Index j = 0; j < b; ++j) {
    for (Eigen::Index i = 0; i < a; ++i) {
      const Eigen::Index row = j * a + i;
      rhs(row) = f(i, j);
      for (Eigen::Index l = 0; l < a; ++l) k(row, j * a + l) += p(l, i);
      for (Eigen::Index l = 0; l < b; ++l) k(row, l * a + i) += r(l, j);
    }
  }
  const Eigen::Index m = a * b;
  const Eigen::FullPivLU<Matrix> lu(k.topLeftCorner(m, m));
  if (lu.rank() < m || lu.matrixLU().diagonal().cwiseAbs().minCoeff() <= 1e-14 * scale) {
    throw NumericalError("Lyapunov operator is singular (eigenvalues sum to zero)");
  }
  const Vector y = lu.solve(rhs.head(m));
  return Eigen::Map<const Matrix>(y.data(), a, b);
}

}  // namespace

Matrix solve_lyapunov(const Matrix& a, const Matrix& w) {
  const Eigen::Index n = a.rows();
  require_dims(a.cols() == n && w.rows() == n && w.cols() == n,
               "Lyapunov equation needs square matrices of one size");
  if (n == 0) return Matrix(0, 0);

  // A = U T U^T with T quasi-triangular; Y = U^T X U solves T^T Y + Y T = -U^T W U.
  Eigen::RealSchur<Matrix> schur(a);
  if (schur.info() != Eigen::Success) throw NumericalError("Schur decomposition failed");
  const Matrix& u = schur.matrixU();
  const Matrix& t = schur.matrixT();
  Matrix y = -(u.transpose() * w * u);
  const auto blocks = schur_blocks(t);
  const double scale = std::max(t.cwiseAbs().maxCoeff(), 1e-300);

  // Column blocks left to right, row blocks top to bottom; y holds the right-hand side until solved.
  for (const auto& [j, q] : blocks) {
    if (j > 0) y.middleCols(j, q).noalias() -= y.leftCols(j) * t.block(0, j, j, q);
    for (const auto& [i, p] : blocks) {
      if (i > 0) y.block(i, j, p, q).noalias() -= t.block(0, i, i, p).transpose() * y.block(0, j, i, q);
      y.block(i, j, p, q) = small_sylvester(t.block(i, i, p, p), t.block(j, j, q, q), y.block(i, j, p, q), scale);
    }
  }
  return symmetrize(u * y * u.transpose());
}

Matrix solve_lyapunov_kronecker(const Matrix& a, const Matrix& w) {
  const Eigen::Index n = a.rows();
  require_dims(a.cols() == n && w.rows() == n && w.cols() == n,
               "Lyapunov equation needs square matrices of one size");
  const Matrix eye = Matrix::Identity(n, n);
  Matrix big = Matrix::Zero(n * n, n * n);
  // Column-major vec: vec(A^T X) = (I kron A^T) vec X, vec(X A) = (A^T kron I) vec X.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      big.block(i * n, j * n, n, n) += eye(i, j) * a.transpose();
      big.block(i * n, j * n, n, n) += a(j, i) * eye;
    }
  }
  const Vector rhs = -Eigen::Map<const Vector>(w.data(), n * n);
  Eigen::FullPivLU<Matrix> lu(big);
  if (!lu.isInvertible()) throw NumericalError("Kronecker Lyapunov operator is singular");
  const Vector x = lu.solve(rhs);
  return Eigen::Map<const Matrix>(x.data(), n, n);
}

}  // namespace adstab
