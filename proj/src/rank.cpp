#include <vector>

#include "adstab/riccati.hpp"

namespace adstab {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Builds [X_0 ... X_{K-1}] with X_{k+1} = sign * M X_k + dX_k/dt, M = A or A^T.
// Derivatives of X_k follow from the Leibniz rule, so only derivatives of A are needed:
// X_k^(d) = sign * sum_i C(d,i) M^(i) X_{k-1}^(d-i) + X_{k-1}^(d+1).
RankCertificate derivative_chain(const TimePeriodicOperator& a, const Matrix& x0, double t,
                                 DerivativeMode mode, double sign, bool transpose) {
  const Eigen::Index dim = a.dim();
  require_dims(x0.rows() == dim, "rank-matrix seed must have dim(A) rows");
  const int count = static_cast<int>(dim);
  const Eigen::Index width = x0.cols();

  RankCertificate cert;
  cert.time = t;
  cert.matrix.resize(dim, width * count);
  if (count == 0) return cert;

  std::vector<Matrix> m(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Matrix d = (i == 0 || mode == DerivativeMode::Auto) ? a.derivative(t, i)
                                                        : a.finite_difference_derivative(t, i);
    m[static_cast<std::size_t>(i)] = transpose ? Matrix(d.transpose()) : d;
  }

  // derivs[d] = X_k^(d); X_k needs derivatives up to K-1-k.
  std::vector<Matrix> derivs(static_cast<std::size_t>(count), Matrix::Zero(dim, width));
  derivs[0] = x0;
  cert.matrix.leftCols(width) = x0;
  for (int k = 1; k < count; ++k) {
    const int top = count - 1 - k;
    std::vector<Matrix> next(static_cast<std::size_t>(top + 1));
    for (int d = 0; d <= top; ++d) {
      Matrix acc = derivs[static_cast<std::size_t>(d + 1)];
      for (int i = 0; i <= d; ++i) {
        acc.noalias() += sign * binomial(d, i) * m[static_cast<std::size_t>(i)] *
                         derivs[static_cast<std::size_t>(d - i)];
      }
      next[static_cast<std::size_t>(d)] = std::move(acc);
    }
    derivs = std::move(next);
    cert.matrix.middleCols(k * width, width) = derivs[0];
  }

  const RankInfo info = numerical_rank(cert.matrix);
  cert.rank = info.rank;
  cert.sigma_min = info.sigma_min;
  cert.sigma_max = info.sigma_max;
  return cert;
}

}  // namespace

RankCertificate silverman_meadows_qb(const TimePeriodicOperator& a, const Matrix& b_ext, double t,
                                     DerivativeMode mode) {
  return derivative_chain(a, b_ext, t, mode, -1.0, false);
}

RankCertificate silverman_meadows_qc(const TimePeriodicOperator& a, const Matrix& c_ext, double t,
                                     DerivativeMode mode) {
  require_dims(c_ext.cols() == a.dim(), "C_ext must have dim(A) columns");
  return derivative_chain(a, c_ext.transpose(), t, mode, 1.0, true);
}

}  // namespace adstab
