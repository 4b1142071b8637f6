#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace adstab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Uncertain parameter, a point of R^s.
using Parameter = Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base of every failure that stems from the numerics rather than from bad input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NotStabilizable : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Raised by the integrators when the state norm leaves the representable range.
class BlowUpError : public NumericalError {
 public:
  BlowUpError(double time, double norm);
  double time() const { return time_; }
  double norm() const { return norm_; }

 private:
  double time_;
  double norm_;
};

void require_dims(bool ok, const std::string& what);

/// Largest real part of the spectrum.
double spectral_abscissa(const Matrix& a);
double spectral_radius(const Matrix& a);
bool is_hurwitz(const Matrix& a);

struct RankInfo {
  int rank = 0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
};

/// SVD rank with threshold max(rows, cols) * eps * sigma_max.
RankInfo numerical_rank(const Matrix& a);

/// Smallest eigenvalue of the symmetric part of `a`.
double min_symmetric_eigenvalue(const Matrix& a);

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

}  // namespace adstab
