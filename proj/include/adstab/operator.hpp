#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "adstab/linalg.hpp"

namespace adstab {

/// Scalar time function multiplying one constant matrix of an affine operator.
struct Coefficient {
  std::function<double(double)> value;
  /// k-th derivative for k >= 1; left empty when only finite differences are available.
  std::function<double(double, int)> derivative;

  static Coefficient constant(double c);
};

/// t -> A(t) in R^{n x n} with A(t + period) = A(t).
///
/// Evaluation reduces t modulo the period before the underlying rule is called, so
/// periodicity holds by construction. Aperiodic operators (switched ones) report an
/// infinite period and are evaluated at the raw time. Instances are immutable and
/// cheap to copy (shared implementation).
class TimePeriodicOperator {
 public:
  using Rule = std::function<Matrix(double)>;
  using DerivativeRule = std::function<Matrix(double, int)>;

  struct Term {
    Coefficient coefficient;
    SparseMatrix matrix;
  };

  class Impl;

  TimePeriodicOperator();

  static TimePeriodicOperator constant(const Matrix& a);
  static TimePeriodicOperator from_rule(Eigen::Index n, Rule rule, double period,
                                        DerivativeRule derivative = {});
  static TimePeriodicOperator affine(std::vector<Term> terms, double period);
  static TimePeriodicOperator block_diagonal(const std::vector<TimePeriodicOperator>& blocks);
  /// pieces[k] is active on [switch_times[k-1], switch_times[k]); the last piece holds forever.
  static TimePeriodicOperator switched(std::vector<TimePeriodicOperator> pieces,
                                       std::vector<double> switch_times);

  Eigen::Index dim() const;
  double period() const;
  bool autonomous() const;
  bool is_periodic() const { return period() < std::numeric_limits<double>::infinity(); }

  /// t mod period (identity for aperiodic operators).
  double reduce(double t) const;

  Matrix evaluate(double t) const;
  Vector apply(double t, const Vector& y) const;

  /// k-th time derivative. Uses the analytic rule when present, otherwise a central
  /// difference with step 1e-6 * max(1, period) for k = 1 and eps^{1/(k+2)} * max(1, period)
  /// for higher orders.
  Matrix derivative(double t, int order) const;
  Matrix finite_difference_derivative(double t, int order) const;
  bool has_analytic_derivatives() const;

 private:
  explicit TimePeriodicOperator(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

}  // namespace adstab
