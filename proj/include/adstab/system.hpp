#pragma once

#include <optional>
#include <string>

#include "adstab/linalg.hpp"
#include "adstab/operator.hpp"

namespace adstab {

/// Axis-aligned parameter box in R^s.
struct ParameterBox {
  Vector lower;
  Vector upper;

  bool contains(const Parameter& sigma, double slack = 1e-12) const;
  Eigen::Index dim() const { return lower.size(); }
};

/// Plant dy/dt = A(t) y + B u, z = C y, with Riccati weight Q, for one parameter value.
struct ControlSystem {
  TimePeriodicOperator A;
  Matrix B;  // n x m
  Matrix C;  // p x n
  Matrix Q;  // q x n
  Parameter sigma;
  std::optional<ParameterBox> box;

  /// Constant part of A advanced implicitly by CNAB; empty means none.
  SparseMatrix implicit_part;
  /// Maps this system's state onto the state space the stored gains act on (coarse grid
  /// restriction for refined PDE levels); empty means identity.
  SparseMatrix feedback_restriction;
  /// Quadrature weights of the state inner product; empty means Euclidean.
  Vector norm_weights;
  /// Free-form label used in artifacts (e.g. "oscillator", "parabolic/L1").
  std::string label;

  Eigen::Index n() const { return A.dim(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.rows(); }
  /// Dimension of the state the gains act on.
  Eigen::Index gain_dim() const {
    return feedback_restriction.size() == 0 ? n() : feedback_restriction.rows();
  }

  /// Throws DimensionError / std::invalid_argument when invariants are violated.
  void validate() const;

  double norm(const Vector& y) const;
  Vector restrict_for_gain(const Vector& y) const;
  /// A(t) + B K R as a dense matrix.
  Matrix closed_loop(double t, const Matrix& gain) const;
};

}  // namespace adstab
