#pragma once

#include <optional>
#include <vector>

#include "adstab/integrator.hpp"
#include "adstab/linalg.hpp"
#include "adstab/operator.hpp"
#include "adstab/system.hpp"

namespace adstab {

/// Solves A^T X + X A + W = 0 by a real Schur (Bartels-Stewart) sweep. O(n^3).
Matrix solve_lyapunov(const Matrix& a, const Matrix& w);

/// Same equation through the n^2 x n^2 Kronecker linearization. Only sensible for small n.
Matrix solve_lyapunov_kronecker(const Matrix& a, const Matrix& w);

/// A^T P + P A - P B B^T P + Q^T Q.
Matrix are_residual(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& pi);

struct RiccatiSolution {
  /// Node times in [0, period); a single node at 0 for algebraic solutions.
  std::vector<double> mesh;
  std::vector<Matrix> values;
  double period = 1.0;
  bool periodic = false;
  /// Frobenius norm of the algebraic residual (algebraic solutions only).
  double residual = 0.0;
  /// |Pi(0) - Pi(period)|_F of the final sweep (periodic solutions only).
  double periodicity_gap = 0.0;
  int iterations = 0;

  /// Piecewise-linear periodic interpolation through the stored nodes.
  Matrix at(double t) const;
  Eigen::Index dim() const { return values.empty() ? 0 : values.front().rows(); }
};

struct AreOptions {
  double tol = 1e-12;
  int max_iterations = 100;
};

/// Stabilizing solution of A^T P + P A - P B B^T P + Q^T Q = 0 by Newton-Kleinman.
///
/// The initial gain is K0 = 0 when A is Hurwitz, otherwise -alpha B^T for alpha in
/// {1, 10, 100}, otherwise Bass's gain -B^T Z^{-1} with
/// -(A + beta I) Z - Z (A + beta I)^T + 2 B B^T = 0.
/// Throws NotStabilizable when no stabilizing start is found and NonConvergence when the
/// iteration cap is hit.
RiccatiSolution solve_are(const Matrix& a, const Matrix& b, const Matrix& q,
                          const AreOptions& options = {});

/// A gain K with A + B K Hurwitz, or nullopt.
std::optional<Matrix> stabilizing_gain(const Matrix& a, const Matrix& b);

struct PeriodicRiccatiOptions {
  double dt = 1e-2;
  /// Sweeps stop once |Pi_k(0) - Pi_{k-1}(0)|_F <= tol * max(1, |Pi_k(0)|_F).
  double tol = 1e-9;
  int max_sweeps = 200;
  /// Terminal seed; defaults to the frozen-time algebraic solution at t = 0, else Q^T Q.
  std::optional<Matrix> terminal;
};

/// Periodic solution of dPi/dt + A^T Pi + Pi A - Pi B B^T Pi + Q^T Q = 0 by repeated
/// backward Crank-Nicolson sweeps over one period.
///
/// Each backward step solves one Lyapunov equation: the quadratic term is split as
/// (Pi_j G Pi_{j+1} + Pi_{j+1} G Pi_j) / 2 and A is taken at the step midpoint, which keeps
/// the scheme second order and makes every algebraic solution an exact fixed point.
/// The mesh is {j rho / S} with S = snap_steps(rho, dt).
RiccatiSolution solve_periodic_riccati(const ControlSystem& sys,
                                       const PeriodicRiccatiOptions& options = {});

/// K(t) = -B^T Pi(t) interpolated from a Riccati solution.
GainFunction riccati_gain(const Matrix& b, const RiccatiSolution& solution);

/// Monodromy of A(t) - B B^T Pi(t) over one period.
Matrix closed_loop_monodromy(const ControlSystem& sys, const RiccatiSolution& solution,
                             double dt = 1e-3);

/// rank [B, AB, ..., A^{n-1} B] == n.
bool kalman_rank(const Matrix& a, const Matrix& b);
Matrix controllability_matrix(const Matrix& a, const Matrix& b);

struct RankCertificate {
  Matrix matrix;
  double time = 0.0;
  int rank = 0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;

  bool full_rank() const { return rank == matrix.rows(); }
};

enum class DerivativeMode { Auto, FiniteDifference };

/// Q_B(t) = [P_0 ... P_{K-1}], P_0 = B_ext, P_{k+1} = -A P_k + dP_k/dt (K = dim A).
RankCertificate silverman_meadows_qb(const TimePeriodicOperator& a, const Matrix& b_ext,
                                     double t, DerivativeMode mode = DerivativeMode::Auto);

/// Q_C(t) = [S_0 ... S_{K-1}], S_0 = C_ext^T, S_{k+1} = A^T S_k + dS_k/dt.
RankCertificate silverman_meadows_qc(const TimePeriodicOperator& a, const Matrix& c_ext,
                                     double t, DerivativeMode mode = DerivativeMode::Auto);

}  // namespace adstab
