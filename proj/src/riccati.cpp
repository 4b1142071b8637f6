#include "adstab/riccati.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace adstab {

Matrix are_residual(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& pi) {
  const Matrix pb = pi * b;
  return a.transpose() * pi + pi * a - pb * pb.transpose() + q.transpose() * q;
}

std::optional<Matrix> stabilizing_gain(const Matrix& a, const Matrix& b) {
  const Eigen::Index n = a.rows();
  if (is_hurwitz(a)) return Matrix::Zero(b.cols(), n);
  for (double alpha : {1.0, 10.0, 100.0}) {
    Matrix k = -alpha * b.transpose();
    if (is_hurwitz(a + b * k)) return k;
  }
  // Bass: with -(A + beta I) Hurwitz, Z > 0 solves
  // -(A + beta I) Z - Z (A + beta I)^T + 2 B B^T = 0 and A - B B^T Z^{-1} decays at rate beta.
  const double beta = std::max(0.0, spectral_abscissa(-a)) + 1.0;
  const Matrix shifted = -(a + beta * Matrix::Identity(n, n));
  Matrix z;
  try {
    z = solve_lyapunov(shifted.transpose(), 2.0 * b * b.transpose());
  } catch (const NumericalError&) {
    return std::nullopt;
  }
  Eigen::FullPivLU<Matrix> lu(z);
  if (!lu.isInvertible()) return std::nullopt;
  Matrix k = -lu.solve(b).transpose();
  if (k.allFinite() && is_hurwitz(a + b * k)) return k;
  return std::nullopt;
}

RiccatiSolution solve_are(const Matrix& a, const Matrix& b, const Matrix& q,
                          const AreOptions& options) {
  const Eigen::Index n = a.rows();
  require_dims(a.cols() == n, "A must be square");
  require_dims(b.rows() == n, "B must have n rows");
  require_dims(q.cols() == n, "Q must have n columns");

  const auto k0 = stabilizing_gain(a, b);
  if (!k0) throw NotStabilizable("no stabilizing initial gain found for the Newton-Kleinman iteration");

  const Matrix qtq = q.transpose() * q;
  Matrix k = *k0;
  Matrix pi = Matrix::Zero(n, n);
  RiccatiSolution sol;
  sol.mesh = {0.0};
  sol.periodic = false;

  double previous_residual = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const Matrix closed = a + b * k;
    pi = solve_lyapunov(closed, qtq + k.transpose() * k);
    k = -b.transpose() * pi;
    const double residual = are_residual(a, b, q, pi).norm();
    sol.iterations = it;
    sol.residual = residual;
    const double bound = options.tol * (1.0 + pi.squaredNorm());
    if (residual <= bound) break;
    // Newton converges quadratically; once rounding dominates the residual stops shrinking.
    if (residual >= 0.5 * previous_residual) {
      if (++stalled >= 3) break;
    } else {
      stalled = 0;
    }
    previous_residual = residual;
  }
  if (!pi.allFinite() || sol.residual > options.tol * (1.0 + pi.squaredNorm())) {
    throw NonConvergence("Newton-Kleinman iteration did not reach the residual bound");
  }
  sol.values = {pi};
  return sol;
}

Matrix RiccatiSolution::at(double t) const {
  if (values.empty()) throw std::logic_error("empty Riccati solution");
  if (values.size() == 1 || !periodic) return values.front();
  double r = std::fmod(t, period);
  if (r < 0.0) r += period;
  const auto it = std::upper_bound(mesh.begin(), mesh.end(), r);
  const std::size_t hi = static_cast<std::size_t>(it - mesh.begin());
  const std::size_t lo = hi - 1;
  const double t_lo = mesh[lo];
  const double t_hi = hi < mesh.size() ? mesh[hi] : period;
  const Matrix& v_hi = hi < mesh.size() ? values[hi] : values.front();
  const double w = (r - t_lo) / (t_hi - t_lo);
  return (1.0 - w) * values[lo] + w * v_hi;
}

RiccatiSolution solve_periodic_riccati(const ControlSystem& sys,
                                       const PeriodicRiccatiOptions& options) {
  sys.validate();
  const Eigen::Index n = sys.n();
  const double rho = sys.A.autonomous() ? 1.0 : sys.A.period();
  if (!std::isfinite(rho)) throw std::invalid_argument("periodic Riccati needs a finite period");
  const long steps = snap_steps(rho, options.dt);
  const double h = rho / static_cast<double>(steps);

  const Matrix qtq = sys.Q.transpose() * sys.Q;
  const Matrix g = sys.B * sys.B.transpose();
  const Matrix eye = Matrix::Identity(n, n);

  Matrix terminal;
  if (options.terminal) {
    terminal = *options.terminal;
  } else {
    try {
      terminal = solve_are(sys.A.evaluate(0.0), sys.B, sys.Q).values.front();
    } catch (const NumericalError&) {
      terminal = qtq;
    }
  }
  require_dims(terminal.rows() == n && terminal.cols() == n, "terminal seed must be n x n");

  // A at the step midpoints is the same for every sweep.
  std::vector<Matrix> a_mid(static_cast<std::size_t>(steps));
  for (long j = 0; j < steps; ++j) {
    a_mid[static_cast<std::size_t>(j)] = sys.A.evaluate((static_cast<double>(j) + 0.5) * h);
  }

  RiccatiSolution sol;
  sol.periodic = true;
  sol.period = rho;
  sol.mesh.resize(static_cast<std::size_t>(steps));
  for (long j = 0; j < steps; ++j) sol.mesh[static_cast<std::size_t>(j)] = static_cast<double>(j) * h;
  sol.values.assign(static_cast<std::size_t>(steps), Matrix());

  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    Matrix next = terminal;
    for (long j = steps - 1; j >= 0; --j) {
      const Matrix& am = a_mid[static_cast<std::size_t>(j)];
      const Matrix m = am - g * next;
      const Matrix lhs = 0.5 * h * m - 0.5 * eye;
      const Matrix rhs = next + 0.5 * h * (am.transpose() * next + next * am) + h * qtq;
      next = solve_lyapunov(lhs, rhs);
      if (!next.allFinite()) throw NonConvergence("periodic Riccati sweep produced non-finite values");
      sol.values[static_cast<std::size_t>(j)] = next;
    }
    const double change = (sol.values.front() - terminal).norm();
    sol.iterations = sweep;
    sol.periodicity_gap = change;
    if (change <= options.tol * std::max(1.0, sol.values.front().norm())) return sol;
    terminal = sol.values.front();
  }
  throw NonConvergence("periodic Riccati sweeps hit the sweep cap");
}

GainFunction riccati_gain(const Matrix& b, const RiccatiSolution& solution) {
  return [b, solution](double t) -> Matrix { return -b.transpose() * solution.at(t); };
}

Matrix closed_loop_monodromy(const ControlSystem& sys, const RiccatiSolution& solution, double dt) {
  const double rho = solution.periodic ? solution.period : 1.0;
  return transition_matrix(sys, riccati_gain(sys.B, solution), 0.0, rho, dt);
}

Matrix controllability_matrix(const Matrix& a, const Matrix& b) {
  const Eigen::Index n = a.rows();
  require_dims(a.cols() == n && b.rows() == n, "controllability needs square A and n-row B");
  Matrix ctrb(n, n * b.cols());
  if (n == 0) return ctrb;
  ctrb.leftCols(b.cols()) = b;
  for (Eigen::Index i = 1; i < n; ++i) {
    ctrb.middleCols(i * b.cols(), b.cols()) = a * ctrb.middleCols((i - 1) * b.cols(), b.cols());
  }
  return ctrb;
}

bool kalman_rank(const Matrix& a, const Matrix& b) {
  return numerical_rank(controllability_matrix(a, b)).rank == a.rows();
}

}  // namespace adstab
