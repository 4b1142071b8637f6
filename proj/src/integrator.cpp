#include "adstab/integrator.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include <Eigen/LU>
#include <Eigen/SparseLU>

namespace adstab {

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::ExplicitEuler: return "euler";
    case Scheme::CrankNicolson: return "cn";
    case Scheme::CNAB: return "cnab";
  }
  return "cnab";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "euler" || name == "explicit-euler") return Scheme::ExplicitEuler;
  if (name == "cn" || name == "crank-nicolson") return Scheme::CrankNicolson;
  if (name == "cnab") return Scheme::CNAB;
  throw std::invalid_argument("unknown integration scheme '" + name + "'");
}

long snap_steps(double horizon, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("integration horizon must be positive");
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) <= 1e-9 * ratio) return std::max(1L, static_cast<long>(rounded));
  return std::max(1L, static_cast<long>(std::ceil(ratio)));
}

Matrix explicit_euler_transition(const Matrix& closed_loop, double xi) {
  require_dims(closed_loop.rows() == closed_loop.cols(), "closed-loop matrix must be square");
  return Matrix::Identity(closed_loop.rows(), closed_loop.cols()) + xi * closed_loop;
}

namespace {

class Stepper {
 public:
  Stepper(const ControlSystem& sys, const GainFunction& gain, double h)
      : sys_(sys), gain_(gain), h_(h), n_(sys.n()) {
    if (sys_.implicit_part.size() != 0) {
      SparseMatrix eye(n_, n_);
      eye.setIdentity();
      SparseMatrix lhs = eye - 0.5 * h_ * sys_.implicit_part;
      lhs.makeCompressed();
      implicit_lu_.analyzePattern(lhs);
      implicit_lu_.factorize(lhs);
      if (implicit_lu_.info() != Eigen::Success) {
        throw NumericalError("implicit CNAB operator is singular");
      }
      has_implicit_ = true;
    }
  }

  Matrix gain_at(double t) const { return gain_ ? gain_(t) : Matrix(); }

  Vector input(const Matrix& k, const Vector& y) const {
    if (k.size() == 0) return Vector::Zero(sys_.m());
    return k * sys_.restrict_for_gain(y);
  }

  Vector implicit_apply(const Vector& y) const {
    if (!has_implicit_) return Vector::Zero(n_);
    return sys_.implicit_part * y;
  }

  Vector implicit_solve(const Vector& rhs) const {
    if (!has_implicit_) return rhs;
    return implicit_lu_.solve(rhs);
  }

  // Explicit part of the dynamics: (A(t) - L) y + B K R y.
  Vector explicit_rhs(double t, const Matrix& k, const Vector& y) const {
    Vector g = sys_.A.apply(t, y) - implicit_apply(y);
    if (k.size() != 0) g.noalias() += sys_.B * input(k, y);
    return g;
  }

  Vector euler(double t, const Vector& y) const {
    return explicit_euler_transition(sys_.closed_loop(t, gain_at(t)), h_) * y;
  }

  Vector crank_nicolson_dense(double t, const Vector& y) const {
    const Matrix m = sys_.closed_loop(t + 0.5 * h_, gain_at(t + 0.5 * h_));
    const Matrix eye = Matrix::Identity(n_, n_);
    Eigen::PartialPivLU<Matrix> lu(eye - 0.5 * h_ * m);
    return lu.solve(y + 0.5 * h_ * (m * y));
  }

  // Crank-Nicolson step solved by fixed-point iteration preconditioned with the implicit
  // part; falls back to a dense solve when the iteration stalls.
  Vector crank_nicolson_iterative(double t, const Vector& y) const {
    const double tm = t + 0.5 * h_;
    const Matrix k = gain_at(tm);
    const Vector base = y + 0.5 * h_ * (implicit_apply(y) + explicit_rhs(tm, k, y));
    Vector next = y;
    for (int it = 0; it < 60; ++it) {
      Vector candidate = implicit_solve(base + 0.5 * h_ * explicit_rhs(tm, k, next));
      const double change = (candidate - next).norm();
      next = std::move(candidate);
      if (change <= 1e-15 * std::max(next.norm(), 1e-300)) return next;
    }
    return crank_nicolson_dense(t, y);
  }

  Vector cnab(const Vector& y, const Vector& g_now, const Vector& g_prev) const {
    const Vector rhs = y + 0.5 * h_ * implicit_apply(y) + h_ * (1.5 * g_now - 0.5 * g_prev);
    return implicit_solve(rhs);
  }

 private:
  const ControlSystem& sys_;
  const GainFunction& gain_;
  double h_;
  Eigen::Index n_;
  bool has_implicit_ = false;
  Eigen::SparseLU<SparseMatrix> implicit_lu_;
};

}  // namespace

Trajectory integrate_closed_loop(const ControlSystem& sys, const GainFunction& gain,
                                 const Vector& y0, double t0, double t1,
                                 const IntegratorConfig& cfg, const RecordOptions& rec) {
  require_dims(y0.size() == sys.n(), "initial state must have length n");
  if (!(t1 > t0)) throw std::invalid_argument("integration needs t1 > t0");
  if (rec.stride < 1) throw std::invalid_argument("record stride must be >= 1");
  if (!y0.allFinite()) throw BlowUpError(t0, std::numeric_limits<double>::infinity());

  const long steps = snap_steps(t1 - t0, cfg.dt);
  const double h = (t1 - t0) / static_cast<double>(steps);
  Stepper stepper(sys, gain, h);

  Trajectory traj;
  traj.steps = steps;
  traj.step = h;
  const long samples = steps / rec.stride + 1 + ((steps % rec.stride) != 0 ? 1 : 0);
  traj.t.reserve(static_cast<std::size_t>(samples));
  traj.norm.reserve(static_cast<std::size_t>(samples));
  if (rec.keep_state) traj.y.resize(sys.n(), samples);
  traj.u.resize(sys.m(), samples);
  traj.z.resize(sys.p(), samples);

  Eigen::Index column = 0;
  auto record = [&](double t, const Vector& y, const Vector& u, const Vector& z) {
    traj.t.push_back(t);
    traj.norm.push_back(sys.norm(y));
    if (rec.keep_state) traj.y.col(column) = y;
    traj.u.col(column) = u;
    traj.z.col(column) = z;
    ++column;
  };

  Vector y = y0;
  Matrix k_now = stepper.gain_at(t0);
  Vector u = stepper.input(k_now, y);
  Vector z = sys.C * y;
  double running = z.squaredNorm() + u.squaredNorm();
  record(t0, y, u, z);

  Vector g_prev;
  Vector g_now;
  for (long step = 0; step < steps; ++step) {
    const double t = t0 + static_cast<double>(step) * h;
    switch (cfg.scheme) {
      case Scheme::ExplicitEuler:
        y = stepper.euler(t, y);
        break;
      case Scheme::CrankNicolson:
        y = stepper.crank_nicolson_dense(t, y);
        break;
      case Scheme::CNAB:
        g_now = stepper.explicit_rhs(t, k_now, y);
        if (step == 0) {
          y = stepper.crank_nicolson_iterative(t, y);
        } else {
          y = stepper.cnab(y, g_now, g_prev);
        }
        g_prev = std::move(g_now);
        break;
    }
    const double t_next = (step + 1 == steps) ? t1 : t0 + static_cast<double>(step + 1) * h;
    const double norm = sys.norm(y);
    if (!std::isfinite(norm) || norm > kBlowUpNorm) throw BlowUpError(t_next, norm);

    k_now = stepper.gain_at(t_next);
    u = stepper.input(k_now, y);
    z.noalias() = sys.C * y;
    const double next_running = z.squaredNorm() + u.squaredNorm();
    traj.cost += 0.5 * h * (running + next_running);
    running = next_running;
    if ((step + 1) % rec.stride == 0 || step + 1 == steps) record(t_next, y, u, z);
  }

  traj.final_state = y;
  traj.final_time = t1;
  if (rec.keep_state) traj.y.conservativeResize(Eigen::NoChange, column);
  traj.u.conservativeResize(Eigen::NoChange, column);
  traj.z.conservativeResize(Eigen::NoChange, column);
  return traj;
}

Matrix transition_matrix(const ControlSystem& sys, const GainFunction& gain, double t0,
                         double t1, double dt) {
  const long steps = snap_steps(t1 - t0, dt);
  const double h = (t1 - t0) / static_cast<double>(steps);
  const Eigen::Index n = sys.n();
  const Matrix eye = Matrix::Identity(n, n);
  Matrix phi = eye;
  for (long step = 0; step < steps; ++step) {
    const double tm = t0 + (static_cast<double>(step) + 0.5) * h;
    const Matrix m = sys.closed_loop(tm, gain ? gain(tm) : Matrix());
    Eigen::PartialPivLU<Matrix> lu(eye - 0.5 * h * m);
    phi = lu.solve(phi + 0.5 * h * (m * phi));
  }
  return phi;
}

void Trajectory::write_csv(std::ostream& os) const {
  const Eigen::Index n = y.rows();
  const Eigen::Index m = u.rows();
  const Eigen::Index p = z.rows();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",y_" << i + 1;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u_" << i + 1;
  for (Eigen::Index i = 0; i < p; ++i) os << ",z_" << i + 1;
  os << ",norm_y\n";
  os << std::setprecision(15);
  for (std::size_t s = 0; s < t.size(); ++s) {
    const auto c = static_cast<Eigen::Index>(s);
    os << t[s];
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << y(i, c);
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << u(i, c);
    for (Eigen::Index i = 0; i < p; ++i) os << ',' << z(i, c);
    os << ',' << norm[s] << '\n';
  }
}

}  // namespace adstab
