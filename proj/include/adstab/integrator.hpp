#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "adstab/linalg.hpp"
#include "adstab/system.hpp"

namespace adstab {

enum class Scheme { ExplicitEuler, CrankNicolson, CNAB };

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct IntegratorConfig {
  Scheme scheme = Scheme::CNAB;
  double dt = 1e-3;
};

/// Feedback gain as a function of time (m x gain_dim). An empty function means u = 0.
using GainFunction = std::function<Matrix(double)>;

/// Threshold on |y| past which integration aborts with BlowUpError.
inline constexpr double kBlowUpNorm = 1e12;

/// Number of steps of length ~dt covering `horizon`; the horizon is kept exact and the
/// step is adjusted (relative change below 1e-9 whenever dt divides the horizon).
long snap_steps(double horizon, double dt);

struct RecordOptions {
  /// Keep every `stride`-th step (the final step is always kept).
  long stride = 1;
  bool keep_state = true;
};

struct Trajectory {
  std::vector<double> t;
  Matrix y;  // n x samples (empty unless keep_state)
  Matrix u;  // m x samples
  Matrix z;  // p x samples
  std::vector<double> norm;
  /// Trapezoidal integral of |z|^2 + |u|^2 over every integrator step.
  double cost = 0.0;
  Vector final_state;
  double final_time = 0.0;
  long steps = 0;
  double step = 0.0;

  std::size_t samples() const { return t.size(); }
  /// CSV: t, y_1..y_n, u_1..u_m, z_1..z_p, norm_y with 15 significant digits.
  void write_csv(std::ostream& os) const;
};

Trajectory integrate_closed_loop(const ControlSystem& sys, const GainFunction& gain,
                                 const Vector& y0, double t0, double t1,
                                 const IntegratorConfig& cfg, const RecordOptions& rec = {});

/// I + xi * A_K.
Matrix explicit_euler_transition(const Matrix& closed_loop, double xi);

/// State transition matrix of dy/dt = (A(t) + B K(t) R) y over [t0, t1] (Crank-Nicolson,
/// coefficients at step midpoints).
Matrix transition_matrix(const ControlSystem& sys, const GainFunction& gain, double t0,
                         double t1, double dt);

}  // namespace adstab
