#include "adstab/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace adstab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

SparseMatrix sparse_identity(Eigen::Index n) {
  SparseMatrix eye(n, n);
  eye.setIdentity();
  return eye;
}

ParameterBox box1(double lo, double hi) {
  return ParameterBox{Vector::Constant(1, lo), Vector::Constant(1, hi)};
}

// sin(2 pi s) and its derivatives: (2 pi)^k sin(2 pi s + k pi / 2).
double sine_derivative(double s, int k) {
  return std::pow(kTwoPi, k) * std::sin(kTwoPi * s + 0.5 * k * std::numbers::pi);
}

}  // namespace

// ---------------------------------------------------------------------------
// Oscillator

ControlSystem build_oscillator(double sigma) {
  Matrix a(2, 2);
  a << 0.0, 1.0, -1.0, sigma;
  ControlSystem sys;
  sys.A = TimePeriodicOperator::constant(a);
  sys.B = (Matrix(2, 1) << 0.0, 1.0).finished();
  sys.C = (Matrix(1, 2) << 1.0, 0.0).finished();
  sys.Q = sys.C;
  sys.sigma = Parameter::Constant(1, sigma);
  sys.box = box1(-1.0, 1.0);
  sys.implicit_part = a.sparseView();
  sys.label = "oscillator";
  return sys;
}

TrainingSet oscillator_training_set(int n1) {
  if (n1 < 1) throw std::invalid_argument("oscillator grid needs N1 >= 1");
  TrainingSet set;
  set.box = box1(-1.0, 1.0);
  for (int i = -n1; i <= n1; ++i) {
    set.points.push_back(Parameter::Constant(1, static_cast<double>(i) / n1));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Periodic family

double psi(double s) { return 1.0 + 6.0 * std::sin(kTwoPi * s); }

double psi_derivative(double s, int k) {
  if (k == 0) return psi(s);
  return 6.0 * sine_derivative(s, k);
}

ControlSystem build_periodic(double rho, double phi) {
  if (!(rho > 0.0)) throw std::invalid_argument("period rho must be positive");
  Matrix swap(2, 2);
  swap << 0.0, 1.0, 1.0, 0.0;
  Coefficient coeff;
  coeff.value = [rho, phi](double t) { return psi(t / rho + phi); };
  coeff.derivative = [rho, phi](double t, int k) {
    return psi_derivative(t / rho + phi, k) / std::pow(rho, k);
  };
  ControlSystem sys;
  sys.A = TimePeriodicOperator::affine({{coeff, swap.sparseView()}}, rho);
  sys.B = (Matrix(2, 1) << 0.0, 1.0).finished();
  sys.C = (Matrix(1, 2) << 1.0, 0.0).finished();
  sys.Q = Matrix::Identity(2, 2);
  sys.sigma = (Parameter(2) << rho, phi).finished();
  sys.label = "periodic";
  return sys;
}

TrainingSet periodic_training_set(int n1, int n2) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("periodic grid needs N1, N2 >= 1");
  TrainingSet set;
  set.box = ParameterBox{(Vector(2) << 0.5, 0.0).finished(), (Vector(2) << 1.5, 1.0).finished()};
  for (int i1 = -n1; i1 <= n1; ++i1) {
    for (int i2 = 0; i2 < n2; ++i2) {
      set.points.push_back((Parameter(2) << 1.0 + static_cast<double>(i1) / (2.0 * n1),
                            static_cast<double>(i2) / n2)
                               .finished());
    }
  }
  return set;
}

std::vector<std::optional<ShiftReuse>> periodic_shift_plan(const TrainingSet& set) {
  std::vector<std::optional<ShiftReuse>> plan(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Parameter& s = set[i];
    require_dims(s.size() == 2, "periodic parameters are (rho, phi)");
    if (s(1) == 0.0) continue;
    for (std::size_t j = 0; j < set.size(); ++j) {
      if (set[j](0) == s(0) && set[j](1) == 0.0) {
        plan[i] = ShiftReuse{j, s(0) * s(1)};
        break;
      }
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Parabolic model

Vector ParabolicGrid::weights() const {
  Vector w1 = Vector::Constant(nodes, h);
  w1(0) *= 0.5;
  w1(nodes - 1) *= 0.5;
  Vector w(size());
  for (int j = 0; j < nodes; ++j) {
    for (int i = 0; i < nodes; ++i) w(index(i, j)) = w1(i) * w1(j);
  }
  return w;
}

ParabolicGrid parabolic_grid(int level, const ParabolicConfig& cfg) {
  if (level < 0 || level > 6) throw std::invalid_argument("refinement level must be in 0..6");
  if (cfg.coarse_nodes < 2) throw std::invalid_argument("coarse grid needs at least 2 nodes per side");
  ParabolicGrid g;
  g.level = level;
  g.nodes = (cfg.coarse_nodes - 1) * (1 << level) + 1;
  g.h = 1.0 / (g.nodes - 1);
  return g;
}

namespace {

// One-dimensional stencil rows with ghost reflection u_{-1} = u_1, u_{N} = u_{N-2}.
template <typename Emit>
void second_difference_1d(int nodes, double h, Emit&& emit) {
  const double s = 1.0 / (h * h);
  for (int i = 0; i < nodes; ++i) {
    if (i == 0) {
      emit(i, 0, -2.0 * s);
      emit(i, 1, 2.0 * s);
    } else if (i == nodes - 1) {
      emit(i, nodes - 2, 2.0 * s);
      emit(i, nodes - 1, -2.0 * s);
    } else {
      emit(i, i - 1, s);
      emit(i, i, -2.0 * s);
      emit(i, i + 1, s);
    }
  }
}

template <typename Emit>
void first_difference_1d(int nodes, double h, Emit&& emit) {
  const double s = 0.5 / h;
  // Boundary rows vanish: reflection makes the centred difference zero there.
  for (int i = 1; i + 1 < nodes; ++i) {
    emit(i, i - 1, -s);
    emit(i, i + 1, s);
  }
}

SparseMatrix from_triplets(Eigen::Index n, const std::vector<Eigen::Triplet<double>>& trip) {
  SparseMatrix m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

}  // namespace

SparseMatrix neumann_laplacian(const ParabolicGrid& g) {
  std::vector<Eigen::Triplet<double>> trip;
  const int n = g.nodes;
  for (int j = 0; j < n; ++j) {
    second_difference_1d(n, g.h, [&](int i, int k, double v) {
      trip.emplace_back(g.index(i, j), g.index(k, j), v);
    });
  }
  for (int i = 0; i < n; ++i) {
    second_difference_1d(n, g.h, [&](int j, int k, double v) {
      trip.emplace_back(g.index(i, j), g.index(i, k), v);
    });
  }
  return from_triplets(g.size(), trip);
}

SparseMatrix gradient_x(const ParabolicGrid& g) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int j = 0; j < g.nodes; ++j) {
    first_difference_1d(g.nodes, g.h, [&](int i, int k, double v) {
      trip.emplace_back(g.index(i, j), g.index(k, j), v);
    });
  }
  return from_triplets(g.size(), trip);
}

SparseMatrix gradient_y(const ParabolicGrid& g) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < g.nodes; ++i) {
    first_difference_1d(g.nodes, g.h, [&](int j, int k, double v) {
      trip.emplace_back(g.index(i, j), g.index(i, k), v);
    });
  }
  return from_triplets(g.size(), trip);
}

Vector convection_field(double sigma) {
  return (Vector(2) << -0.5 * std::cos(sigma), std::sin(sigma)).finished();
}

std::vector<std::array<int, 2>> neumann_modes(int count) {
  if (count < 0) throw std::invalid_argument("mode count must be nonnegative");
  std::vector<std::array<int, 2>> modes;
  int radius = 0;
  while (static_cast<int>(modes.size()) < count) {
    // All pairs with j^2 + k^2 <= radius^2 form a prefix of the ordering once radius is large.
    ++radius;
    modes.clear();
    for (int j = 0; j <= radius; ++j) {
      for (int k = 0; k <= radius; ++k) {
        if (j * j + k * k <= radius * radius) modes.push_back({j, k});
      }
    }
  }
  std::stable_sort(modes.begin(), modes.end(), [](const auto& a, const auto& b) {
    const int ea = a[0] * a[0] + a[1] * a[1];
    const int eb = b[0] * b[0] + b[1] * b[1];
    if (ea != eb) return ea < eb;
    if (a[1] != b[1]) return a[1] < b[1];
    return a[0] < b[0];
  });
  modes.resize(static_cast<std::size_t>(count));
  return modes;
}

Matrix eigenfunction_outputs(const ParabolicGrid& g, int count) {
  const auto modes = neumann_modes(count);
  const Vector w = g.weights();
  Matrix c(count, g.size());
  for (int r = 0; r < count; ++r) {
    Vector e(g.size());
    for (int j = 0; j < g.nodes; ++j) {
      for (int i = 0; i < g.nodes; ++i) {
        e(g.index(i, j)) = std::cos(modes[r][0] * std::numbers::pi * g.x(i)) *
                           std::cos(modes[r][1] * std::numbers::pi * g.x(j));
      }
    }
    e /= std::sqrt((w.array() * e.array().square()).sum());
    c.row(r) = (w.array() * e.array()).matrix().transpose();
  }
  return c;
}

Matrix actuator_matrix(const ParabolicGrid& g, const std::vector<ActuatorBox>& boxes) {
  Matrix b = Matrix::Zero(g.size(), static_cast<Eigen::Index>(boxes.size()));
  const double tol = 1e-12;
  for (std::size_t a = 0; a < boxes.size(); ++a) {
    const auto& bx = boxes[a];
    for (int j = 0; j < g.nodes; ++j) {
      for (int i = 0; i < g.nodes; ++i) {
        const double x = g.x(i);
        const double y = g.x(j);
        if (x >= bx.x0 - tol && x <= bx.x1 + tol && y >= bx.y0 - tol && y <= bx.y1 + tol) {
          b(g.index(i, j), static_cast<Eigen::Index>(a)) = 1.0;
        }
      }
    }
    if (b.col(static_cast<Eigen::Index>(a)).sum() == 0.0) {
      throw std::invalid_argument("actuator box contains no grid node");
    }
  }
  return b;
}

ControlSystem build_parabolic(double sigma, int level, const ParabolicConfig& cfg, int gain_level) {
  if (gain_level < 0 || gain_level > level) {
    throw std::invalid_argument("gain level must lie between 0 and the simulation level");
  }
  if (cfg.outputs < 1) throw std::invalid_argument("parabolic output count must be positive");
  const ParabolicGrid g = parabolic_grid(level, cfg);
  const Eigen::Index n = g.size();

  const SparseMatrix lap = neumann_laplacian(g);
  const Vector b = convection_field(sigma);
  const SparseMatrix diffusion = cfg.nu * lap - sparse_identity(n);
  SparseMatrix fixed = diffusion - b(0) * gradient_x(g) - b(1) * gradient_y(g);
  fixed.makeCompressed();

  Vector profile(n);
  for (int j = 0; j < g.nodes; ++j) {
    for (int i = 0; i < g.nodes; ++i) profile(g.index(i, j)) = 1.0 + g.x(i);
  }
  SparseMatrix reaction(n, n);
  reaction.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Eigen::Index k = 0; k < n; ++k) reaction.insert(k, k) = profile(k);
  reaction.makeCompressed();

  Coefficient pulse;
  pulse.value = [](double t) { return 1.0 + 5.0 * std::sin(kTwoPi * t); };
  pulse.derivative = [](double t, int k) { return 5.0 * sine_derivative(t, k); };

  ControlSystem sys;
  sys.A = TimePeriodicOperator::affine({{Coefficient::constant(1.0), fixed}, {pulse, reaction}}, 1.0);
  sys.B = actuator_matrix(g, cfg.actuators);
  sys.C = eigenfunction_outputs(g, cfg.outputs);
  sys.Q = Matrix::Identity(n, n);
  sys.sigma = Parameter::Constant(1, sigma);
  sys.box = box1(0.0, kTwoPi);
  sys.implicit_part = diffusion;
  sys.norm_weights = g.weights();
  if (gain_level < level) sys.feedback_restriction = restriction(level, gain_level, cfg);
  sys.label = "parabolic/L" + std::to_string(level);
  return sys;
}

Vector parabolic_initial_state(int level, const ParabolicConfig& cfg) {
  const ParabolicGrid g = parabolic_grid(level, cfg);
  Vector y(g.size());
  for (int j = 0; j < g.nodes; ++j) {
    for (int i = 0; i < g.nodes; ++i) y(g.index(i, j)) = 1.0 - 3.0 * g.x(i) * std::sin(g.x(i));
  }
  return y;
}

TrainingSet parabolic_training_set(int count) {
  if (count < 1) throw std::invalid_argument("parabolic training set needs at least one point");
  TrainingSet set;
  set.box = box1(0.0, kTwoPi);
  for (int i = 0; i < count; ++i) {
    set.points.push_back(Parameter::Constant(1, i * kTwoPi / count));
  }
  return set;
}

SparseMatrix prolongation(int from, int to, const ParabolicConfig& cfg) {
  if (to < from) throw std::invalid_argument("prolongation goes from a coarse to a finer level");
  const ParabolicGrid coarse = parabolic_grid(from, cfg);
  const ParabolicGrid fine = parabolic_grid(to, cfg);
  const int f = 1 << (to - from);
  std::vector<Eigen::Triplet<double>> trip;
  auto split = [&](int I, int& lo, double& frac) {
    lo = std::min(I / f, coarse.nodes - 2);
    frac = static_cast<double>(I - lo * f) / f;
  };
  for (int J = 0; J < fine.nodes; ++J) {
    int j0;
    double fy;
    split(J, j0, fy);
    for (int I = 0; I < fine.nodes; ++I) {
      int i0;
      double fx;
      split(I, i0, fx);
      const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
      const Eigen::Index c[4] = {coarse.index(i0, j0), coarse.index(i0 + 1, j0),
                                 coarse.index(i0, j0 + 1), coarse.index(i0 + 1, j0 + 1)};
      for (int k = 0; k < 4; ++k) {
        if (w[k] != 0.0) trip.emplace_back(fine.index(I, J), c[k], w[k]);
      }
    }
  }
  SparseMatrix p(fine.size(), coarse.size());
  p.setFromTriplets(trip.begin(), trip.end());
  p.makeCompressed();
  return p;
}

SparseMatrix restriction(int from, int to, const ParabolicConfig& cfg) {
  if (to > from) throw std::invalid_argument("restriction goes from a fine to a coarser level");
  const ParabolicGrid fine = parabolic_grid(from, cfg);
  const ParabolicGrid coarse = parabolic_grid(to, cfg);
  const int f = 1 << (from - to);
  std::vector<Eigen::Triplet<double>> trip;
  for (int j = 0; j < coarse.nodes; ++j) {
    for (int i = 0; i < coarse.nodes; ++i) {
      trip.emplace_back(coarse.index(i, j), fine.index(i * f, j * f), 1.0);
    }
  }
  SparseMatrix r(coarse.size(), fine.size());
  r.setFromTriplets(trip.begin(), trip.end());
  r.makeCompressed();
  return r;
}

Vector prolong(const Vector& field, int from, int to, const ParabolicConfig& cfg) {
  const SparseMatrix p = prolongation(from, to, cfg);
  require_dims(field.size() == p.cols(), "field does not live on the source level");
  return p * field;
}

Vector restrict_field(const Vector& field, int from, int to, const ParabolicConfig& cfg) {
  const SparseMatrix r = restriction(from, to, cfg);
  require_dims(field.size() == r.cols(), "field does not live on the source level");
  return r * field;
}

// ---------------------------------------------------------------------------
// Ensemble

EnsembleSystem build_ensemble(const std::vector<ControlSystem>& members, EnsembleWeight weight) {
  if (members.empty()) throw std::invalid_argument("ensemble needs at least one member");
  const ControlSystem& first = members.front();
  const Eigen::Index n = first.n();
  const auto count = static_cast<Eigen::Index>(members.size());
  std::vector<TimePeriodicOperator> blocks;
  EnsembleSystem ens;
  for (const auto& m : members) {
    require_dims(m.n() == n && m.B.rows() == first.B.rows() && m.B.cols() == first.B.cols() &&
                     m.C.rows() == first.C.rows(),
                 "ensemble members must share n, m and p");
    if (m.B != first.B || m.C != first.C || m.Q != first.Q) {
      throw DimensionError("ensemble members must share B, C and Q");
    }
    blocks.push_back(m.A);
    ens.candidates.push_back(m.sigma);
  }
  ens.member_dim = n;
  ens.b = first.B;
  ens.replication = Matrix(n * count, n);
  for (Eigen::Index i = 0; i < count; ++i) {
    ens.replication.middleRows(i * n, n) = Matrix::Identity(n, n);
  }
  const Matrix et = ens.replication.transpose();
  const Matrix& weight_rows = weight == EnsembleWeight::Output ? first.C : first.Q;

  ControlSystem& ext = ens.extended;
  ext.A = TimePeriodicOperator::block_diagonal(blocks);
  ext.B = ens.replication * first.B;
  ext.C = first.C * et;
  ext.Q = weight_rows * et / std::sqrt(static_cast<double>(count));
  ext.sigma = Parameter(0);
  ext.label = "ensemble";
  return ens;
}

GainSchedule robust_schedule(const EnsembleSystem& ens, const RiccatiSolution& solution) {
  GainSchedule sched;
  sched.sigma = Parameter(0);
  sched.period = solution.periodic ? solution.period : 1.0;
  sched.periodic = solution.periodic;
  sched.mesh = solution.mesh;
  const Matrix left = -ens.b.transpose() * ens.replication.transpose();
  for (const auto& pi : solution.values) sched.gains.push_back(left * pi * ens.replication);
  return sched;
}

}  // namespace adstab
