#pragma once

#include <array>
#include <optional>
#include <vector>

#include "adstab/gain_library.hpp"
#include "adstab/linalg.hpp"
#include "adstab/riccati.hpp"
#include "adstab/system.hpp"

namespace adstab {

// ---------------------------------------------------------------------------
// Oscillator: A = [[0, 1], [-1, sigma]], B = [0; 1], C = Q = [1, 0].

ControlSystem build_oscillator(double sigma);
/// {i / n1 : -n1 <= i <= n1} in the box [-1, 1].
TrainingSet oscillator_training_set(int n1);

// ---------------------------------------------------------------------------
// Periodic family: A(t) = Psi(t / rho + phi) [[0, 1], [1, 0]], Psi(s) = 1 + 6 sin(2 pi s),
// B = [0; 1], C = [1, 0], Q = I.

double psi(double s);
/// k-th derivative of Psi.
double psi_derivative(double s, int k);

ControlSystem build_periodic(double rho, double phi);
inline ControlSystem build_periodic(const Parameter& sigma) { return build_periodic(sigma(0), sigma(1)); }
/// {(1 + i1 / (2 n1), i2 / n2) : -n1 <= i1 <= n1, 0 <= i2 < n2}, i2 fastest, box [0.5, 1.5] x [0, 1).
TrainingSet periodic_training_set(int n1, int n2);
/// Solve only the phi = 0 members; (rho, phi) reuses (rho, 0) shifted by rho * phi.
std::vector<std::optional<ShiftReuse>> periodic_shift_plan(const TrainingSet& set);

// ---------------------------------------------------------------------------
// Parabolic model on the unit square: vertex-centred finite differences, Neumann boundary by
// ghost-node reflection, levels refined by a factor 2.

struct ActuatorBox {
  double x0, x1, y0, y1;
};

struct ParabolicConfig {
  /// Nodes per side on level 0.
  int coarse_nodes = 9;
  double nu = 0.1;
  /// Number of Neumann eigenfunctions in the output.
  int outputs = 3;
  std::vector<ActuatorBox> actuators = {
      {0.1, 0.3, 0.1, 0.3}, {0.7, 0.9, 0.1, 0.3}, {0.1, 0.3, 0.7, 0.9}, {0.7, 0.9, 0.7, 0.9}};
};

struct ParabolicGrid {
  int level = 0;
  int nodes = 0;  // per side
  double h = 0.0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(nodes) * nodes; }
  Eigen::Index index(int i, int j) const { return static_cast<Eigen::Index>(j) * nodes + i; }
  double x(int i) const { return i * h; }
  /// Trapezoidal quadrature weights (discrete L2 inner product).
  Vector weights() const;
};

ParabolicGrid parabolic_grid(int level, const ParabolicConfig& cfg = {});

/// Neumann Laplacian; row sums vanish and W * Lap is symmetric for the trapezoidal weights W.
SparseMatrix neumann_laplacian(const ParabolicGrid& grid);
/// Centred first differences d/dx1, d/dx2 with reflected ghost nodes.
SparseMatrix gradient_x(const ParabolicGrid& grid);
SparseMatrix gradient_y(const ParabolicGrid& grid);
Vector convection_field(double sigma);

/// (j, k) index pairs of cos(j pi x1) cos(k pi x2), ordered by eigenvalue j^2 + k^2, ties by k.
std::vector<std::array<int, 2>> neumann_modes(int count);
/// Rows: weighted inner products with the first `count` eigenfunctions, each normalized
/// to unit discrete norm.
Matrix eigenfunction_outputs(const ParabolicGrid& grid, int count);
Matrix actuator_matrix(const ParabolicGrid& grid, const std::vector<ActuatorBox>& boxes);

/// A(t) = nu Lap - I + (1 + 5 sin 2 pi t) diag(1 + x1) - b_sigma . grad on level `level`;
/// gains act on level `gain_level` through injection. Q = I on the grid.
ControlSystem build_parabolic(double sigma, int level, const ParabolicConfig& cfg = {},
                              int gain_level = 0);
/// y0(x) = 1 - 3 x1 sin(x1).
Vector parabolic_initial_state(int level, const ParabolicConfig& cfg = {});
/// {i 2 pi / count : 0 <= i < count} in [0, 2 pi).
TrainingSet parabolic_training_set(int count = 8);

/// Bilinear interpolation from level `from` to the finer level `to`.
SparseMatrix prolongation(int from, int to, const ParabolicConfig& cfg = {});
/// Injection from level `from` to the coarser level `to`.
SparseMatrix restriction(int from, int to, const ParabolicConfig& cfg = {});
Vector prolong(const Vector& field, int from, int to, const ParabolicConfig& cfg = {});
Vector restrict_field(const Vector& field, int from, int to, const ParabolicConfig& cfg = {});

// ---------------------------------------------------------------------------
// Ensemble system for the robust feedback.

enum class EnsembleWeight {
  /// (1/N) E C^T C E^T.
  Output,
  /// (1/N) E Q^T Q E^T.
  Riccati,
};

struct EnsembleSystem {
  std::vector<Parameter> candidates;
  ControlSystem extended;
  /// E = [I; ...; I] (nN x n).
  Matrix replication;
  Matrix b;  // member B
  Eigen::Index member_dim = 0;
};

EnsembleSystem build_ensemble(const std::vector<ControlSystem>& members,
                              EnsembleWeight weight = EnsembleWeight::Output);
/// K(t) = -B^T E^T Pi(t) E on the solution mesh.
GainSchedule robust_schedule(const EnsembleSystem& ensemble, const RiccatiSolution& solution);

}  // namespace adstab
