#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "adstab/gain_library.hpp"
#include "adstab/integrator.hpp"
#include "adstab/linalg.hpp"
#include "adstab/system.hpp"

namespace adstab {

using Rng = std::mt19937_64;

/// Sampled input and output of one window on an equally spaced mesh.
struct IORecord {
  int window = 0;
  std::vector<double> t;
  Matrix u;  // m x samples
  Matrix z;  // p x samples
};

struct SubsetPolicy {
  /// N_g: uniform random training indices drawn per window (with replacement, de-duplicated).
  int global_count = 0;
  /// Local ball radius around the current estimate.
  double gamma = 0.0;
  /// Use |sigma - sigma_hat|^2 <= gamma instead of |sigma - sigma_hat| <= gamma.
  bool squared_distance = false;
};

struct OnlineConfig {
  double tau = 0.5;
  /// IO nodes per window; 0 means one node per auxiliary integrator step.
  int samples = 0;
  double horizon = 20.0;
  Parameter initial_guess;
  /// eta_mag of the auxiliary initial-state perturbation.
  double noise = 0.0;
  IntegratorConfig truth;
  IntegratorConfig aux;
  std::uint64_t seed = 0;
  int jobs = 1;
  /// Maps the truth state onto the auxiliary state space (empty = identity).
  SparseMatrix state_transfer;
  /// Keep every k-th truth step in the norm history.
  long norm_stride = 1;
};

/// Trapezoidal squared L2 norms of dz and du over a window of length tau, summed.
double comparison_functional(const Matrix& dz, const Matrix& du, double tau);

/// Smallest index attaining the minimum of E (non-finite entries never win unless all are).
std::size_t update_index(const Vector& e);
Parameter update_estimate(const Vector& e, const std::vector<Parameter>& subset);

/// Training indices of Sigma_l (ball around sigma_hat) united with N_g random draws, ascending.
std::vector<std::size_t> select_subset(const TrainingSet& set, const Parameter& sigma_hat,
                                       const SubsetPolicy& policy, Rng& rng);

/// y + eta (v - 0.5), v uniform on [0, 1]^n.
Vector inject_measurement_noise(const Vector& y, double eta, Rng& rng);

struct WindowResult {
  double t0 = 0.0;
  double t1 = 0.0;
  Vector y_new;
  std::size_t estimate = 0;  // training index of sigma_new
  std::vector<std::size_t> subset;
  Vector comparison;
  IORecord truth_io;
  Trajectory truth;
};

/// One window with a frozen gain K_{sigma_hat}: run the truth, run every candidate of the
/// subset from the (possibly perturbed) same initial state, compare IO and pick the new estimate.
/// `candidates[i]` is the auxiliary system for training index i.
WindowResult run_window(const ControlSystem& truth, const std::vector<ControlSystem>& candidates,
                        const FeedbackLibrary& lib, std::size_t estimate,
                        const std::vector<std::size_t>& subset, const Vector& y_old, double t0,
                        double t1, int window, const OnlineConfig& cfg, Rng& rng);

struct DecayFit {
  double zeta = 0.0;
  double mu = 0.0;
};

/// Least-squares fit of log|y| against t: mu = -slope, zeta the smallest constant with
/// |y(t_k)| <= zeta exp(-mu (t_k - t_0)) at every sample.
DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& norms);

struct AdaptiveRunResult {
  std::vector<double> window_start;
  /// Estimate used on each window (the guess before the update) and the one after it.
  std::vector<std::size_t> estimate_before;
  std::vector<std::size_t> estimate_after;
  std::vector<Parameter> estimates;  // parameter values of estimate_after
  std::vector<std::vector<std::size_t>> subsets;
  std::vector<Vector> comparisons;
  std::vector<double> norm_t;
  std::vector<double> norm;
  double cost = 0.0;
  Vector final_state;
  double final_time = 0.0;
  std::optional<DecayFit> decay;
  double max_norm() const;
};

/// Concatenates windows [j tau, (j + 1) tau] up to the horizon.
AdaptiveRunResult run_adaptive(const ControlSystem& truth, const std::vector<ControlSystem>& candidates,
                               const FeedbackLibrary& lib, const Vector& y0,
                               const OnlineConfig& cfg, const SubsetPolicy& policy);

/// Closed loop under one fixed gain function over [0, horizon] (norm history and cost).
Trajectory run_fixed_gain(const ControlSystem& sys, const GainFunction& gain, const Vector& y0,
                          double horizon, const IntegratorConfig& cfg, long stride = 1);

/// Piecewise-constant parameter: values[k] holds on [switch_times[k-1], switch_times[k]).
struct SwitchingSchedule {
  std::vector<Parameter> values;
  std::vector<double> switch_times;

  const Parameter& at(double t) const;
};

/// Entries (parameter, dwell) in order; the last value holds forever.
SwitchingSchedule switching_schedule(const std::vector<std::pair<Parameter, double>>& entries);

/// Plant whose operator follows the schedule; B, C, Q are taken from the first piece.
ControlSystem switched_system(const SwitchingSchedule& schedule,
                              const std::function<ControlSystem(const Parameter&)>& builder);

}  // namespace adstab
