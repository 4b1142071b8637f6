#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "adstab/integrator.hpp"
#include "adstab/linalg.hpp"
#include "adstab/riccati.hpp"
#include "adstab/system.hpp"

namespace adstab {

class UnknownParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A Riccati solve failed for one training parameter; the whole build is aborted.
class LibraryBuildError : public NumericalError {
 public:
  LibraryBuildError(std::size_t index, Parameter sigma, const std::string& cause);
  std::size_t index() const { return index_; }
  const Parameter& sigma() const { return sigma_; }

 private:
  std::size_t index_;
  Parameter sigma_;
};

/// Ordered, pairwise distinct parameters with an optional enclosing box.
struct TrainingSet {
  std::vector<Parameter> points;
  std::optional<ParameterBox> box;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  Eigen::Index dim() const { return points.empty() ? 0 : points.front().size(); }
  const Parameter& operator[](std::size_t i) const { return points[i]; }

  /// Throws on empty sets, mixed dimensions, duplicates or points outside the box.
  void validate() const;
  /// Index of the point equal to sigma (componentwise within `tol`).
  std::optional<std::size_t> index_of(const Parameter& sigma, double tol = 1e-12) const;
};

/// Every probe of a probe_count^s grid over `box` lies within eps of some training point.
bool epsilon_density(const TrainingSet& set, const ParameterBox& box, double eps, int probe_count);

/// argmin_i |sigma_i - sigma|, ties to the smallest index.
std::size_t nearest_training_index(const TrainingSet& set, const Parameter& sigma);
Parameter nearest_training(const TrainingSet& set, const Parameter& sigma);

/// Gains K(t_j) = -B^T Pi(t_j) on a mesh of [0, period).
struct GainSchedule {
  Parameter sigma;
  double period = 1.0;
  bool periodic = false;
  std::vector<double> mesh;
  std::vector<Matrix> gains;

  /// Periodic piecewise-linear lookup; the node at `period` wraps to the node at 0.
  Matrix at(double t) const;
  Eigen::Index rows() const { return gains.empty() ? 0 : gains.front().rows(); }
  Eigen::Index cols() const { return gains.empty() ? 0 : gains.front().cols(); }
};

GainSchedule schedule_from_riccati(const Parameter& sigma, const Matrix& b,
                                   const RiccatiSolution& solution);

/// Schedule t -> base(t + shift) on the base mesh, for operators with A_new(t) = A_base(t + shift).
GainSchedule shifted_schedule(const GainSchedule& base, const Parameter& sigma, double shift);

struct LibraryProvenance {
  double riccati_tol = 0.0;
  double dt_ric = 0.0;
  std::string solver;
  std::string discretization;
  std::string built_at;
};

class FeedbackLibrary {
 public:
  FeedbackLibrary() = default;
  FeedbackLibrary(TrainingSet training, std::vector<GainSchedule> schedules,
                  LibraryProvenance provenance = {});

  const TrainingSet& training() const { return training_; }
  const std::vector<GainSchedule>& schedules() const { return schedules_; }
  const LibraryProvenance& provenance() const { return provenance_; }
  std::size_t size() const { return schedules_.size(); }
  Eigen::Index inputs() const;
  Eigen::Index state_dim() const;

  std::size_t index_of(const Parameter& sigma) const;
  const GainSchedule& schedule(const Parameter& sigma) const;
  /// Throws UnknownParameter when sigma is not a training point.
  Matrix lookup(const Parameter& sigma, double t) const;
  GainFunction gain_function(const Parameter& sigma) const;

  /// Binary little-endian file plus a JSON sidecar at path + ".json".
  void save(const std::string& path) const;
  static FeedbackLibrary load(const std::string& path);

 private:
  TrainingSet training_;
  std::vector<GainSchedule> schedules_;
  LibraryProvenance provenance_;
};

Matrix lookup_gain(const FeedbackLibrary& lib, const Parameter& sigma, double t);

struct ShiftReuse {
  /// Training index whose schedule is shifted.
  std::size_t base = 0;
  double shift = 0.0;
};

struct LibraryBuildOptions {
  AreOptions are;
  PeriodicRiccatiOptions periodic;
  /// Worker cap for the independent Riccati solves.
  int jobs = 1;
  std::string discretization;
  /// Per training index: reuse a shifted schedule instead of solving (periodic families
  /// whose members differ by a time shift). Empty means solve everything.
  std::vector<std::optional<ShiftReuse>> reuse;
};

/// Offline stage: one Riccati solve per training parameter (algebraic for autonomous
/// systems, periodic otherwise); systems[i] must carry training[i].
FeedbackLibrary build_library(const std::vector<ControlSystem>& systems,
                              const TrainingSet& training,
                              const LibraryBuildOptions& options = {});

}  // namespace adstab
