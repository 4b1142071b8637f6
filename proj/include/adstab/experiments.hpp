#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adstab/adaptive.hpp"
#include "adstab/gain_library.hpp"
#include "adstab/models.hpp"
#include "adstab/riccati.hpp"

namespace adstab {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Every tunable of one study. Serialized as flat `key = value` lines; see config_keys().
struct ExperimentConfig {
  std::string experiment = "osc";  // osc | periodic | pde | robust-compare | noise | switching
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir = "out";

  // Training grids.
  int osc_n1 = 5;
  int periodic_n1 = 10;
  int periodic_n2 = 30;
  int pde_count = 8;
  int robust_size = 8;
  double robust_offset = 0.05;

  // Plant and online stage.
  std::vector<double> truth;
  std::vector<double> guess;
  std::vector<double> y0;  // empty: model default
  double tau = 0.5;
  double horizon = 20.0;
  int samples = 0;
  int global_count = 0;
  double gamma = 0.1;
  std::string ball = "radius";  // radius | squared
  double noise = 0.0;
  std::vector<double> noise_levels;
  long norm_stride = 1;

  // Discretization.
  std::string truth_scheme = "cnab";
  double truth_dt = 1e-3;
  std::string aux_scheme = "cnab";
  double aux_dt = 1e-3;
  double riccati_dt = 1e-2;
  double riccati_tol = 1e-9;
  int riccati_max_sweeps = 200;
  double are_tol = 1e-12;

  // Parabolic model.
  int pde_coarse_nodes = 9;
  double pde_nu = 0.1;
  int pde_outputs = 3;
  int pde_truth_level = 2;
  int pde_aux_level = 1;
  std::vector<ActuatorBox> pde_actuators = ParabolicConfig{}.actuators;

  // Switching truth: values[k] holds for dwell[k] (the last value forever).
  std::vector<std::vector<double>> switch_values;
  std::vector<double> switch_dwell;

  // Rank certificate.
  std::vector<double> rank_phases = {0.0, 0.5};
  double rank_time = 0.5;

  ParabolicConfig parabolic() const;
  SubsetPolicy policy() const;
  OnlineConfig online() const;
  PeriodicRiccatiOptions periodic_options() const;
};

/// Defaults of each study (values stated for the benchmark runs).
ExperimentConfig preset(const std::string& experiment);

/// Keys accepted in config files, in emission order.
const std::vector<std::string>& config_keys();

/// Parses `key = value` lines ('#' starts a comment). The `experiment` key selects the preset
/// the remaining keys override; unknown keys and malformed values raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string to_config_text(const ExperimentConfig& cfg);

TrainingSet experiment_training_set(const ExperimentConfig& cfg);
/// Plant for each training parameter at the Riccati (coarsest) resolution.
std::vector<ControlSystem> riccati_systems(const ExperimentConfig& cfg, const TrainingSet& set);
/// Plant for each training parameter at the auxiliary resolution.
std::vector<ControlSystem> auxiliary_systems(const ExperimentConfig& cfg, const TrainingSet& set);
ControlSystem truth_system(const ExperimentConfig& cfg);
Vector initial_state(const ExperimentConfig& cfg, bool truth_level = true);

/// Offline stage for the configured study.
FeedbackLibrary build_experiment_library(const ExperimentConfig& cfg);

/// Online stage with the configured noise level.
AdaptiveRunResult run_online_experiment(const ExperimentConfig& cfg, const FeedbackLibrary& lib);

struct NoiseStudyEntry {
  double noise = 0.0;
  /// max |y| over the last quarter of the horizon.
  double plateau = 0.0;
  AdaptiveRunResult run;
};
std::vector<NoiseStudyEntry> run_noise_study(const ExperimentConfig& cfg, const FeedbackLibrary& lib);
double plateau_radius(const AdaptiveRunResult& run, double horizon);

struct RobustComparison {
  double cost_true = 0.0;
  double cost_adaptive = 0.0;
  double cost_robust = 0.0;
  Trajectory optimal;
  Trajectory robust;
  AdaptiveRunResult adaptive;
  double robust_monodromy_radius = 0.0;
  /// Costs divided by the horizon; the reference values are on this scale.
  double mean_true() const { return cost_true / horizon; }
  double mean_adaptive() const { return cost_adaptive / horizon; }
  double mean_robust() const { return cost_robust / horizon; }
  double horizon = 1.0;
};
/// Costs of K_sigma (truth parameter), K_{sigma_e} (adaptive) and K_Sigma (ensemble) over the horizon.
RobustComparison run_robust_compare(const ExperimentConfig& cfg, const FeedbackLibrary& lib);

inline constexpr double kReferenceCostTrue = 0.0463;
inline constexpr double kReferenceCostAdaptive = 1.1766;
inline constexpr double kReferenceCostRobust = 2.5197;

struct RankReport {
  RankCertificate qb;
  RankCertificate qc;
};
RankReport run_rank_check(const ExperimentConfig& cfg);

/// estimates.csv, norms.csv, comparison.csv and summary.json in `dir`.
void write_run_artifacts(const std::string& dir, const ExperimentConfig& cfg,
                         const FeedbackLibrary& lib, const AdaptiveRunResult& run,
                         const std::string& extra_summary_json = "");

}  // namespace adstab
