#include "adstab/adaptive.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace adstab {

double comparison_functional(const Matrix& dz, const Matrix& du, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("window length must be positive");
  const Eigen::Index samples = std::max(dz.cols(), du.cols());
  if ((dz.size() != 0 && dz.cols() != samples) || (du.size() != 0 && du.cols() != samples)) {
    throw DimensionError("comparison needs input and output samples on one mesh");
  }
  if (samples < 2) throw DimensionError("comparison needs at least two samples per window");
  const double h = tau / static_cast<double>(samples - 1);
  double total = 0.0;
  for (Eigen::Index k = 0; k < samples; ++k) {
    double v = 0.0;
    if (dz.size() != 0) v += dz.col(k).squaredNorm();
    if (du.size() != 0) v += du.col(k).squaredNorm();
    total += (k == 0 || k == samples - 1) ? 0.5 * v : v;
  }
  return h * total;
}

std::size_t update_index(const Vector& e) {
  if (e.size() == 0) throw std::invalid_argument("cannot update from an empty comparison vector");
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  bool found = false;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    if (std::isfinite(e(i)) && (!found || e(i) < best_value)) {
      best_value = e(i);
      best = static_cast<std::size_t>(i);
      found = true;
    }
  }
  return best;
}

Parameter update_estimate(const Vector& e, const std::vector<Parameter>& subset) {
  if (subset.empty()) throw std::invalid_argument("cannot update from an empty subset");
  require_dims(static_cast<std::size_t>(e.size()) == subset.size(),
               "one comparison value per subset member");
  return subset[update_index(e)];
}

std::vector<std::size_t> select_subset(const TrainingSet& set, const Parameter& sigma_hat,
                                       const SubsetPolicy& policy, Rng& rng) {
  if (policy.gamma < 0.0) throw std::invalid_argument("gamma must be nonnegative");
  if (policy.global_count < 0 || static_cast<std::size_t>(policy.global_count) > set.size()) {
    throw std::invalid_argument("N_g must lie in [0, N]");
  }
  // Grid points exactly gamma away must survive rounding (0.4 - 0.3 > 0.1 in binary).
  const double bound = policy.gamma * (1.0 + 1e-9);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double d = (set[i] - sigma_hat).norm();
    const double measure = policy.squared_distance ? d * d : d;
    if (measure <= bound) out.push_back(i);
  }
  if (policy.global_count > 0) {
    std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
    for (int k = 0; k < policy.global_count; ++k) out.push_back(pick(rng));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Vector inject_measurement_noise(const Vector& y, double eta, Rng& rng) {
  if (eta < 0.0) throw std::invalid_argument("noise magnitude must be nonnegative");
  if (eta == 0.0) return y;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector out = y;
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += eta * (unit(rng) - 0.5);
  return out;
}

namespace {

// Nearest-node samples of a fully recorded window trajectory on `count` equally spaced nodes.
void sample_io(const Trajectory& traj, Eigen::Index count, Matrix& u, Matrix& z) {
  const long steps = traj.steps;
  u.resize(traj.u.rows(), count);
  z.resize(traj.z.rows(), count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const auto idx = static_cast<Eigen::Index>(
        std::llround(static_cast<double>(k) * static_cast<double>(steps) / static_cast<double>(count - 1)));
    u.col(k) = traj.u.col(idx);
    z.col(k) = traj.z.col(idx);
  }
}

}  // namespace

WindowResult run_window(const ControlSystem& truth, const std::vector<ControlSystem>& candidates,
                        const FeedbackLibrary& lib, std::size_t estimate,
                        const std::vector<std::size_t>& subset, const Vector& y_old, double t0,
                        double t1, int window, const OnlineConfig& cfg, Rng& rng) {
  if (subset.empty()) throw std::invalid_argument("window needs a nonempty training subset");
  if (candidates.size() != lib.size()) {
    throw std::invalid_argument("one auxiliary system per training parameter is required");
  }
  if (!y_old.allFinite()) throw BlowUpError(t0, std::numeric_limits<double>::infinity());

  const GainFunction gain = lib.gain_function(lib.training()[estimate]);
  const RecordOptions full{1, false};

  WindowResult res;
  res.t0 = t0;
  res.t1 = t1;
  res.subset = subset;

  // Every truth step is kept: the norm history and the cost come from this run.
  res.truth = integrate_closed_loop(truth, gain, y_old, t0, t1, cfg.truth, full);
  res.y_new = res.truth.final_state;

  const long aux_steps = snap_steps(t1 - t0, cfg.aux.dt);
  const Eigen::Index samples = cfg.samples > 0 ? cfg.samples : aux_steps + 1;
  if (samples < 2) throw std::invalid_argument("a window needs at least two IO samples");
  res.truth_io.window = window;
  res.truth_io.t.resize(static_cast<std::size_t>(samples));
  for (Eigen::Index k = 0; k < samples; ++k) {
    res.truth_io.t[static_cast<std::size_t>(k)] =
        t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(samples - 1);
  }
  sample_io(res.truth, samples, res.truth_io.u, res.truth_io.z);

  Vector start = cfg.state_transfer.size() == 0 ? y_old : Vector(cfg.state_transfer * y_old);
  start = inject_measurement_noise(start, cfg.noise, rng);

  res.comparison = Vector::Constant(static_cast<Eigen::Index>(subset.size()),
                                    std::numeric_limits<double>::infinity());
  auto evaluate = [&](std::size_t k) {
    const ControlSystem& aux = candidates[subset[k]];
    try {
      const Trajectory traj = integrate_closed_loop(aux, gain, start, t0, t1, cfg.aux, full);
      Matrix u, z;
      sample_io(traj, samples, u, z);
      res.comparison(static_cast<Eigen::Index>(k)) =
          comparison_functional(z - res.truth_io.z, u - res.truth_io.u, t1 - t0);
    } catch (const BlowUpError&) {
      // A candidate that blows up within one window cannot explain finite truth data.
    }
  };

  const std::size_t workers = std::min<std::size_t>(std::max(1, cfg.jobs), subset.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < subset.size(); ++k) evaluate(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex guard;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < subset.size(); k = next++) {
          try {
            evaluate(k);
          } catch (...) {
            std::lock_guard<std::mutex> lock(guard);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  res.estimate = subset[update_index(res.comparison)];
  return res;
}

DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& norms) {
  if (t.size() != norms.size()) throw DimensionError("decay fit needs one norm per time");
  if (t.size() < 3) throw std::invalid_argument("decay fit needs at least three samples");
  const auto n = static_cast<double>(t.size());
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(norms[k] > 0.0)) throw std::invalid_argument("decay fit needs positive norms");
    const double l = std::log(norms[k]);
    st += t[k];
    sl += l;
    stt += t[k] * t[k];
    stl += t[k] * l;
  }
  const double denom = n * stt - st * st;
  if (!(denom > 0.0)) throw std::invalid_argument("decay fit needs distinct sample times");
  DecayFit fit;
  fit.mu = -(n * stl - st * sl) / denom;
  double log_zeta = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < t.size(); ++k) {
    log_zeta = std::max(log_zeta, std::log(norms[k]) + fit.mu * (t[k] - t.front()));
  }
  fit.zeta = std::exp(log_zeta);
  return fit;
}

double AdaptiveRunResult::max_norm() const {
  return norm.empty() ? 0.0 : *std::max_element(norm.begin(), norm.end());
}

AdaptiveRunResult run_adaptive(const ControlSystem& truth, const std::vector<ControlSystem>& candidates,
                               const FeedbackLibrary& lib, const Vector& y0,
                               const OnlineConfig& cfg, const SubsetPolicy& policy) {
  if (!(cfg.tau > 0.0) || !(cfg.horizon > 0.0)) {
    throw std::invalid_argument("window length and horizon must be positive");
  }
  if (!std::isfinite(cfg.horizon)) throw std::invalid_argument("simulated horizons must be finite");
  if (cfg.norm_stride < 1) throw std::invalid_argument("norm stride must be >= 1");
  const auto start = lib.training().index_of(cfg.initial_guess);
  if (!start) throw UnknownParameter("initial guess is not a training parameter");

  Rng rng(cfg.seed);
  AdaptiveRunResult out;
  std::size_t estimate = *start;
  Vector y = y0;
  const long windows = snap_steps(cfg.horizon, cfg.tau);

  for (long j = 0; j < windows; ++j) {
    const double t0 = static_cast<double>(j) * cfg.tau;
    const double t1 = (j + 1 == windows) ? cfg.horizon : std::min(cfg.horizon, static_cast<double>(j + 1) * cfg.tau);
    if (!(t1 > t0)) break;
    const auto subset = select_subset(lib.training(), lib.training()[estimate], policy, rng);
    WindowResult res = run_window(truth, candidates, lib, estimate, subset, y, t0, t1,
                                  static_cast<int>(j) + 1, cfg, rng);

    const auto& tr = res.truth;
    for (std::size_t k = (j == 0 ? 0 : 1); k < tr.t.size(); ++k) {
      if (k % static_cast<std::size_t>(cfg.norm_stride) == 0 || k + 1 == tr.t.size()) {
        out.norm_t.push_back(tr.t[k]);
        out.norm.push_back(tr.norm[k]);
      }
    }
    out.cost += tr.cost;
    out.window_start.push_back(t0);
    out.estimate_before.push_back(estimate);
    out.estimate_after.push_back(res.estimate);
    out.estimates.push_back(lib.training()[res.estimate]);
    out.subsets.push_back(res.subset);
    out.comparisons.push_back(res.comparison);
    estimate = res.estimate;
    y = res.y_new;
    out.final_time = t1;
  }
  out.final_state = y;

  if (out.norm.size() >= 3 &&
      std::all_of(out.norm.begin(), out.norm.end(), [](double v) { return v > 0.0; })) {
    out.decay = fit_decay(out.norm_t, out.norm);
  }
  return out;
}

Trajectory run_fixed_gain(const ControlSystem& sys, const GainFunction& gain, const Vector& y0,
                          double horizon, const IntegratorConfig& cfg, long stride) {
  return integrate_closed_loop(sys, gain, y0, 0.0, horizon, cfg, RecordOptions{stride, false});
}

const Parameter& SwitchingSchedule::at(double t) const {
  if (values.empty()) throw std::logic_error("empty switching schedule");
  const auto it = std::upper_bound(switch_times.begin(), switch_times.end(), t);
  return values[static_cast<std::size_t>(it - switch_times.begin())];
}

SwitchingSchedule switching_schedule(const std::vector<std::pair<Parameter, double>>& entries) {
  if (entries.empty()) throw std::invalid_argument("switching schedule needs at least one entry");
  SwitchingSchedule s;
  double t = 0.0;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (!(entries[k].second > 0.0)) throw std::invalid_argument("dwell times must be positive");
    s.values.push_back(entries[k].first);
    if (k + 1 < entries.size()) {
      t += entries[k].second;
      s.switch_times.push_back(t);
    }
  }
  return s;
}

ControlSystem switched_system(const SwitchingSchedule& schedule,
                              const std::function<ControlSystem(const Parameter&)>& builder) {
  if (schedule.values.empty()) throw std::invalid_argument("empty switching schedule");
  std::vector<ControlSystem> pieces;
  for (const auto& v : schedule.values) pieces.push_back(builder(v));
  ControlSystem sys = pieces.front();
  std::vector<TimePeriodicOperator> ops;
  bool shared_implicit = true;
  for (const auto& p : pieces) {
    ops.push_back(p.A);
    const bool same = p.implicit_part.size() == sys.implicit_part.size() &&
                      (p.implicit_part.size() == 0 ||
                       SparseMatrix(p.implicit_part - sys.implicit_part).norm() == 0.0);
    shared_implicit = shared_implicit && same;
  }
  sys.A = TimePeriodicOperator::switched(std::move(ops), schedule.switch_times);
  if (!shared_implicit) sys.implicit_part = SparseMatrix();
  sys.box.reset();
  sys.label = pieces.front().label + "/switched";
  return sys;
}

}  // namespace adstab
