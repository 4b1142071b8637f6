#include "adstab/gain_library.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace adstab {

namespace {

std::string describe(const Parameter& sigma) {
  std::ostringstream os;
  os << std::setprecision(10) << "(";
  for (Eigen::Index i = 0; i < sigma.size(); ++i) os << (i ? ", " : "") << sigma(i);
  os << ")";
  return os.str();
}

}  // namespace

LibraryBuildError::LibraryBuildError(std::size_t index, Parameter sigma, const std::string& cause)
    : NumericalError("Riccati solve failed for training parameter #" + std::to_string(index) +
                     " sigma = " + describe(sigma) + ": " + cause),
      index_(index),
      sigma_(std::move(sigma)) {}

void TrainingSet::validate() const {
  if (points.empty()) throw std::invalid_argument("training set is empty");
  const Eigen::Index s = points.front().size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    require_dims(points[i].size() == s, "training parameters must share one dimension");
    if (box && !box->contains(points[i])) {
      throw std::invalid_argument("training parameter " + describe(points[i]) +
                                  " lies outside the parameter box");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (points[i] == points[j]) {
        throw std::invalid_argument("training parameters must be pairwise distinct, " +
                                    describe(points[i]) + " repeats");
      }
    }
  }
}

std::optional<std::size_t> TrainingSet::index_of(const Parameter& sigma, double tol) const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() == sigma.size() && (points[i] - sigma).cwiseAbs().maxCoeff() <= tol) {
      return i;
    }
  }
  return std::nullopt;
}

bool epsilon_density(const TrainingSet& set, const ParameterBox& box, double eps, int probe_count) {
  if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (probe_count < 1) throw std::invalid_argument("probe count must be positive");
  if (set.empty()) return false;
  const Eigen::Index s = box.dim();
  std::vector<int> idx(static_cast<std::size_t>(s), 0);
  Parameter probe(s);
  // Small slack so that probes sitting exactly at distance eps count as covered.
  const double bound = eps * (1.0 + 1e-12);
  while (true) {
    for (Eigen::Index k = 0; k < s; ++k) {
      const double frac = probe_count == 1 ? 0.5 : static_cast<double>(idx[static_cast<std::size_t>(k)]) / (probe_count - 1);
      probe(k) = box.lower(k) + frac * (box.upper(k) - box.lower(k));
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : set.points) best = std::min(best, (p - probe).norm());
    if (best > bound) return false;
    Eigen::Index k = 0;
    while (k < s && ++idx[static_cast<std::size_t>(k)] == probe_count) {
      idx[static_cast<std::size_t>(k)] = 0;
      ++k;
    }
    if (k == s) return true;
  }
}

std::size_t nearest_training_index(const TrainingSet& set, const Parameter& sigma) {
  if (set.empty()) throw std::invalid_argument("nearest_training on an empty training set");
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.size(); ++i) {
    require_dims(set[i].size() == sigma.size(), "parameter dimension mismatch");
    const double d = (set[i] - sigma).norm();
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

Parameter nearest_training(const TrainingSet& set, const Parameter& sigma) {
  return set[nearest_training_index(set, sigma)];
}

Matrix GainSchedule::at(double t) const {
  if (gains.empty()) throw std::logic_error("empty gain schedule");
  if (gains.size() == 1 || !periodic) return gains.front();
  double r = std::fmod(t, period);
  if (r < 0.0) r += period;
  if (r >= period) r = 0.0;
  const auto it = std::upper_bound(mesh.begin(), mesh.end(), r);
  const std::size_t hi = static_cast<std::size_t>(it - mesh.begin());
  const std::size_t lo = hi - 1;
  if (r == mesh[lo]) return gains[lo];
  const double t_hi = hi < mesh.size() ? mesh[hi] : period;
  const Matrix& k_hi = hi < mesh.size() ? gains[hi] : gains.front();
  const double w = (r - mesh[lo]) / (t_hi - mesh[lo]);
  return (1.0 - w) * gains[lo] + w * k_hi;
}

GainSchedule schedule_from_riccati(const Parameter& sigma, const Matrix& b,
                                   const RiccatiSolution& solution) {
  GainSchedule sched;
  sched.sigma = sigma;
  sched.period = solution.periodic ? solution.period : 1.0;
  sched.periodic = solution.periodic;
  sched.mesh = solution.mesh;
  sched.gains.reserve(solution.values.size());
  const Matrix bt = b.transpose();
  for (const auto& pi : solution.values) {
    Matrix k = -bt * pi;
    if (((k + bt * pi).cwiseAbs().maxCoeff()) > 1e-12 * std::max(1.0, k.cwiseAbs().maxCoeff())) {
      throw NumericalError("stored gain is inconsistent with -B^T Pi");
    }
    sched.gains.push_back(std::move(k));
  }
  return sched;
}

GainSchedule shifted_schedule(const GainSchedule& base, const Parameter& sigma, double shift) {
  GainSchedule sched;
  sched.sigma = sigma;
  sched.period = base.period;
  sched.periodic = base.periodic;
  sched.mesh = base.mesh;
  sched.gains.reserve(base.mesh.size());
  for (double t : base.mesh) sched.gains.push_back(base.at(t + shift));
  return sched;
}

FeedbackLibrary::FeedbackLibrary(TrainingSet training, std::vector<GainSchedule> schedules,
                                 LibraryProvenance provenance)
    : training_(std::move(training)),
      schedules_(std::move(schedules)),
      provenance_(std::move(provenance)) {
  training_.validate();
  if (schedules_.size() != training_.size()) {
    throw std::invalid_argument("library needs exactly one schedule per training parameter");
  }
  for (std::size_t i = 0; i < schedules_.size(); ++i) {
    const auto& s = schedules_[i];
    if (s.gains.empty() || s.gains.size() != s.mesh.size()) {
      throw std::invalid_argument("schedule mesh and gains must be nonempty and of equal length");
    }
    require_dims(s.rows() == schedules_.front().rows() && s.cols() == schedules_.front().cols(),
                 "all schedules must share m and n");
    for (std::size_t j = 0; j < s.mesh.size(); ++j) {
      if (s.mesh[j] < 0.0 || s.mesh[j] >= s.period || (j > 0 && s.mesh[j] <= s.mesh[j - 1])) {
        throw std::invalid_argument("schedule mesh must be strictly increasing in [0, period)");
      }
    }
  }
}

Eigen::Index FeedbackLibrary::inputs() const { return schedules_.empty() ? 0 : schedules_.front().rows(); }
Eigen::Index FeedbackLibrary::state_dim() const { return schedules_.empty() ? 0 : schedules_.front().cols(); }

std::size_t FeedbackLibrary::index_of(const Parameter& sigma) const {
  const auto idx = training_.index_of(sigma);
  if (!idx) throw UnknownParameter("parameter " + describe(sigma) + " is not in the training set");
  return *idx;
}

const GainSchedule& FeedbackLibrary::schedule(const Parameter& sigma) const {
  return schedules_[index_of(sigma)];
}

Matrix FeedbackLibrary::lookup(const Parameter& sigma, double t) const {
  return schedule(sigma).at(t);
}

GainFunction FeedbackLibrary::gain_function(const Parameter& sigma) const {
  const GainSchedule& sched = schedule(sigma);
  if (sched.gains.size() == 1) {
    Matrix k = sched.gains.front();
    return [k](double) { return k; };
  }
  return [sched](double t) { return sched.at(t); };
}

Matrix lookup_gain(const FeedbackLibrary& lib, const Parameter& sigma, double t) {
  return lib.lookup(sigma, t);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[8] = {'A', 'D', 'S', 'T', 'L', 'I', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  is.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!is) throw std::runtime_error("library file is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

void FeedbackLibrary::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(state_dim()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(inputs()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(training_.dim()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(size()));
  put<double>(os, provenance_.riccati_tol);
  put<double>(os, provenance_.dt_ric);
  for (const auto& s : schedules_) {
    for (Eigen::Index k = 0; k < s.sigma.size(); ++k) put<double>(os, s.sigma(k));
    put<double>(os, s.period);
    put<std::uint8_t>(os, s.periodic ? 1 : 0);
    put<std::uint64_t>(os, s.mesh.size());
    for (double t : s.mesh) put<double>(os, t);
    for (const auto& k : s.gains) {
      for (Eigen::Index r = 0; r < k.rows(); ++r) {
        for (Eigen::Index c = 0; c < k.cols(); ++c) put<double>(os, k(r, c));
      }
    }
  }
  if (!os) throw std::runtime_error("failed writing '" + path + "'");

  nlohmann::json meta;
  meta["format"] = "ADSTLIB1";
  meta["version"] = kVersion;
  meta["n"] = state_dim();
  meta["m"] = inputs();
  meta["s"] = training_.dim();
  meta["N"] = size();
  meta["riccati_tol"] = provenance_.riccati_tol;
  meta["dt_ric"] = provenance_.dt_ric;
  meta["solver"] = provenance_.solver;
  meta["discretization"] = provenance_.discretization;
  meta["built_at"] = provenance_.built_at;
  nlohmann::json sigmas = nlohmann::json::array();
  for (const auto& p : training_.points) {
    sigmas.push_back(std::vector<double>(p.data(), p.data() + p.size()));
  }
  meta["training"] = sigmas;
  if (training_.box) {
    const auto& b = *training_.box;
    meta["box"] = {{"lower", std::vector<double>(b.lower.data(), b.lower.data() + b.lower.size())},
                   {"upper", std::vector<double>(b.upper.data(), b.upper.data() + b.upper.size())}};
  }
  std::ofstream js(path + ".json");
  js << meta.dump(2) << '\n';
}

FeedbackLibrary FeedbackLibrary::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open library '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("'" + path + "' is not a gain library");
  }
  if (get<std::uint32_t>(is) != kVersion) throw std::runtime_error("unsupported library version");
  const auto n = static_cast<Eigen::Index>(get<std::uint64_t>(is));
  const auto m = static_cast<Eigen::Index>(get<std::uint64_t>(is));
  const auto s = static_cast<Eigen::Index>(get<std::uint64_t>(is));
  const auto count = get<std::uint64_t>(is);
  LibraryProvenance prov;
  prov.riccati_tol = get<double>(is);
  prov.dt_ric = get<double>(is);

  TrainingSet training;
  std::vector<GainSchedule> schedules;
  for (std::uint64_t i = 0; i < count; ++i) {
    GainSchedule sched;
    sched.sigma.resize(s);
    for (Eigen::Index k = 0; k < s; ++k) sched.sigma(k) = get<double>(is);
    sched.period = get<double>(is);
    sched.periodic = get<std::uint8_t>(is) != 0;
    const auto len = get<std::uint64_t>(is);
    sched.mesh.resize(len);
    for (auto& t : sched.mesh) t = get<double>(is);
    sched.gains.assign(len, Matrix(m, n));
    for (auto& k : sched.gains) {
      for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) k(r, c) = get<double>(is);
      }
    }
    training.points.push_back(sched.sigma);
    schedules.push_back(std::move(sched));
  }

  std::ifstream js(path + ".json");
  if (js) {
    try {
      const auto meta = nlohmann::json::parse(js);
      prov.solver = meta.value("solver", "");
      prov.discretization = meta.value("discretization", "");
      prov.built_at = meta.value("built_at", "");
      if (meta.contains("box")) {
        const auto lo = meta["box"]["lower"].get<std::vector<double>>();
        const auto hi = meta["box"]["upper"].get<std::vector<double>>();
        training.box = ParameterBox{Eigen::Map<const Vector>(lo.data(), static_cast<Eigen::Index>(lo.size())),
                                    Eigen::Map<const Vector>(hi.data(), static_cast<Eigen::Index>(hi.size()))};
      }
    } catch (const nlohmann::json::exception&) {
      // The sidecar only carries provenance; the binary file is authoritative.
    }
  }
  return FeedbackLibrary(std::move(training), std::move(schedules), std::move(prov));
}

// ---------------------------------------------------------------------------
// Offline build

FeedbackLibrary build_library(const std::vector<ControlSystem>& systems,
                              const TrainingSet& training, const LibraryBuildOptions& options) {
  training.validate();
  if (systems.size() != training.size()) {
    throw std::invalid_argument("build_library needs one system per training parameter");
  }
  if (!options.reuse.empty() && options.reuse.size() != training.size()) {
    throw std::invalid_argument("shift-reuse plan must have one entry per training parameter");
  }
  for (std::size_t i = 0; i < systems.size(); ++i) {
    if (systems[i].sigma.size() != training[i].size() || systems[i].sigma != training[i]) {
      throw std::invalid_argument("system #" + std::to_string(i) + " does not carry training parameter " +
                                  describe(training[i]));
    }
  }

  const std::size_t count = training.size();
  std::vector<std::optional<GainSchedule>> built(count);
  std::vector<std::size_t> direct;
  for (std::size_t i = 0; i < count; ++i) {
    if (options.reuse.empty() || !options.reuse[i]) direct.push_back(i);
  }

  auto solve_one = [&](std::size_t i) {
    const ControlSystem& sys = systems[i];
    try {
      sys.validate();
      RiccatiSolution sol = sys.A.autonomous()
                                ? solve_are(sys.A.evaluate(0.0), sys.B, sys.Q, options.are)
                                : solve_periodic_riccati(sys, options.periodic);
      built[i] = schedule_from_riccati(training[i], sys.B, sol);
    } catch (const NumericalError& e) {
      throw LibraryBuildError(i, training[i], e.what());
    } catch (const std::invalid_argument& e) {
      throw LibraryBuildError(i, training[i], e.what());
    }
  };

  const std::size_t workers = std::min<std::size_t>(std::max(1, options.jobs), direct.size());
  if (workers <= 1) {
    for (std::size_t i : direct) solve_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::size_t failed_at = count;
    std::mutex guard;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < direct.size(); k = next++) {
          try {
            solve_one(direct[k]);
          } catch (...) {
            std::lock_guard<std::mutex> lock(guard);
            // Report the smallest failing index so errors do not depend on scheduling.
            if (direct[k] < failed_at) {
              failed_at = direct[k];
              failure = std::current_exception();
            }
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  for (std::size_t i = 0; i < count; ++i) {
    if (built[i]) continue;
    const ShiftReuse& plan = *options.reuse[i];
    if (plan.base >= count || !built[plan.base]) {
      throw std::invalid_argument("shift-reuse entry #" + std::to_string(i) +
                                  " must point at a directly solved parameter");
    }
    built[i] = shifted_schedule(*built[plan.base], training[i], plan.shift);
  }

  std::vector<GainSchedule> schedules;
  schedules.reserve(count);
  for (auto& s : built) schedules.push_back(std::move(*s));

  LibraryProvenance prov;
  const bool any_periodic = std::any_of(systems.begin(), systems.end(),
                                        [](const auto& s) { return !s.A.autonomous(); });
  prov.riccati_tol = any_periodic ? options.periodic.tol : options.are.tol;
  prov.dt_ric = any_periodic ? options.periodic.dt : 0.0;
  prov.solver = any_periodic ? "periodic-cn-sweeps" : "newton-kleinman";
  prov.discretization = options.discretization;
  prov.built_at = utc_timestamp();
  return FeedbackLibrary(training, std::move(schedules), std::move(prov));
}

}  // namespace adstab
