#include "adstab/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace adstab {

namespace {

using nlohmann::json;

const std::vector<std::string> kExperiments = {"osc", "periodic", "pde", "robust-compare", "noise",
                                               "switching"};

bool periodic_family(const std::string& e) {
  return e == "periodic" || e == "noise" || e == "robust-compare";
}
bool parabolic_family(const std::string& e) { return e == "pde" || e == "switching"; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const std::string t = trim(text);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ConfigError("key '" + key + "': '" + text + "' is not a finite number");
  }
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const std::string t = trim(text);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size()) {
    throw ConfigError("key '" + key + "': '" + text + "' is not an integer");
  }
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ',')) out.push_back(parse_double(key, item));
  return out;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
Field int_field(const std::string& key, T ExperimentConfig::*member) {
  return {key, [member](const ExperimentConfig& c) { return std::to_string(c.*member); },
          [key, member](ExperimentConfig& c, const std::string& v) {
            c.*member = static_cast<T>(parse_integer(key, v));
          }};
}

Field double_field(const std::string& key, double ExperimentConfig::*member) {
  return {key, [member](const ExperimentConfig& c) { return fmt(c.*member); },
          [key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_double(key, v); }};
}

Field list_field(const std::string& key, std::vector<double> ExperimentConfig::*member) {
  return {key, [member](const ExperimentConfig& c) { return fmt_list(c.*member); },
          [key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_list(key, v); }};
}

Field string_field(const std::string& key, std::string ExperimentConfig::*member) {
  return {key, [member](const ExperimentConfig& c) { return c.*member; },
          [member](ExperimentConfig& c, const std::string& v) { c.*member = trim(v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(string_field("experiment", &ExperimentConfig::experiment));
    f.push_back({"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
                 [](ExperimentConfig& c, const std::string& v) {
                   const std::string t = trim(v);
                   std::uint64_t s = 0;
                   const auto r = std::from_chars(t.data(), t.data() + t.size(), s);
                   if (r.ec != std::errc() || r.ptr != t.data() + t.size()) {
                     throw ConfigError("key 'seed': '" + v + "' is not an unsigned 64-bit integer");
                   }
                   c.seed = s;
                 }});
    f.push_back(int_field("jobs", &ExperimentConfig::jobs));
    f.push_back(string_field("out_dir", &ExperimentConfig::out_dir));
    f.push_back(int_field("osc.n1", &ExperimentConfig::osc_n1));
    f.push_back(int_field("periodic.n1", &ExperimentConfig::periodic_n1));
    f.push_back(int_field("periodic.n2", &ExperimentConfig::periodic_n2));
    f.push_back(int_field("pde.count", &ExperimentConfig::pde_count));
    f.push_back(int_field("robust.size", &ExperimentConfig::robust_size));
    f.push_back(double_field("robust.offset", &ExperimentConfig::robust_offset));
    f.push_back(list_field("truth", &ExperimentConfig::truth));
    f.push_back(list_field("guess", &ExperimentConfig::guess));
    f.push_back(list_field("y0", &ExperimentConfig::y0));
    f.push_back(double_field("tau", &ExperimentConfig::tau));
    f.push_back(double_field("horizon", &ExperimentConfig::horizon));
    f.push_back(int_field("samples", &ExperimentConfig::samples));
    f.push_back(int_field("subset.global", &ExperimentConfig::global_count));
    f.push_back(double_field("subset.gamma", &ExperimentConfig::gamma));
    f.push_back(string_field("subset.ball", &ExperimentConfig::ball));
    f.push_back(double_field("noise", &ExperimentConfig::noise));
    f.push_back(list_field("noise.levels", &ExperimentConfig::noise_levels));
    f.push_back(int_field("norm_stride", &ExperimentConfig::norm_stride));
    f.push_back(string_field("truth.scheme", &ExperimentConfig::truth_scheme));
    f.push_back(double_field("truth.dt", &ExperimentConfig::truth_dt));
    f.push_back(string_field("aux.scheme", &ExperimentConfig::aux_scheme));
    f.push_back(double_field("aux.dt", &ExperimentConfig::aux_dt));
    f.push_back(double_field("riccati.dt", &ExperimentConfig::riccati_dt));
    f.push_back(double_field("riccati.tol", &ExperimentConfig::riccati_tol));
    f.push_back(int_field("riccati.max_sweeps", &ExperimentConfig::riccati_max_sweeps));
    f.push_back(double_field("are.tol", &ExperimentConfig::are_tol));
    f.push_back(int_field("pde.coarse_nodes", &ExperimentConfig::pde_coarse_nodes));
    f.push_back(double_field("pde.nu", &ExperimentConfig::pde_nu));
    f.push_back(int_field("pde.outputs", &ExperimentConfig::pde_outputs));
    f.push_back(int_field("pde.truth_level", &ExperimentConfig::pde_truth_level));
    f.push_back(int_field("pde.aux_level", &ExperimentConfig::pde_aux_level));
    f.push_back({"pde.actuators",
                 [](const ExperimentConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.pde_actuators.size(); ++i) {
                     const auto& b = c.pde_actuators[i];
                     s += (i ? "; " : "") + fmt_list({b.x0, b.x1, b.y0, b.y1});
                   }
                   return s;
                 },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.pde_actuators.clear();
                   for (const auto& item : split(v, ';')) {
                     const auto box = parse_list("pde.actuators", item);
                     if (box.size() != 4) {
                       throw ConfigError("key 'pde.actuators': each box is 'x0, x1, y0, y1'");
                     }
                     c.pde_actuators.push_back({box[0], box[1], box[2], box[3]});
                   }
                 }});
    f.push_back({"switch.values",
                 [](const ExperimentConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.switch_values.size(); ++i) {
                     s += (i ? "; " : "") + fmt_list(c.switch_values[i]);
                   }
                   return s;
                 },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.switch_values.clear();
                   if (trim(v).empty()) return;
                   for (const auto& item : split(v, ';')) {
                     c.switch_values.push_back(parse_list("switch.values", item));
                   }
                 }});
    f.push_back(list_field("switch.dwell", &ExperimentConfig::switch_dwell));
    f.push_back(list_field("rank.phases", &ExperimentConfig::rank_phases));
    f.push_back(double_field("rank.time", &ExperimentConfig::rank_time));
    return f;
  }();
  return table;
}

void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void validate(const ExperimentConfig& c) {
  check(std::find(kExperiments.begin(), kExperiments.end(), c.experiment) != kExperiments.end(),
        "unknown experiment '" + c.experiment + "'");
  check(c.jobs >= 1, "jobs must be >= 1");
  check(c.osc_n1 >= 1 && c.periodic_n1 >= 1 && c.periodic_n2 >= 1 && c.pde_count >= 1 &&
            c.robust_size >= 1,
        "training grid sizes must be positive");
  check(c.tau > 0.0 && c.horizon > 0.0, "tau and horizon must be positive");
  check(c.samples == 0 || c.samples >= 2, "samples must be 0 (integrator mesh) or >= 2");
  check(c.global_count >= 0, "subset.global must be nonnegative");
  check(c.gamma >= 0.0, "subset.gamma must be nonnegative");
  check(c.ball == "radius" || c.ball == "squared", "subset.ball must be 'radius' or 'squared'");
  check(c.noise >= 0.0, "noise must be nonnegative");
  for (double v : c.noise_levels) check(v >= 0.0, "noise levels must be nonnegative");
  check(c.norm_stride >= 1, "norm_stride must be >= 1");
  check(c.truth_dt > 0.0 && c.aux_dt > 0.0 && c.riccati_dt > 0.0, "time steps must be positive");
  check(c.riccati_tol > 0.0 && c.are_tol > 0.0, "tolerances must be positive");
  check(c.riccati_max_sweeps >= 1, "riccati.max_sweeps must be >= 1");
  for (const auto& s : {c.truth_scheme, c.aux_scheme}) {
    try {
      scheme_from_string(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  check(c.pde_coarse_nodes >= 3, "pde.coarse_nodes must be >= 3");
  check(c.pde_nu > 0.0, "pde.nu must be positive");
  check(c.pde_outputs >= 1, "pde.outputs must be >= 1");
  check(c.pde_truth_level >= 0 && c.pde_truth_level <= 4 && c.pde_aux_level >= 0 &&
            c.pde_aux_level <= 4,
        "pde levels must lie in 0..4");
  check(!c.pde_actuators.empty(), "pde.actuators must list at least one box");

  const Eigen::Index s = periodic_family(c.experiment) ? 2 : 1;
  if (c.experiment != "switching") {
    check(static_cast<Eigen::Index>(c.truth.size()) == s,
          "truth must have " + std::to_string(s) + " component(s)");
  }
  check(static_cast<Eigen::Index>(c.guess.size()) == s,
        "guess must have " + std::to_string(s) + " component(s)");
  if (c.experiment == "switching") {
    check(!c.switch_values.empty(), "switching needs switch.values");
    for (const auto& v : c.switch_values) check(v.size() == 1, "switch.values entries are scalars");
    check(c.switch_dwell.size() == 1 || c.switch_dwell.size() + 1 >= c.switch_values.size(),
          "switch.dwell needs one value or one per switch");
    for (double d : c.switch_dwell) check(d > 0.0, "dwell times must be positive");
  }
  if (c.experiment == "noise") check(!c.noise_levels.empty(), "noise study needs noise.levels");
  check(c.rank_phases.size() >= 1, "rank.phases must list at least one phase");
}

Parameter to_param(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ParabolicConfig ExperimentConfig::parabolic() const {
  ParabolicConfig p;
  p.coarse_nodes = pde_coarse_nodes;
  p.nu = pde_nu;
  p.outputs = pde_outputs;
  p.actuators = pde_actuators;
  return p;
}

SubsetPolicy ExperimentConfig::policy() const {
  SubsetPolicy p;
  p.global_count = global_count;
  p.gamma = gamma;
  p.squared_distance = ball == "squared";
  return p;
}

OnlineConfig ExperimentConfig::online() const {
  OnlineConfig o;
  o.tau = tau;
  o.samples = samples;
  o.horizon = horizon;
  o.initial_guess = to_param(guess);
  o.noise = noise;
  o.truth = IntegratorConfig{scheme_from_string(truth_scheme), truth_dt};
  o.aux = IntegratorConfig{scheme_from_string(aux_scheme), aux_dt};
  o.seed = seed;
  o.jobs = jobs;
  o.norm_stride = norm_stride;
  if (parabolic_family(experiment) && pde_truth_level != pde_aux_level) {
    o.state_transfer = pde_truth_level > pde_aux_level
                           ? restriction(pde_truth_level, pde_aux_level, parabolic())
                           : prolongation(pde_truth_level, pde_aux_level, parabolic());
  }
  return o;
}

PeriodicRiccatiOptions ExperimentConfig::periodic_options() const {
  PeriodicRiccatiOptions p;
  p.dt = riccati_dt;
  p.tol = riccati_tol;
  p.max_sweeps = riccati_max_sweeps;
  return p;
}

ExperimentConfig preset(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.ball = "squared";
  if (experiment == "osc") {
    c.truth = {0.95};
    c.guess = {0.0};
    c.y0 = {1.0, 1.0};
    c.tau = 0.5;
    c.horizon = 20.0;
    c.gamma = 0.1;
  } else if (experiment == "periodic" || experiment == "noise") {
    c.periodic_n1 = experiment == "noise" ? 20 : 10;
    c.periodic_n2 = experiment == "noise" ? 60 : 30;
    c.truth = {1.47, 0.51};
    c.guess = {1.0, 0.0};
    c.y0 = {1.0, 1.0};
    c.tau = 0.1;
    c.horizon = 10.0;
    c.gamma = 0.02;
    if (experiment == "noise") c.noise_levels = {1e-2, 1e-1};
  } else if (experiment == "robust-compare") {
    c.truth = {1.0, 0.51};
    c.guess = {1.0, 0.05};
    c.y0 = {1.0, 1.0};
    c.tau = 0.2;
    c.horizon = 20.0;
    c.gamma = 0.1;
  } else if (experiment == "pde" || experiment == "switching") {
    c.truth = {0.7};
    c.guess = {0.0};
    c.tau = 0.1;
    c.horizon = experiment == "pde" ? 10.0 : 28.0;
    c.gamma = 1.0;
    c.truth_dt = 1e-4;
    c.aux_dt = 1e-3;
    c.norm_stride = 10;
    if (experiment == "switching") {
      c.switch_values = {{0.7}, {2.2}, {3.6}, {5.1}};
      c.switch_dwell = {7.0};
    }
  } else {
    throw ConfigError("unknown experiment '" + experiment + "'");
  }
  return c;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

ExperimentConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  std::string experiment;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    for (const auto& e : entries) {
      if (e.first == key) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    if (key == "experiment") experiment = value;
    entries.emplace_back(key, value);
  }
  if (experiment.empty()) throw ConfigError("config must set 'experiment'");
  ExperimentConfig cfg = preset(experiment);
  for (const auto& [key, value] : entries) {
    for (const auto& f : fields()) {
      if (f.key == key) f.set(cfg, value);
    }
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

std::string to_config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Systems

TrainingSet experiment_training_set(const ExperimentConfig& cfg) {
  const auto& e = cfg.experiment;
  if (e == "osc") return oscillator_training_set(cfg.osc_n1);
  if (e == "periodic" || e == "noise") return periodic_training_set(cfg.periodic_n1, cfg.periodic_n2);
  if (e == "robust-compare") {
    TrainingSet set;
    set.box = ParameterBox{(Vector(2) << 0.5, 0.0).finished(), (Vector(2) << 1.5, 1.0).finished()};
    for (int i = 0; i < cfg.robust_size; ++i) {
      set.points.push_back((Parameter(2) << 1.0, cfg.robust_offset + static_cast<double>(i) / cfg.robust_size).finished());
    }
    return set;
  }
  return parabolic_training_set(cfg.pde_count);
}

namespace {

ControlSystem member(const ExperimentConfig& cfg, const Parameter& sigma, int level) {
  const auto& e = cfg.experiment;
  if (e == "osc") return build_oscillator(sigma(0));
  if (periodic_family(e)) return build_periodic(sigma);
  return build_parabolic(sigma(0), level, cfg.parabolic(), 0);
}

}  // namespace

std::vector<ControlSystem> riccati_systems(const ExperimentConfig& cfg, const TrainingSet& set) {
  std::vector<ControlSystem> out;
  out.reserve(set.size());
  for (const auto& s : set.points) out.push_back(member(cfg, s, 0));
  return out;
}

std::vector<ControlSystem> auxiliary_systems(const ExperimentConfig& cfg, const TrainingSet& set) {
  std::vector<ControlSystem> out;
  out.reserve(set.size());
  for (const auto& s : set.points) out.push_back(member(cfg, s, cfg.pde_aux_level));
  return out;
}

ControlSystem truth_system(const ExperimentConfig& cfg) {
  if (cfg.experiment == "switching") {
    std::vector<std::pair<Parameter, double>> entries;
    for (std::size_t k = 0; k < cfg.switch_values.size(); ++k) {
      const double dwell = cfg.switch_dwell.size() == 1 ? cfg.switch_dwell.front()
                                                        : (k < cfg.switch_dwell.size() ? cfg.switch_dwell[k] : 1.0);
      entries.emplace_back(to_param(cfg.switch_values[k]), dwell);
    }
    return switched_system(switching_schedule(entries), [&](const Parameter& p) {
      return member(cfg, p, cfg.pde_truth_level);
    });
  }
  return member(cfg, to_param(cfg.truth), cfg.pde_truth_level);
}

Vector initial_state(const ExperimentConfig& cfg, bool truth_level) {
  if (parabolic_family(cfg.experiment)) {
    const int level = truth_level ? cfg.pde_truth_level : cfg.pde_aux_level;
    if (!cfg.y0.empty()) {
      const Vector y = to_param(cfg.y0);
      check(y.size() == parabolic_grid(level, cfg.parabolic()).size(), "y0 has the wrong length");
      return y;
    }
    return parabolic_initial_state(level, cfg.parabolic());
  }
  if (cfg.y0.empty()) return Vector::Ones(2);
  check(cfg.y0.size() == 2, "y0 must have 2 components");
  return to_param(cfg.y0);
}

FeedbackLibrary build_experiment_library(const ExperimentConfig& cfg) {
  validate(cfg);
  const TrainingSet set = experiment_training_set(cfg);
  const auto systems = riccati_systems(cfg, set);
  LibraryBuildOptions opts;
  opts.are.tol = cfg.are_tol;
  opts.periodic = cfg.periodic_options();
  opts.jobs = cfg.jobs;
  if (cfg.experiment == "periodic" || cfg.experiment == "noise") {
    opts.reuse = periodic_shift_plan(set);
  }
  std::ostringstream disc;
  if (parabolic_family(cfg.experiment)) {
    disc << "parabolic fd level 0, " << cfg.pde_coarse_nodes << "x" << cfg.pde_coarse_nodes
         << " nodes, nu " << fmt(cfg.pde_nu) << ", p " << cfg.pde_outputs;
  } else {
    disc << cfg.experiment << " family";
  }
  disc << ", dt_ric " << fmt(cfg.riccati_dt);
  opts.discretization = disc.str();
  return build_library(systems, set, opts);
}

AdaptiveRunResult run_online_experiment(const ExperimentConfig& cfg, const FeedbackLibrary& lib) {
  validate(cfg);
  const auto candidates = auxiliary_systems(cfg, lib.training());
  return run_adaptive(truth_system(cfg), candidates, lib, initial_state(cfg), cfg.online(), cfg.policy());
}

double plateau_radius(const AdaptiveRunResult& run, double horizon) {
  double r = 0.0;
  for (std::size_t k = 0; k < run.norm.size(); ++k) {
    if (run.norm_t[k] >= 0.75 * horizon) r = std::max(r, run.norm[k]);
  }
  return r;
}

std::vector<NoiseStudyEntry> run_noise_study(const ExperimentConfig& cfg, const FeedbackLibrary& lib) {
  validate(cfg);
  const auto candidates = auxiliary_systems(cfg, lib.training());
  const ControlSystem truth = truth_system(cfg);
  std::vector<NoiseStudyEntry> out;
  for (double eta : cfg.noise_levels) {
    OnlineConfig online = cfg.online();
    online.noise = eta;
    NoiseStudyEntry entry;
    entry.noise = eta;
    try {
      entry.run = run_adaptive(truth, candidates, lib, initial_state(cfg), online, cfg.policy());
      entry.plateau = plateau_radius(entry.run, cfg.horizon);
    } catch (const BlowUpError&) {
      entry.plateau = std::numeric_limits<double>::infinity();
    }
    out.push_back(std::move(entry));
  }
  return out;
}

RobustComparison run_robust_compare(const ExperimentConfig& cfg, const FeedbackLibrary& lib) {
  validate(cfg);
  RobustComparison out;
  out.horizon = cfg.horizon;
  const ControlSystem truth = truth_system(cfg);
  const Vector y0 = initial_state(cfg);
  const IntegratorConfig icfg{scheme_from_string(cfg.truth_scheme), cfg.truth_dt};
  const auto opts = cfg.periodic_options();

  const RiccatiSolution optimal = solve_periodic_riccati(truth, opts);
  out.optimal = run_fixed_gain(truth, riccati_gain(truth.B, optimal), y0, cfg.horizon, icfg, cfg.norm_stride);
  out.cost_true = out.optimal.cost;

  out.adaptive = run_online_experiment(cfg, lib);
  out.cost_adaptive = out.adaptive.cost;

  std::vector<ControlSystem> members;
  for (const auto& p : lib.training().points) members.push_back(build_periodic(p));
  const EnsembleSystem ens = build_ensemble(members);
  const RiccatiSolution robust = solve_periodic_riccati(ens.extended, opts);
  const GainSchedule sched = robust_schedule(ens, robust);
  const GainFunction robust_gain = [sched](double t) { return sched.at(t); };
  out.robust = run_fixed_gain(truth, robust_gain, y0, cfg.horizon, icfg, cfg.norm_stride);
  out.cost_robust = out.robust.cost;
  out.robust_monodromy_radius =
      spectral_radius(transition_matrix(truth, robust_gain, 0.0, truth.A.period(), cfg.truth_dt));
  return out;
}

RankReport run_rank_check(const ExperimentConfig& cfg) {
  std::vector<ControlSystem> members;
  for (double phi : cfg.rank_phases) members.push_back(build_periodic(1.0, phi));
  const EnsembleSystem ens = build_ensemble(members);
  RankReport r;
  r.qb = silverman_meadows_qb(ens.extended.A, ens.extended.B, cfg.rank_time);
  r.qc = silverman_meadows_qc(ens.extended.A, ens.extended.C, cfg.rank_time);
  return r;
}

// ---------------------------------------------------------------------------
// Artifacts

void write_run_artifacts(const std::string& dir, const ExperimentConfig& cfg,
                         const FeedbackLibrary& lib, const AdaptiveRunResult& run,
                         const std::string& extra_summary_json) {
  std::filesystem::create_directories(dir);
  const auto path = [&](const std::string& name) { return (std::filesystem::path(dir) / name).string(); };
  const auto& training = lib.training();
  const Eigen::Index s = training.dim();

  {
    std::ofstream os(path("estimates.csv"));
    os << "window,t";
    for (Eigen::Index k = 0; k < s; ++k) os << ",sigma_" << k + 1;
    os << '\n' << std::setprecision(15);
    const Parameter& g = training[training.index_of(to_param(cfg.guess)).value_or(0)];
    os << 0 << ',' << 0.0;
    for (Eigen::Index k = 0; k < s; ++k) os << ',' << g(k);
    os << '\n';
    for (std::size_t j = 0; j < run.estimates.size(); ++j) {
      const double t = j + 1 < run.window_start.size() ? run.window_start[j + 1] : run.final_time;
      os << j + 1 << ',' << t;
      for (Eigen::Index k = 0; k < s; ++k) os << ',' << run.estimates[j](k);
      os << '\n';
    }
  }
  {
    std::ofstream os(path("norms.csv"));
    os << "t,norm_y\n" << std::setprecision(15);
    for (std::size_t k = 0; k < run.norm.size(); ++k) os << run.norm_t[k] << ',' << run.norm[k] << '\n';
  }
  {
    std::ofstream os(path("comparison.csv"));
    os << "window,candidate_index";
    for (Eigen::Index k = 0; k < s; ++k) os << ",sigma_" << k + 1;
    os << ",E\n" << std::setprecision(15);
    for (std::size_t j = 0; j < run.subsets.size(); ++j) {
      for (std::size_t i = 0; i < run.subsets[j].size(); ++i) {
        const std::size_t idx = run.subsets[j][i];
        os << j + 1 << ',' << idx;
        for (Eigen::Index k = 0; k < s; ++k) os << ',' << training[idx](k);
        os << ',' << run.comparisons[j](static_cast<Eigen::Index>(i)) << '\n';
      }
    }
  }

  json summary;
  summary["experiment"] = cfg.experiment;
  summary["seed"] = cfg.seed;
  summary["cost"] = run.cost;
  summary["windows"] = run.estimates.size();
  summary["final_time"] = run.final_time;
  summary["initial_norm"] = run.norm.empty() ? 0.0 : run.norm.front();
  summary["final_norm"] = run.norm.empty() ? 0.0 : run.norm.back();
  summary["max_norm"] = run.max_norm();
  if (!run.estimates.empty()) {
    const auto& e = run.estimates.back();
    summary["final_estimate"] = std::vector<double>(e.data(), e.data() + e.size());
  }
  if (run.decay) summary["decay_fit"] = {{"zeta", run.decay->zeta}, {"mu", run.decay->mu}};
  summary["library"] = {{"size", lib.size()},
                        {"solver", lib.provenance().solver},
                        {"discretization", lib.provenance().discretization},
                        {"built_at", lib.provenance().built_at}};
  summary["config"] = to_config_text(cfg);
  if (!extra_summary_json.empty()) summary["extra"] = json::parse(extra_summary_json);
  std::ofstream os(path("summary.json"));
  os << summary.dump(2) << '\n';
}

}  // namespace adstab
