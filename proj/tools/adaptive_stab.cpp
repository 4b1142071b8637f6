// adaptive-stab: offline library builds and online adaptive runs from a flat config file.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "adstab/experiments.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace adstab;

namespace {

constexpr int kConfigFailure = 1;
constexpr int kNumericalFailure = 2;

struct Options {
  std::string command;
  std::string config;
  std::string library;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

std::string out_dir(const Options& o, const ExperimentConfig& cfg) {
  return o.out.empty() ? cfg.out_dir : o.out;
}

std::string library_path(const Options& o, const ExperimentConfig& cfg) {
  return o.library.empty() ? (fs::path(out_dir(o, cfg)) / "library.bin").string() : o.library;
}

FeedbackLibrary obtain_library(const Options& o, const ExperimentConfig& cfg) {
  if (!o.library.empty()) {
    FeedbackLibrary lib = [&] {
      try {
        return FeedbackLibrary::load(o.library);
      } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
      }
    }();
    const TrainingSet expected = experiment_training_set(cfg);
    if (lib.size() != expected.size()) {
      throw ConfigError("library '" + o.library + "' has " + std::to_string(lib.size()) +
                        " gains, the config expects " + std::to_string(expected.size()));
    }
    return lib;
  }
  std::cerr << "no --library given, building one in memory\n";
  return build_experiment_library(cfg);
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

int cmd_offline(const Options& o, const ExperimentConfig& cfg) {
  const FeedbackLibrary lib = build_experiment_library(cfg);
  const std::string path = library_path(o, cfg);
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  lib.save(path);
  std::cout << "library: " << lib.size() << " gains (n=" << lib.state_dim() << ", m=" << lib.inputs()
            << ") -> " << path << '\n';
  return 0;
}

void print_run(const AdaptiveRunResult& run) {
  std::cout << "windows " << run.estimates.size() << ", cost " << run.cost << ", |y(0)| "
            << (run.norm.empty() ? 0.0 : run.norm.front()) << ", |y(T)| "
            << (run.norm.empty() ? 0.0 : run.norm.back()) << ", max |y| " << run.max_norm() << '\n';
  if (!run.estimates.empty()) {
    std::cout << "final estimate " << run.estimates.back().transpose() << '\n';
  }
  if (run.decay) std::cout << "decay fit: zeta " << run.decay->zeta << ", mu " << run.decay->mu << '\n';
}

int cmd_online(const Options& o, const ExperimentConfig& cfg) {
  const FeedbackLibrary lib = obtain_library(o, cfg);
  const std::string dir = out_dir(o, cfg);
  if (cfg.experiment == "noise") {
    const auto study = run_noise_study(cfg, lib);
    fs::create_directories(dir);
    std::ofstream table(fs::path(dir) / "noise.csv");
    table << "noise,plateau\n" << std::setprecision(15);
    for (std::size_t k = 0; k < study.size(); ++k) {
      table << study[k].noise << ',' << study[k].plateau << '\n';
      std::cout << "noise " << study[k].noise << ": plateau " << study[k].plateau << '\n';
      ExperimentConfig level = cfg;
      level.noise = study[k].noise;
      if (!study[k].run.estimates.empty()) {
        write_run_artifacts((fs::path(dir) / ("noise_" + std::to_string(k))).string(), level, lib,
                            study[k].run, json{{"plateau", study[k].plateau}}.dump());
      }
    }
    return 0;
  }
  const AdaptiveRunResult run = run_online_experiment(cfg, lib);
  write_run_artifacts(dir, cfg, lib, run);
  print_run(run);
  std::cout << "artifacts in " << dir << '\n';
  return 0;
}

int cmd_robust_compare(const Options& o, const ExperimentConfig& cfg) {
  if (cfg.experiment != "robust-compare") {
    throw ConfigError("robust-compare needs experiment = robust-compare");
  }
  const FeedbackLibrary lib = obtain_library(o, cfg);
  const RobustComparison r = run_robust_compare(cfg, lib);
  const std::string dir = out_dir(o, cfg);
  fs::create_directories(dir);
  {
    std::ofstream os(fs::path(dir) / "costs.csv");
    os << "feedback,cost,mean_cost,reference\n" << std::setprecision(15);
    os << "true," << r.cost_true << ',' << r.mean_true() << ',' << kReferenceCostTrue << '\n';
    os << "adaptive," << r.cost_adaptive << ',' << r.mean_adaptive() << ',' << kReferenceCostAdaptive << '\n';
    os << "robust," << r.cost_robust << ',' << r.mean_robust() << ',' << kReferenceCostRobust << '\n';
  }
  const json extra = {{"cost_true", r.cost_true},
                      {"cost_adaptive", r.cost_adaptive},
                      {"cost_robust", r.cost_robust},
                      {"mean_cost_true", r.mean_true()},
                      {"mean_cost_adaptive", r.mean_adaptive()},
                      {"mean_cost_robust", r.mean_robust()},
                      {"robust_monodromy_radius", r.robust_monodromy_radius}};
  write_run_artifacts(dir, cfg, lib, r.adaptive, extra.dump());
  std::cout << std::setprecision(6) << "feedback   cost        cost/T      reference\n";
  const auto row = [](const char* name, double cost, double mean, double ref) {
    std::cout << std::left << std::setw(11) << name << std::setw(12) << cost << std::setw(12) << mean << ref << '\n';
  };
  row("K_sigma", r.cost_true, r.mean_true(), kReferenceCostTrue);
  row("K_adaptive", r.cost_adaptive, r.mean_adaptive(), kReferenceCostAdaptive);
  row("K_robust", r.cost_robust, r.mean_robust(), kReferenceCostRobust);
  std::cout << "robust monodromy radius " << r.robust_monodromy_radius << '\n';
  return 0;
}

int cmd_rank_check(const Options& o, const ExperimentConfig& cfg) {
  const RankReport r = run_rank_check(cfg);
  const auto show = [](const char* name, const RankCertificate& c) {
    std::cout << name << "(" << c.time << ") =\n"
              << std::setprecision(8) << c.matrix << "\nrank " << c.rank << ", sigma_min " << c.sigma_min
              << ", sigma_max " << c.sigma_max << (c.full_rank() ? " (full)" : " (deficient)") << "\n\n";
  };
  show("Q_B", r.qb);
  show("Q_C", r.qc);
  const auto cert = [](const RankCertificate& c) {
    return json{{"time", c.time}, {"rank", c.rank}, {"sigma_min", c.sigma_min},
                {"sigma_max", c.sigma_max}, {"full_rank", c.full_rank()}, {"matrix", mat_json(c.matrix)}};
  };
  const std::string dir = out_dir(o, cfg);
  fs::create_directories(dir);
  std::ofstream os(fs::path(dir) / "rank.json");
  os << json{{"qb", cert(r.qb)}, {"qc", cert(r.qc)}, {"config", to_config_text(cfg)}}.dump(2) << '\n';
  return 0;
}

void write_diagnostic(const std::string& dir, const std::string& command, const std::exception& e) {
  json d = {{"command", command}, {"error", e.what()}};
  if (const auto* b = dynamic_cast<const BlowUpError*>(&e)) {
    d["kind"] = "blow-up";
    d["time"] = b->time();
    d["norm"] = b->norm();
  } else if (dynamic_cast<const NotStabilizable*>(&e)) {
    d["kind"] = "not-stabilizable";
  } else if (dynamic_cast<const NonConvergence*>(&e)) {
    d["kind"] = "non-convergence";
  } else if (const auto* l = dynamic_cast<const LibraryBuildError*>(&e)) {
    d["kind"] = "library-build";
    d["index"] = l->index();
    d["sigma"] = vec_json(l->sigma());
  } else {
    d["kind"] = "numerical";
  }
  try {
    fs::create_directories(dir);
    std::ofstream(fs::path(dir) / "diagnostic.json") << d.dump(2) << '\n';
  } catch (const std::exception&) {
  }
  std::cerr << "numerical failure: " << e.what() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline-online adaptive stabilization experiments"};
  app.require_subcommand(1);
  Options o;
  const auto add_common = [&](CLI::App* sub, bool library) {
    sub->add_option("--config", o.config, "Experiment config file")->required()->check(CLI::ExistingFile);
    if (library) sub->add_option("--library", o.library, "Feedback library file");
    sub->add_option("--out", o.out, "Output directory (default: out_dir of the config)");
    sub->add_option("--seed", o.seed, "Override the config seed");
    sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };
  add_common(app.add_subcommand("offline", "Build the feedback library"), true);
  add_common(app.add_subcommand("online", "Run the adaptive loop"), true);
  add_common(app.add_subcommand("robust-compare", "Costs of optimal, adaptive and robust feedback"), true);
  add_common(app.add_subcommand("rank-check", "Silverman-Meadows rank certificates"), false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigFailure;
  }
  o.command = app.get_subcommands().front()->get_name();

  ExperimentConfig cfg;
  try {
    cfg = load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.jobs) cfg.jobs = *o.jobs;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigFailure;
  }

  try {
    if (o.command == "offline") return cmd_offline(o, cfg);
    if (o.command == "online") return cmd_online(o, cfg);
    if (o.command == "robust-compare") return cmd_robust_compare(o, cfg);
    return cmd_rank_check(o, cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const NumericalError& e) {
    write_diagnostic(out_dir(o, cfg), o.command, e);
    return kNumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalFailure;
  }
}
