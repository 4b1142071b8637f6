#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "adstab/experiments.hpp"

namespace py = pybind11;
using namespace adstab;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Offline-online adaptive stabilization of uncertain linear systems";

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<TimePeriodicOperator>(m, "TimePeriodicOperator")
      .def_static("constant", &TimePeriodicOperator::constant)
      .def("evaluate", &TimePeriodicOperator::evaluate)
      .def("derivative", &TimePeriodicOperator::derivative)
      .def_property_readonly("period", &TimePeriodicOperator::period)
      .def_property_readonly("dim", &TimePeriodicOperator::dim);

  py::class_<ControlSystem>(m, "ControlSystem")
      .def_readonly("A", &ControlSystem::A)
      .def_readonly("B", &ControlSystem::B)
      .def_readonly("C", &ControlSystem::C)
      .def_readonly("Q", &ControlSystem::Q)
      .def_readonly("sigma", &ControlSystem::sigma)
      .def_readonly("label", &ControlSystem::label)
      .def_property_readonly("n", &ControlSystem::n)
      .def("closed_loop", &ControlSystem::closed_loop);

  m.def("build_oscillator", &build_oscillator, py::arg("sigma"));
  m.def("build_periodic", py::overload_cast<double, double>(&build_periodic), py::arg("rho"),
        py::arg("phi"));
  m.def("build_parabolic",
        [](double sigma, int level) { return build_parabolic(sigma, level); }, py::arg("sigma"),
        py::arg("level") = 0);
  m.def("psi", &psi);

  m.def("solve_lyapunov", &solve_lyapunov, py::arg("a"), py::arg("w"));
  m.def("are_residual", &are_residual);

  py::class_<RiccatiSolution>(m, "RiccatiSolution")
      .def_readonly("mesh", &RiccatiSolution::mesh)
      .def_readonly("values", &RiccatiSolution::values)
      .def_readonly("period", &RiccatiSolution::period)
      .def_readonly("residual", &RiccatiSolution::residual)
      .def_readonly("periodicity_gap", &RiccatiSolution::periodicity_gap)
      .def_readonly("iterations", &RiccatiSolution::iterations)
      .def("at", &RiccatiSolution::at);

  m.def("solve_are",
        [](const Matrix& a, const Matrix& b, const Matrix& q) { return solve_are(a, b, q).values.front(); },
        py::arg("a"), py::arg("b"), py::arg("q"));
  m.def("solve_periodic_riccati",
        [](const ControlSystem& sys, double dt, double tol) {
          PeriodicRiccatiOptions opts;
          opts.dt = dt;
          opts.tol = tol;
          return solve_periodic_riccati(sys, opts);
        },
        py::arg("system"), py::arg("dt") = 1e-2, py::arg("tol") = 1e-9);
  m.def("closed_loop_monodromy", &closed_loop_monodromy, py::arg("system"), py::arg("solution"),
        py::arg("dt") = 1e-3);

  py::class_<RankCertificate>(m, "RankCertificate")
      .def_readonly("matrix", &RankCertificate::matrix)
      .def_readonly("rank", &RankCertificate::rank)
      .def_readonly("sigma_min", &RankCertificate::sigma_min)
      .def_property_readonly("full_rank", &RankCertificate::full_rank);

  py::class_<TrainingSet>(m, "TrainingSet")
      .def_readonly("points", &TrainingSet::points)
      .def("__len__", &TrainingSet::size);

  py::class_<FeedbackLibrary>(m, "FeedbackLibrary")
      .def_static("load", &FeedbackLibrary::load)
      .def("save", &FeedbackLibrary::save)
      .def("lookup", &FeedbackLibrary::lookup, py::arg("sigma"), py::arg("t"))
      .def_property_readonly("training", &FeedbackLibrary::training)
      .def("__len__", &FeedbackLibrary::size);

  m.def("comparison_functional", &comparison_functional, py::arg("dz"), py::arg("du"), py::arg("tau"));
  m.def("update_index", &update_index);
  py::class_<DecayFit>(m, "DecayFit").def_readonly("zeta", &DecayFit::zeta).def_readonly("mu", &DecayFit::mu);
  m.def("fit_decay", &fit_decay);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readwrite("experiment", &ExperimentConfig::experiment)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("jobs", &ExperimentConfig::jobs)
      .def_readwrite("truth", &ExperimentConfig::truth)
      .def_readwrite("guess", &ExperimentConfig::guess)
      .def_readwrite("y0", &ExperimentConfig::y0)
      .def_readwrite("tau", &ExperimentConfig::tau)
      .def_readwrite("horizon", &ExperimentConfig::horizon)
      .def_readwrite("gamma", &ExperimentConfig::gamma)
      .def_readwrite("global_count", &ExperimentConfig::global_count)
      .def_readwrite("noise", &ExperimentConfig::noise)
      .def("to_text", &to_config_text);
  m.def("preset", &preset);
  m.def("parse_config", &parse_config);
  m.def("config_keys", &config_keys);

  py::class_<AdaptiveRunResult>(m, "AdaptiveRunResult")
      .def_readonly("window_start", &AdaptiveRunResult::window_start)
      .def_readonly("estimates", &AdaptiveRunResult::estimates)
      .def_readonly("comparisons", &AdaptiveRunResult::comparisons)
      .def_readonly("norm_t", &AdaptiveRunResult::norm_t)
      .def_readonly("norm", &AdaptiveRunResult::norm)
      .def_readonly("cost", &AdaptiveRunResult::cost)
      .def_readonly("decay", &AdaptiveRunResult::decay)
      .def("max_norm", &AdaptiveRunResult::max_norm);

  py::class_<RobustComparison>(m, "RobustComparison")
      .def_readonly("cost_true", &RobustComparison::cost_true)
      .def_readonly("cost_adaptive", &RobustComparison::cost_adaptive)
      .def_readonly("cost_robust", &RobustComparison::cost_robust)
      .def("mean_true", &RobustComparison::mean_true)
      .def("mean_adaptive", &RobustComparison::mean_adaptive)
      .def("mean_robust", &RobustComparison::mean_robust);

  py::class_<RankReport>(m, "RankReport").def_readonly("qb", &RankReport::qb).def_readonly("qc", &RankReport::qc);

  // The heavy entry points drop the GIL so callers can run several studies from threads.
  m.def("build_library", &build_experiment_library, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_online", &run_online_experiment, py::arg("config"), py::arg("library"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_robust_compare", &run_robust_compare, py::arg("config"), py::arg("library"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_rank_check", &run_rank_check, py::arg("config"));
}
