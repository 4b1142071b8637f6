#include <filesystem>
#include <fstream>

#include "adstab/gain_library.hpp"
#include "adstab/models.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace adstab;
using testing::max_abs;

namespace {

Parameter p1(double v) { return Parameter::Constant(1, v); }

Parameter p2(double a, double b) {
  Parameter p(2);
  p << a, b;
  return p;
}

FeedbackLibrary oscillator_library(int n1) {
  const TrainingSet set = oscillator_training_set(n1);
  std::vector<ControlSystem> systems;
  for (const auto& s : set.points) systems.push_back(build_oscillator(s(0)));
  return build_library(systems, set);
}

std::vector<ControlSystem> periodic_systems(const TrainingSet& set) {
  std::vector<ControlSystem> systems;
  for (const auto& s : set.points) systems.push_back(build_periodic(s));
  return systems;
}

}  // namespace

TEST_SUITE("library") {

TEST_CASE("training sets are validated") {
  TrainingSet empty;
  CHECK_THROWS(empty.validate());
  TrainingSet dup{{p1(0.1), p1(0.1)}, {}};
  CHECK_THROWS(dup.validate());
  TrainingSet mixed{{p1(0.1), p2(0.1, 0.2)}, {}};
  CHECK_THROWS(mixed.validate());
  TrainingSet outside{{p1(2.0)}, ParameterBox{p1(-1.0), p1(1.0)}};
  CHECK_THROWS(outside.validate());
  CHECK_NOTHROW(oscillator_training_set(5).validate());
  CHECK_NOTHROW(periodic_training_set(10, 30).validate());
  CHECK(periodic_training_set(10, 30).size() == 630);
  CHECK(oscillator_training_set(5).size() == 11);
}

TEST_CASE("training grid layouts") {
  const TrainingSet osc = oscillator_training_set(5);
  CHECK(osc[0](0) == doctest::Approx(-1.0));
  CHECK(osc[1](0) == doctest::Approx(-0.8));
  CHECK(osc[10](0) == doctest::Approx(1.0));
  const TrainingSet per = periodic_training_set(2, 3);
  CHECK(per.size() == 15);
  CHECK(per[0](0) == doctest::Approx(0.5));
  CHECK(per[1](1) == doctest::Approx(1.0 / 3.0));
  CHECK(per[3](0) == doctest::Approx(0.75));
  const TrainingSet pde = parabolic_training_set(8);
  CHECK(pde[2](0) == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("epsilon density examples") {
  const ParameterBox box{p1(-1.0), p1(1.0)};
  const TrainingSet single{{p1(0.0)}, {}};
  CHECK(epsilon_density(single, box, 1.0, 101));
  CHECK_FALSE(epsilon_density(single, box, 0.99, 101));
  // Spacing 0.1: the worst probe sits halfway between neighbours.
  const TrainingSet fine = oscillator_training_set(10);
  CHECK(epsilon_density(fine, box, 0.05, 201));
  CHECK_FALSE(epsilon_density(fine, box, 0.04, 201));
  CHECK_THROWS(epsilon_density(fine, box, 0.0, 10));
}

TEST_CASE("nearest training point") {
  const TrainingSet fine = oscillator_training_set(10);
  CHECK(nearest_training(fine, p1(0.95))(0) == doctest::Approx(0.9));
  CHECK(nearest_training(fine, p1(0.96))(0) == doctest::Approx(1.0));
  CHECK(nearest_training(fine, p1(-7.0))(0) == doctest::Approx(-1.0));
  CHECK(nearest_training_index(fine, p1(0.0)) == 10);
}

TEST_CASE("nearest is a training point at minimal distance (property)") {
  std::mt19937_64 rng(3);
  const TrainingSet set = periodic_training_set(3, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const Parameter s = p2(testing::random_real(rng, 0.0, 2.0), testing::random_real(rng, -0.5, 1.5));
    const std::size_t k = nearest_training_index(set, s);
    for (const auto& p : set.points) CHECK((set[k] - s).norm() <= (p - s).norm());
  }
}

TEST_CASE("oscillator library gains are stabilizing and satisfy K = -B^T Pi") {
  const FeedbackLibrary lib = oscillator_library(5);
  CHECK(lib.size() == 11);
  CHECK(lib.inputs() == 1);
  CHECK(lib.state_dim() == 2);
  for (const auto& s : lib.training().points) {
    const ControlSystem sys = build_oscillator(s(0));
    const Matrix k = lib.lookup(s, 0.37);
    CHECK(is_hurwitz(sys.closed_loop(0.0, k)));
    const Matrix pi = solve_are(sys.A.evaluate(0), sys.B, sys.Q).values.front();
    CHECK(max_abs(k + sys.B.transpose() * pi) <= 1e-10);
  }
  CHECK_THROWS_AS(lib.lookup(p1(0.55), 0.0), UnknownParameter);
}

TEST_CASE("periodic schedules: node values, midpoints, wrap and continuity") {
  const TrainingSet set = periodic_training_set(1, 2);
  const FeedbackLibrary lib = build_library(periodic_systems(set), set);
  const GainSchedule& g = lib.schedules()[0];
  REQUIRE(g.periodic);
  const double rho = g.period;
  CHECK(rho == doctest::Approx(0.5));
  const std::size_t n = g.mesh.size();
  const double h = rho / static_cast<double>(n);
  CHECK(max_abs(g.at(g.mesh[7]) - g.gains[7]) == 0.0);
  CHECK(max_abs(g.at(g.mesh[7] + 0.5 * h) - 0.5 * (g.gains[7] + g.gains[8])) <= 1e-12);
  CHECK(max_abs(g.at(rho - 0.5 * h) - 0.5 * (g.gains[n - 1] + g.gains[0])) <= 1e-12);
  CHECK(max_abs(g.at(3 * rho + g.mesh[4]) - g.gains[4]) <= 1e-10);
  CHECK(max_abs(g.at(-rho + g.mesh[4]) - g.gains[4]) <= 1e-10);

  double max_jump = 0.0;
  double max_step = 0.0;
  for (std::size_t j = 0; j < n; ++j) max_step = std::max(max_step, max_abs(g.gains[(j + 1) % n] - g.gains[j]));
  for (int i = 0; i < 4000; ++i) {
    const double t = i * rho / 4000.0;
    max_jump = std::max(max_jump, max_abs(g.at(t + 1e-9) - g.at(t)));
  }
  CHECK(max_jump <= 1e-6 * std::max(1.0, max_step / h));
}

TEST_CASE("save and load round trip is bit exact") {
  const TrainingSet set = periodic_training_set(1, 2);
  const FeedbackLibrary lib = build_library(periodic_systems(set), set);
  const auto dir = std::filesystem::temp_directory_path() / "adstab_library_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "lib.bin").string();
  lib.save(path);
  CHECK(std::filesystem::exists(path + ".json"));
  const FeedbackLibrary back = FeedbackLibrary::load(path);
  REQUIRE(back.size() == lib.size());
  for (std::size_t i = 0; i < lib.size(); ++i) {
    CHECK((back.training()[i].array() == lib.training()[i].array()).all());
    const auto& a = lib.schedules()[i];
    const auto& b = back.schedules()[i];
    CHECK(a.mesh == b.mesh);
    CHECK(a.period == b.period);
    REQUIRE(a.gains.size() == b.gains.size());
    for (std::size_t j = 0; j < a.gains.size(); ++j) CHECK((a.gains[j].array() == b.gains[j].array()).all());
  }
  CHECK(back.provenance().solver == lib.provenance().solver);

  std::ofstream(dir / "junk.bin") << "not a library";
  CHECK_THROWS(FeedbackLibrary::load((dir / "junk.bin").string()));
  CHECK_THROWS(FeedbackLibrary::load((dir / "missing.bin").string()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("shifted schedules agree with direct solves") {
  const TrainingSet set = periodic_training_set(2, 3);
  const auto systems = periodic_systems(set);
  LibraryBuildOptions reuse;
  reuse.reuse = periodic_shift_plan(set);
  std::size_t reused = 0;
  for (const auto& r : reuse.reuse) reused += r.has_value();
  CHECK(reused == 10);
  const FeedbackLibrary shifted = build_library(systems, set, reuse);
  const FeedbackLibrary direct = build_library(systems, set);
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& s = set[i];
    for (int k = 0; k < 50; ++k) {
      const double t = k * s(0) / 50.0;
      worst = std::max(worst, max_abs(shifted.lookup(s, t) - direct.lookup(s, t)));
      scale = std::max(scale, max_abs(direct.lookup(s, t)));
    }
  }
  // The shifted lookup interpolates between base nodes, an O(dt^2) difference.
  MESSAGE("shift reuse: max deviation ", worst, ", max gain ", scale);
  CHECK(worst <= 2e-3 * scale);
}

TEST_CASE("library build failure reports the offending index") {
  const TrainingSet set{{p1(-1.0), p1(0.0), p1(1.0)}, {}};
  std::vector<ControlSystem> systems;
  for (const auto& s : set.points) {
    ControlSystem sys = testing::scalar_system(s(0), 1.0);
    sys.sigma = s;
    systems.push_back(sys);
  }
  systems[2].B.setZero();  // a = 1 with no input cannot be stabilized
  try {
    build_library(systems, set);
    FAIL("expected LibraryBuildError");
  } catch (const LibraryBuildError& e) {
    CHECK(e.index() == 2);
    CHECK(e.sigma()(0) == 1.0);
  }
}

TEST_CASE("parallel build matches sequential") {
  const TrainingSet set = oscillator_training_set(5);
  std::vector<ControlSystem> systems;
  for (const auto& s : set.points) systems.push_back(build_oscillator(s(0)));
  LibraryBuildOptions par;
  par.jobs = 4;
  const FeedbackLibrary a = build_library(systems, set);
  const FeedbackLibrary b = build_library(systems, set, par);
  for (std::size_t i = 0; i < set.size(); ++i)
    CHECK((a.schedules()[i].gains[0].array() == b.schedules()[i].gains[0].array()).all());
}

}
