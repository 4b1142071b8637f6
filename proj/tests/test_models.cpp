#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "adstab/adaptive.hpp"
#include "adstab/models.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace adstab;
using testing::max_abs;

namespace {

constexpr double kPi = std::numbers::pi;

// Closed-form free solution component of the periodic family from y(0) = (1, 1).
double periodic_free_flow(double rho, double phi, double t) {
  const double integral =
      t - 6.0 * rho / (2.0 * kPi) * (std::cos(2.0 * kPi * (t / rho + phi)) - std::cos(2.0 * kPi * phi));
  return std::exp(integral);
}

Vector grid_field(const ParabolicGrid& g, double (*f)(double, double)) {
  Vector v(g.size());
  for (int j = 0; j < g.nodes; ++j)
    for (int i = 0; i < g.nodes; ++i) v(g.index(i, j)) = f(g.x(i), g.x(j));
  return v;
}

double weighted_norm(const Vector& w, const Vector& v) { return std::sqrt((w.array() * v.array().square()).sum()); }

}  // namespace

TEST_SUITE("models") {

TEST_CASE("oscillator spectrum") {
  for (double sigma : {-1.0, -0.3, 0.0, 0.4, 0.95, 1.0}) {
    const ControlSystem sys = build_oscillator(sigma);
    CHECK(sys.n() == 2);
    CHECK(spectral_abscissa(sys.A.evaluate(0.0)) == doctest::Approx(sigma / 2.0).epsilon(1e-12));
    CHECK(sys.A.autonomous());
    CHECK(kalman_rank(sys.A.evaluate(0.0), sys.B));
  }
  CHECK_NOTHROW(build_oscillator(0.5).validate());
}

TEST_CASE("periodic family free flow matches the closed form") {
  const IntegratorConfig cn{Scheme::CrankNicolson, 1e-3};
  const Trajectory tr = integrate_closed_loop(build_periodic(1.0, 0.0), {}, Vector::Ones(2), 0.0, 3.0, cn);
  CHECK(tr.final_state(0) == doctest::Approx(std::exp(3.0)).epsilon(1e-2));
  CHECK(tr.final_state(0) == doctest::Approx(tr.final_state(1)).epsilon(1e-12));

  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 6; ++trial) {
    const double rho = testing::random_real(rng, 0.5, 1.5), phi = testing::random_real(rng, 0.0, 1.0);
    const double t1 = testing::random_real(rng, 0.2, 2.0);
    const Trajectory r = integrate_closed_loop(build_periodic(rho, phi), {}, Vector::Ones(2), 0.0, t1, cn);
    CHECK(r.final_state(0) == doctest::Approx(periodic_free_flow(rho, phi, t1)).epsilon(1e-4));
  }
}

TEST_CASE("phases with equal Psi give identical first Euler factors") {
  // Psi(0.1) = Psi(0.4) since sin(0.2 pi) = sin(0.8 pi).
  const ControlSystem a = build_periodic(1.0, 0.1);
  const ControlSystem b = build_periodic(0.7, 0.4);
  Matrix k(1, 2);
  k << -1.3, -2.1;
  const double xi = 0.01;
  const Matrix d = explicit_euler_transition(b.closed_loop(0.0, k), xi) - explicit_euler_transition(a.closed_loop(0.0, k), xi);
  CHECK(max_abs(d) <= 1e-14);
  const Matrix d1 = explicit_euler_transition(b.closed_loop(xi, k), xi) - explicit_euler_transition(a.closed_loop(xi, k), xi);
  const double dpsi = psi(xi / 0.7 + 0.4) - psi(xi + 0.1);
  CHECK(d1(0, 1) == doctest::Approx(xi * dpsi).epsilon(1e-12));
  CHECK(d1(1, 0) == doctest::Approx(xi * dpsi).epsilon(1e-12));
}

TEST_CASE("Neumann Laplacian structure") {
  for (int level : {0, 1}) {
    const ParabolicGrid g = parabolic_grid(level);
    const Matrix lap = Matrix(neumann_laplacian(g));
    CHECK(lap.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-9);
    const Vector w = g.weights();
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-14));
    const Matrix wl = w.asDiagonal() * lap;
    CHECK(max_abs(wl - wl.transpose()) <= 1e-9 * max_abs(wl));
    const Vector s = w.cwiseSqrt();
    const Matrix sym = s.asDiagonal() * lap * s.cwiseInverse().asDiagonal();
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(sym));
    CHECK(eig.eigenvalues().maxCoeff() <= 1e-8);
    CHECK(std::abs(eig.eigenvalues().maxCoeff()) <= 1e-8);
    CHECK(eig.eigenvalues()(eig.eigenvalues().size() - 2) < -1.0);
  }
}

TEST_CASE("discrete operators on constant and linear fields") {
  const ParabolicGrid g = parabolic_grid(1);
  const Vector one = Vector::Ones(g.size());
  CHECK(max_abs(neumann_laplacian(g) * one) <= 1e-9);
  CHECK(max_abs(gradient_x(g) * one) <= 1e-12);
  CHECK(max_abs(gradient_y(g) * one) <= 1e-12);
  const Vector x1 = grid_field(g, [](double x, double) { return x; });
  const Vector gx = gradient_x(g) * x1;
  // Interior nodes see the exact slope; boundary nodes use the reflected ghost value.
  for (int j = 0; j < g.nodes; ++j)
    for (int i = 1; i + 1 < g.nodes; ++i) CHECK(gx(g.index(i, j)) == doctest::Approx(1.0));
  const Vector b = convection_field(kPi / 2);
  CHECK(std::abs(b(0)) <= 1e-16);
  CHECK(b(1) == 1.0);
  CHECK(convection_field(0.0)(0) == -0.5);
}

TEST_CASE("eigenfunction outputs are orthonormal on the grid") {
  const auto modes = neumann_modes(6);
  CHECK(modes[0] == std::array<int, 2>{0, 0});
  CHECK(modes[1] == std::array<int, 2>{1, 0});
  CHECK(modes[2] == std::array<int, 2>{0, 1});
  CHECK(modes[3] == std::array<int, 2>{1, 1});
  const ParabolicGrid g = parabolic_grid(2);
  const Matrix out = eigenfunction_outputs(g, 3);
  const Vector w = g.weights();
  const Vector e1 = grid_field(g, [](double x, double) { return std::cos(kPi * x); });
  const Vector z = out * (e1 / weighted_norm(w, e1));
  CHECK(z(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(z(0)) <= 1e-3);
  CHECK(std::abs(z(2)) <= 1e-3);
}

TEST_CASE("actuators are indicator functions of their boxes") {
  const ParabolicGrid g = parabolic_grid(1);
  const Matrix b = actuator_matrix(g, ParabolicConfig{}.actuators);
  CHECK(b.cols() == 4);
  CHECK(b.minCoeff() == 0.0);
  CHECK(b.maxCoeff() == 1.0);
  const Vector w = g.weights();
  for (Eigen::Index c = 0; c < 4; ++c) CHECK(w.dot(b.col(c)) == doctest::Approx(0.04).epsilon(0.3));
  CHECK_THROWS(actuator_matrix(g, {{0.5, 0.4, 0.1, 0.2}}));
}

TEST_CASE("grid transfer operators") {
  for (int from : {0, 1}) {
    const int to = from + 1;
    const Matrix id = Matrix(restriction(to, from) * prolongation(from, to));
    CHECK(max_abs(id - Matrix::Identity(id.rows(), id.cols())) == 0.0);
    const ParabolicGrid coarse = parabolic_grid(from), fine = parabolic_grid(to);
    const Vector lin_c = grid_field(coarse, [](double x, double y) { return 2.0 * x - y + 0.5; });
    const Vector lin_f = grid_field(fine, [](double x, double y) { return 2.0 * x - y + 0.5; });
    CHECK(max_abs(prolong(lin_c, from, to) - lin_f) <= 1e-14);
    CHECK(max_abs(prolong(Vector::Ones(coarse.size()), from, to) - Vector::Ones(fine.size())) == 0.0);
    CHECK(max_abs(restrict_field(lin_f, to, from) - lin_c) == 0.0);
  }
  CHECK(max_abs(Matrix(prolongation(0, 2)) - Matrix(prolongation(1, 2) * prolongation(0, 1))) <= 1e-15);
}

TEST_CASE("parabolic free dynamics: growth and level consistency") {
  const IntegratorConfig cfg{Scheme::CNAB, 1e-3};
  double final_norm[3] = {0, 0, 0};
  for (int level : {0, 2}) {
    const ControlSystem sys = build_parabolic(0.7, level);
    CHECK(sys.n() == parabolic_grid(level).size());
    const Vector y0 = parabolic_initial_state(level);
    const Trajectory tr = integrate_closed_loop(sys, {}, y0, 0.0, 2.0, cfg, {50, false});
    final_norm[level] = tr.norm.back() / tr.norm.front();
  }
  CHECK(final_norm[0] > 1.0);
  CHECK(final_norm[0] == doctest::Approx(final_norm[2]).epsilon(0.05));
  const ControlSystem coarse = build_parabolic(0.7, 0);
  CHECK(coarse.n() == 81);
  CHECK(coarse.m() == 4);
  CHECK(coarse.p() == 3);
  CHECK(coarse.A.period() == 1.0);
  const ControlSystem fine = build_parabolic(0.7, 1, {}, 0);
  CHECK(fine.gain_dim() == 81);
}

TEST_CASE("one-member ensemble reduces to the member Riccati solution") {
  const ControlSystem member = build_oscillator(0.3);
  const EnsembleSystem ens = build_ensemble({member}, EnsembleWeight::Riccati);
  const RiccatiSolution ext = solve_are(ens.extended.A.evaluate(0), ens.extended.B, ens.extended.Q);
  const GainSchedule rob = robust_schedule(ens, ext);
  const Matrix pi = solve_are(member.A.evaluate(0), member.B, member.Q).values.front();
  CHECK(max_abs(rob.gains.front() + member.B.transpose() * pi) <= 1e-8);

  const ControlSystem per = build_periodic(1.0, 0.2);
  const EnsembleSystem pens = build_ensemble({per}, EnsembleWeight::Riccati);
  const GainSchedule prob = robust_schedule(pens, solve_periodic_riccati(pens.extended));
  const RiccatiSolution direct = solve_periodic_riccati(per);
  for (std::size_t j = 0; j < prob.mesh.size(); ++j)
    CHECK(max_abs(prob.gains[j] + per.B.transpose() * direct.values[j]) <= 1e-8);
}

TEST_CASE("two-phase robust feedback stabilizes both members") {
  const std::vector<ControlSystem> members = {build_periodic(1.0, 0.0), build_periodic(1.0, 0.5)};
  const EnsembleSystem ens = build_ensemble(members);
  CHECK(ens.extended.n() == 4);
  CHECK(max_abs(ens.extended.Q.transpose() * ens.extended.Q -
                0.5 * ens.replication * members[0].C.transpose() * members[0].C * ens.replication.transpose()) <= 1e-14);
  const GainSchedule rob = robust_schedule(ens, solve_periodic_riccati(ens.extended));
  const GainFunction gain = [&rob](double t) { return rob.at(t); };
  for (const auto& m : members) CHECK(spectral_radius(transition_matrix(m, gain, 0.0, 1.0, 1e-3)) < 1.0);
  CHECK_THROWS(build_ensemble({build_periodic(1.0, 0.0), build_oscillator(0.1)}));
  CHECK_THROWS(build_ensemble({}));
}

}
