#pragma once

#include <cmath>
#include <random>

#include "adstab/linalg.hpp"
#include "adstab/riccati.hpp"
#include "adstab/system.hpp"

namespace testing {

using adstab::Matrix;
using adstab::Vector;

inline double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale);
}

inline int random_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double random_real(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Triple {
  Matrix a, b, q;
};

// (A, B) controllable and (A, Q) observable; A drawn with a random spectral shift so that
// Hurwitz, mildly unstable and strongly unstable cases all occur.
inline Triple stabilizable_triple(std::mt19937_64& rng, int max_n = 6) {
  for (;;) {
    const int n = random_int(rng, 1, max_n);
    const int m = random_int(rng, 1, std::min(n, 3));
    const int q = random_int(rng, 1, n);
    Triple t{random_matrix(rng, n, n, 2.0), random_matrix(rng, n, m), random_matrix(rng, q, n)};
    t.a.diagonal().array() += random_real(rng, -2.0, 2.0);
    if (adstab::kalman_rank(t.a, t.b) && adstab::kalman_rank(t.a.transpose(), t.q.transpose())) return t;
  }
}

inline adstab::ControlSystem scalar_system(double a, double b = 0.0, double c = 1.0) {
  adstab::ControlSystem sys;
  sys.A = adstab::TimePeriodicOperator::constant(Matrix::Constant(1, 1, a));
  sys.B = Matrix::Constant(1, 1, b);
  sys.C = Matrix::Constant(1, 1, c);
  sys.Q = sys.C;
  sys.sigma = Vector::Constant(1, a);
  return sys;
}

inline adstab::ControlSystem dense_system(const Matrix& a, const Matrix& b, const Matrix& c) {
  adstab::ControlSystem sys;
  sys.A = adstab::TimePeriodicOperator::constant(a);
  sys.B = b;
  sys.C = c;
  sys.Q = c;
  sys.sigma = Vector::Zero(1);
  return sys;
}

}  // namespace testing
