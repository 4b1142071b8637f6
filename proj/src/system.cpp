#include "adstab/system.hpp"

#include <cmath>

namespace adstab {

bool ParameterBox::contains(const Parameter& sigma, double slack) const {
  if (sigma.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) < lower(i) - slack || sigma(i) > upper(i) + slack) return false;
  }
  return true;
}

void ControlSystem::validate() const {
  const auto n_ = n();
  require_dims(B.rows() == n_, "B must have n rows");
  require_dims(C.cols() == n_, "C must have n columns");
  require_dims(Q.cols() == n_, "Q must have n columns");
  require_dims(implicit_part.size() == 0 ||
                   (implicit_part.rows() == n_ && implicit_part.cols() == n_),
               "implicit part must be n x n");
  require_dims(feedback_restriction.size() == 0 || feedback_restriction.cols() == n_,
               "feedback restriction must have n columns");
  require_dims(norm_weights.size() == 0 || norm_weights.size() == n_,
               "norm weights must have length n");
  if (!B.allFinite() || !C.allFinite() || !Q.allFinite()) {
    throw std::invalid_argument("system matrices must be finite");
  }
  if (box && !box->contains(sigma)) {
    throw std::invalid_argument("parameter lies outside the declared parameter box");
  }
}

double ControlSystem::norm(const Vector& y) const {
  if (norm_weights.size() == 0) return y.norm();
  return std::sqrt((norm_weights.array() * y.array().square()).sum());
}

Vector ControlSystem::restrict_for_gain(const Vector& y) const {
  if (feedback_restriction.size() == 0) return y;
  return feedback_restriction * y;
}

Matrix ControlSystem::closed_loop(double t, const Matrix& gain) const {
  Matrix a = A.evaluate(t);
  if (gain.size() == 0) return a;
  require_dims(gain.rows() == m() && gain.cols() == gain_dim(), "gain shape must be m x gain_dim");
  if (feedback_restriction.size() == 0) {
    a.noalias() += B * gain;
  } else {
    Matrix kr = gain * feedback_restriction;
    a.noalias() += B * kr;
  }
  return a;
}

}  // namespace adstab
