#include "adstab/linalg.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace adstab {

namespace {
std::string blowup_message(double time, double norm) {
  std::ostringstream os;
  os << "state blew up at t = " << time << " (|y| = " << norm << ")";
  return os.str();
}
}  // namespace

BlowUpError::BlowUpError(double time, double norm)
    : NumericalError(blowup_message(time, norm)), time_(time), norm_(norm) {}

void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError("dimension mismatch: " + what);
}

double spectral_abscissa(const Matrix& a) {
  require_dims(a.rows() == a.cols(), "spectral_abscissa needs a square matrix");
  if (a.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

double spectral_radius(const Matrix& a) {
  require_dims(a.rows() == a.cols(), "spectral_radius needs a square matrix");
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_hurwitz(const Matrix& a) { return spectral_abscissa(a) < 0.0; }

RankInfo numerical_rank(const Matrix& a) {
  RankInfo info;
  if (a.size() == 0) return info;
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  info.sigma_max = s(0);
  info.sigma_min = s(s.size() - 1);
  const double threshold = static_cast<double>(std::max(a.rows(), a.cols())) *
                           std::numeric_limits<double>::epsilon() * info.sigma_max;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > threshold) ++info.rank;
  }
  return info;
}

double min_symmetric_eigenvalue(const Matrix& a) {
  require_dims(a.rows() == a.cols(), "min_symmetric_eigenvalue needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace adstab
