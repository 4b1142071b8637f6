#include "adstab/operator.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace adstab {

Coefficient Coefficient::constant(double c) {
  return Coefficient{[c](double) { return c; }, [](double, int) { return 0.0; }};
}

class TimePeriodicOperator::Impl {
 public:
  virtual ~Impl() = default;
  virtual Eigen::Index dim() const = 0;
  virtual double period() const = 0;
  virtual bool autonomous() const { return false; }
  // Arguments below are already reduced modulo the period.
  virtual Matrix evaluate(double t) const = 0;
  virtual Vector apply(double t, const Vector& y) const { return evaluate(t) * y; }
  virtual std::optional<Matrix> analytic_derivative(double, int) const { return std::nullopt; }
  virtual bool has_analytic_derivatives() const { return false; }
};

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class ConstantImpl final : public TimePeriodicOperator::Impl {
 public:
  explicit ConstantImpl(Matrix a) : a_(std::move(a)) {}
  Eigen::Index dim() const override { return a_.rows(); }
  double period() const override { return 1.0; }
  bool autonomous() const override { return true; }
  Matrix evaluate(double) const override { return a_; }
  Vector apply(double, const Vector& y) const override { return a_ * y; }
  std::optional<Matrix> analytic_derivative(double, int) const override {
    return Matrix::Zero(a_.rows(), a_.cols());
  }
  bool has_analytic_derivatives() const override { return true; }

 private:
  Matrix a_;
};

class RuleImpl final : public TimePeriodicOperator::Impl {
 public:
  RuleImpl(Eigen::Index n, TimePeriodicOperator::Rule rule, double period,
           TimePeriodicOperator::DerivativeRule derivative)
      : n_(n), rule_(std::move(rule)), period_(period), derivative_(std::move(derivative)) {}
  Eigen::Index dim() const override { return n_; }
  double period() const override { return period_; }
  Matrix evaluate(double t) const override {
    Matrix a = rule_(t);
    require_dims(a.rows() == n_ && a.cols() == n_, "operator rule returned wrong shape");
    return a;
  }
  std::optional<Matrix> analytic_derivative(double t, int k) const override {
    if (!derivative_) return std::nullopt;
    return derivative_(t, k);
  }
  bool has_analytic_derivatives() const override { return static_cast<bool>(derivative_); }

 private:
  Eigen::Index n_;
  TimePeriodicOperator::Rule rule_;
  double period_;
  TimePeriodicOperator::DerivativeRule derivative_;
};

class AffineImpl final : public TimePeriodicOperator::Impl {
 public:
  AffineImpl(std::vector<TimePeriodicOperator::Term> terms, double period)
      : terms_(std::move(terms)), period_(period) {
    require_dims(!terms_.empty(), "affine operator needs at least one term");
    n_ = terms_.front().matrix.rows();
    for (const auto& term : terms_) {
      require_dims(term.matrix.rows() == n_ && term.matrix.cols() == n_,
                   "affine operator terms must share one square shape");
    }
  }
  Eigen::Index dim() const override { return n_; }
  double period() const override { return period_; }
  Matrix evaluate(double t) const override {
    Matrix a = Matrix::Zero(n_, n_);
    for (const auto& term : terms_) a += term.coefficient.value(t) * Matrix(term.matrix);
    return a;
  }
  Vector apply(double t, const Vector& y) const override {
    Vector out = Vector::Zero(n_);
    for (const auto& term : terms_) out += term.coefficient.value(t) * (term.matrix * y);
    return out;
  }
  std::optional<Matrix> analytic_derivative(double t, int k) const override {
    if (!has_analytic_derivatives()) return std::nullopt;
    Matrix a = Matrix::Zero(n_, n_);
    for (const auto& term : terms_) a += term.coefficient.derivative(t, k) * Matrix(term.matrix);
    return a;
  }
  bool has_analytic_derivatives() const override {
    return std::all_of(terms_.begin(), terms_.end(),
                       [](const auto& term) { return static_cast<bool>(term.coefficient.derivative); });
  }

 private:
  std::vector<TimePeriodicOperator::Term> terms_;
  double period_;
  Eigen::Index n_ = 0;
};

class BlockDiagonalImpl final : public TimePeriodicOperator::Impl {
 public:
  explicit BlockDiagonalImpl(std::vector<TimePeriodicOperator> blocks) : blocks_(std::move(blocks)) {
    require_dims(!blocks_.empty(), "block-diagonal operator needs at least one block");
    autonomous_ = std::all_of(blocks_.begin(), blocks_.end(),
                              [](const auto& b) { return b.autonomous(); });
    period_ = 1.0;
    bool have_period = false;
    for (const auto& b : blocks_) {
      n_ += b.dim();
      if (b.autonomous()) continue;
      if (!have_period) {
        period_ = b.period();
        have_period = true;
      } else if (std::abs(b.period() - period_) > 1e-12 * std::max(1.0, period_)) {
        throw DimensionError("block-diagonal operator blocks must share one period");
      }
    }
  }
  Eigen::Index dim() const override { return n_; }
  double period() const override { return period_; }
  bool autonomous() const override { return autonomous_; }
  Matrix evaluate(double t) const override {
    return assemble([t](const TimePeriodicOperator& b) { return b.evaluate(t); });
  }
  Vector apply(double t, const Vector& y) const override {
    Vector out(n_);
    Eigen::Index offset = 0;
    for (const auto& b : blocks_) {
      out.segment(offset, b.dim()) = b.apply(t, y.segment(offset, b.dim()));
      offset += b.dim();
    }
    return out;
  }
  std::optional<Matrix> analytic_derivative(double t, int k) const override {
    if (!has_analytic_derivatives()) return std::nullopt;
    return assemble([t, k](const TimePeriodicOperator& b) { return b.derivative(t, k); });
  }
  bool has_analytic_derivatives() const override {
    return std::all_of(blocks_.begin(), blocks_.end(),
                       [](const auto& b) { return b.has_analytic_derivatives(); });
  }

 private:
  template <typename F>
  Matrix assemble(F&& block_value) const {
    Matrix a = Matrix::Zero(n_, n_);
    Eigen::Index offset = 0;
    for (const auto& b : blocks_) {
      a.block(offset, offset, b.dim(), b.dim()) = block_value(b);
      offset += b.dim();
    }
    return a;
  }

  std::vector<TimePeriodicOperator> blocks_;
  Eigen::Index n_ = 0;
  double period_ = 1.0;
  bool autonomous_ = false;
};

class SwitchedImpl final : public TimePeriodicOperator::Impl {
 public:
  SwitchedImpl(std::vector<TimePeriodicOperator> pieces, std::vector<double> switch_times)
      : pieces_(std::move(pieces)), switches_(std::move(switch_times)) {
    require_dims(!pieces_.empty(), "switched operator needs at least one piece");
    require_dims(switches_.size() + 1 == pieces_.size(),
                 "switched operator needs one switch time fewer than pieces");
    if (!std::is_sorted(switches_.begin(), switches_.end())) {
      throw std::invalid_argument("switch times must be increasing");
    }
    for (const auto& p : pieces_) {
      require_dims(p.dim() == pieces_.front().dim(), "switched pieces must share one dimension");
    }
  }
  Eigen::Index dim() const override { return pieces_.front().dim(); }
  double period() const override { return pieces_.size() == 1 ? pieces_.front().period() : kInf; }
  bool autonomous() const override {
    return pieces_.size() == 1 && pieces_.front().autonomous();
  }
  Matrix evaluate(double t) const override { return active(t).evaluate(t); }
  Vector apply(double t, const Vector& y) const override { return active(t).apply(t, y); }
  std::optional<Matrix> analytic_derivative(double t, int k) const override {
    const auto& p = active(t);
    if (!p.has_analytic_derivatives()) return std::nullopt;
    return p.derivative(t, k);
  }
  bool has_analytic_derivatives() const override {
    return std::all_of(pieces_.begin(), pieces_.end(),
                       [](const auto& p) { return p.has_analytic_derivatives(); });
  }

 private:
  const TimePeriodicOperator& active(double t) const {
    const auto it = std::upper_bound(switches_.begin(), switches_.end(), t);
    return pieces_[static_cast<std::size_t>(it - switches_.begin())];
  }

  std::vector<TimePeriodicOperator> pieces_;
  std::vector<double> switches_;
};

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TimePeriodicOperator::TimePeriodicOperator()
    : impl_(std::make_shared<ConstantImpl>(Matrix(0, 0))) {}

TimePeriodicOperator::TimePeriodicOperator(std::shared_ptr<const Impl> impl)
    : impl_(std::move(impl)) {}

TimePeriodicOperator TimePeriodicOperator::constant(const Matrix& a) {
  require_dims(a.rows() == a.cols(), "operator matrix must be square");
  return TimePeriodicOperator(std::make_shared<ConstantImpl>(a));
}

TimePeriodicOperator TimePeriodicOperator::from_rule(Eigen::Index n, Rule rule, double period,
                                                     DerivativeRule derivative) {
  if (!(period > 0.0)) throw std::invalid_argument("operator period must be positive");
  return TimePeriodicOperator(
      std::make_shared<RuleImpl>(n, std::move(rule), period, std::move(derivative)));
}

TimePeriodicOperator TimePeriodicOperator::affine(std::vector<Term> terms, double period) {
  if (!(period > 0.0)) throw std::invalid_argument("operator period must be positive");
  return TimePeriodicOperator(std::make_shared<AffineImpl>(std::move(terms), period));
}

TimePeriodicOperator TimePeriodicOperator::block_diagonal(
    const std::vector<TimePeriodicOperator>& blocks) {
  return TimePeriodicOperator(std::make_shared<BlockDiagonalImpl>(blocks));
}

TimePeriodicOperator TimePeriodicOperator::switched(std::vector<TimePeriodicOperator> pieces,
                                                    std::vector<double> switch_times) {
  return TimePeriodicOperator(
      std::make_shared<SwitchedImpl>(std::move(pieces), std::move(switch_times)));
}

Eigen::Index TimePeriodicOperator::dim() const { return impl_->dim(); }
double TimePeriodicOperator::period() const { return impl_->period(); }
bool TimePeriodicOperator::autonomous() const { return impl_->autonomous(); }

double TimePeriodicOperator::reduce(double t) const {
  if (autonomous() || !is_periodic()) return t;
  const double p = period();
  double r = std::fmod(t, p);
  if (r < 0.0) r += p;
  if (r >= p) r = 0.0;
  return r;
}

Matrix TimePeriodicOperator::evaluate(double t) const { return impl_->evaluate(reduce(t)); }

Vector TimePeriodicOperator::apply(double t, const Vector& y) const {
  require_dims(y.size() == dim(), "operator applied to vector of wrong length");
  return impl_->apply(reduce(t), y);
}

Matrix TimePeriodicOperator::derivative(double t, int order) const {
  if (order < 0) throw std::invalid_argument("derivative order must be nonnegative");
  if (order == 0) return evaluate(t);
  if (autonomous()) return Matrix::Zero(dim(), dim());
  if (auto d = impl_->analytic_derivative(reduce(t), order)) return *d;
  return finite_difference_derivative(t, order);
}

Matrix TimePeriodicOperator::finite_difference_derivative(double t, int order) const {
  if (order == 0) return evaluate(t);
  const double scale = is_periodic() ? std::max(1.0, period()) : 1.0;
  const double h = scale * (order == 1 ? 1e-6
                                       : std::pow(std::numeric_limits<double>::epsilon(),
                                                  1.0 / (order + 2)));
  // Central difference: sum_i (-1)^i C(k,i) f(t + (k/2 - i) h) / h^k.
  Matrix acc = Matrix::Zero(dim(), dim());
  for (int i = 0; i <= order; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    acc += sign * binomial(order, i) * evaluate(t + (0.5 * order - i) * h);
  }
  return acc / std::pow(h, order);
}

bool TimePeriodicOperator::has_analytic_derivatives() const {
  return autonomous() || impl_->has_analytic_derivatives();
}

}  // namespace adstab
