#include "idnmf/divergence.hpp"

#include <cmath>
#include <string>

#include "idnmf/errors.hpp"

namespace idnmf {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// x - log(1 + x) = sum_{k>=2} (-1)^k x^k / k, for |x| <= 1e-2.
double x_minus_log1p_series(double x) noexcept {
  double power = x * x;
  double acc = 0.0;
  for (int k = 2; k <= 12; ++k) {
    acc += ((k % 2 == 0) ? power : -power) / k;
    power *= x;
  }
  return acc;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

void require_compatible(const DataMatrix& v, const FactorPair& f, const char* op) {
  if (v.rows() != f.rows() || v.cols() != f.cols()) {
    throw UsageError(std::string(op) + ": data is " + std::to_string(v.rows()) + "x" +
                     std::to_string(v.cols()) + " but factors give " + std::to_string(f.rows()) +
                     "x" + std::to_string(f.cols()));
  }
}

}  // namespace

DivergenceValue::DivergenceValue(double value) : value_(value) {
  if (std::isnan(value) || value < 0.0) {
    throw DomainError("divergence value must be >= 0, got " + std::to_string(value));
  }
}

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    correction_ += (sum_ - t) + x;
  } else {
    correction_ += (x - t) + sum_;
  }
  sum_ = t;
}

double divergence_term(double m, double n) noexcept {
  if (m == 0.0) return n;
  if (n == 0.0) return kInf;
  const double x = (n - m) / m;
  if (std::abs(x) <= 1e-2) return m * x_minus_log1p_series(x);
  const double r = m / n;
  const double log_ratio = (std::isfinite(r) && r > 0.0) ? std::log(r) : std::log(m) - std::log(n);
  return m * log_ratio - m + n;
}

DivergenceValue i_divergence(const Matrix& m, const Matrix& n) {
  require_same_shape(m, n, "i_divergence");
  require_nonnegative(m, "M");
  require_nonnegative(n, "N");
  CompensatedSum sum;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double t = divergence_term(m(i, j), n(i, j));
      if (t == kInf) return DivergenceValue::infinity();
      sum.add(t);
    }
  }
  return DivergenceValue(sum.value());
}

Matrix wh_product(const FactorPair& f) {
  const Matrix& w = f.w();
  const Matrix& h = f.h();
  Matrix out(w.rows(), h.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index l = 0; l < w.cols(); ++l) s += w(i, l) * h(l, j);
      out(i, j) = s;
    }
  }
  return out;
}

DivergenceValue divergence(const DataMatrix& v, const FactorPair& f) {
  require_compatible(v, f, "divergence");
  return i_divergence(v.values(), wh_product(f));
}

double objective(const DataMatrix& v, const FactorPair& f) {
  require_compatible(v, f, "objective");
  const Matrix q = wh_product(f);
  CompensatedSum sum;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      const double p = v.values()(i, j);
      const double model = q(i, j);
      if (p > 0.0) {
        if (model == 0.0) return -kInf;
        sum.add(p * std::log(model));
      }
      sum.add(-model);
    }
  }
  return sum.value();
}

double entropy_constant(const DataMatrix& v) {
  CompensatedSum sum;
  const Matrix& m = v.values();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double p = m(i, j);
      if (p > 0.0) sum.add(p * std::log(p));
      sum.add(-p);
    }
  }
  return sum.value();
}

}  // namespace idnmf
