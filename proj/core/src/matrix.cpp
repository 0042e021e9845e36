#include "idnmf/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "idnmf/errors.hpp"

namespace idnmf {
namespace {

std::string cell(const char* what, Eigen::Index i, Eigen::Index j) {
  return std::string(what) + "(" + std::to_string(i) + ", " + std::to_string(j) + ")";
}

}  // namespace

void clamp_nonnegative(Matrix& m, const char* what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double& x = m(i, j);
      if (!std::isfinite(x)) throw DomainError(cell(what, i, j) + " is not finite");
      if (x < 0.0) {
        if (x < -kClampTolerance) throw DomainError(cell(what, i, j) + " is negative");
        x = 0.0;
      }
    }
  }
}

void require_nonnegative(const Matrix& m, const char* what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double x = m(i, j);
      if (!std::isfinite(x)) throw DomainError(cell(what, i, j) + " is not finite");
      if (x < 0.0) throw DomainError(cell(what, i, j) + " is negative");
    }
  }
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError("max_abs_diff: shape mismatch");
  }
  double gap = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) gap = std::max(gap, std::abs(a(i, j) - b(i, j)));
  }
  return gap;
}

DataMatrix::DataMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) throw UsageError("data matrix must be at least 1x1");
  clamp_nonnegative(values_, "V");
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index j = 0; j < values_.cols(); ++j) total_ += values_(i, j);
  }
  if (!(total_ > 0.0)) throw DomainError("data matrix is identically zero");
}

FactorPair::FactorPair(Matrix w, Matrix h) : w_(std::move(w)), h_(std::move(h)) {
  if (w_.cols() != h_.rows()) {
    throw UsageError("factor shapes disagree: W is " + std::to_string(w_.rows()) + "x" +
                     std::to_string(w_.cols()) + ", H is " + std::to_string(h_.rows()) + "x" +
                     std::to_string(h_.cols()));
  }
  const Eigen::Index k = w_.cols();
  if (k < 1 || k > std::min(w_.rows(), h_.cols())) {
    throw UsageError("rank " + std::to_string(k) + " outside [1, min(m, n)]");
  }
  require_nonnegative(w_, "W");
  require_nonnegative(h_, "H");
  for (Eigen::Index l = 0; l < k; ++l) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < h_.cols(); ++j) s += h_(l, j);
    if (std::abs(s - 1.0) > kStochasticTolerance) {
      throw DomainError("row " + std::to_string(l) + " of H sums to " + std::to_string(s) +
                        ", expected 1");
    }
  }
}

}  // namespace idnmf
