#pragma once

#include <compare>
#include <limits>

#include "idnmf/matrix.hpp"

namespace idnmf {

/// Extended nonnegative real: a finite value >= 0 or +infinity.
class DivergenceValue {
 public:
  constexpr DivergenceValue() = default;
  /// @throws DomainError for NaN or negative values.
  explicit DivergenceValue(double value);

  static constexpr DivergenceValue infinity() noexcept {
    DivergenceValue d;
    d.value_ = std::numeric_limits<double>::infinity();
    return d;
  }

  constexpr double value() const noexcept { return value_; }
  constexpr bool is_finite() const noexcept {
    return value_ < std::numeric_limits<double>::infinity();
  }

  friend constexpr auto operator<=>(DivergenceValue, DivergenceValue) = default;

 private:
  double value_ = 0.0;
};

/// Neumaier-compensated running sum. Terms are added in call order.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + correction_; }

 private:
  double sum_ = 0.0;
  double correction_ = 0.0;
};

/**
 * Single-cell I-divergence contribution m log(m/n) - m + n under the
 * conventions 0 log 0 = 0, 0/0 = 0 and p/0 = +inf for p > 0.
 *
 * The result is >= 0 and is exactly 0 only when m == n; near m == n the
 * contribution is evaluated through the series of x - log(1 + x) so that
 * tiny mismatches do not cancel to zero.
 */
double divergence_term(double m, double n) noexcept;

/// D(M||N) summed in row-major order with compensated summation.
/// @throws UsageError on shape mismatch, DomainError on negative entries.
DivergenceValue i_divergence(const Matrix& m, const Matrix& n);

/// The product W H, accumulated over the inner index in ascending order.
Matrix wh_product(const FactorPair& f);

/// D(V || W H).
DivergenceValue divergence(const DataMatrix& v, const FactorPair& f);

/**
 * F(W, H) = sum_ij V_ij log (WH)_ij - (WH)_ij.
 *
 * Returns -inf when some V_ij > 0 meets (WH)_ij = 0. For finite values,
 * D(V || WH) + F(W, H) = entropy_constant(V).
 *
 * @throws UsageError on shape mismatch.
 */
double objective(const DataMatrix& v, const FactorPair& f);

/// sum_ij V_ij log V_ij - V_ij (with 0 log 0 = 0).
double entropy_constant(const DataMatrix& v);

}  // namespace idnmf
